#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "mygo/trainer.hpp"

namespace mygo {

/// Everything a command needs: training hyperparameters plus data paths.
///
/// File format is flat `key = value` text, one setting per line; `#` starts a
/// comment. Unknown keys are a ConfigError. Data paths left empty fall back to
/// the default file names inside `data`:
///
///   visual.cat, textual.cat, visual_tokens.tsv, textual_tokens.tsv,
///   stopwords.txt (optional), refined.tsv (written by `prepare`).
struct RunConfig {
    TrainConfig train;
    std::string ablation = "full";  // comma-separated ablation names
    std::filesystem::path data;
    std::filesystem::path visual_catalog;
    std::filesystem::path textual_catalog;
    std::filesystem::path visual_tokens;
    std::filesystem::path textual_tokens;
    std::filesystem::path stopwords;
    std::filesystem::path refined_cache;
    std::filesystem::path out = "out";
    /// Keys assigned through set(), in any source.
    std::set<std::string> explicit_keys;

    /// Sets one key; throws ConfigError on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    /// Applies every `key = value` line of `text`.
    void apply_text(const std::string& text, const std::string& source = "config");

    std::filesystem::path visual_catalog_path() const;
    std::filesystem::path textual_catalog_path() const;
    std::filesystem::path visual_tokens_path() const;
    std::filesystem::path textual_tokens_path() const;
    std::filesystem::path stopwords_path() const;
    std::filesystem::path refined_cache_path() const;

    /// Canonical `key = value` listing of every setting, in schema order.
    std::string to_text() const;
    /// Resolves the ablation string into model flags and validates everything.
    void finalize();
};

/// Union of comma-separated ablation names ("full" adds nothing).
Ablation combine_ablations(const std::string& list);

const std::vector<std::string>& config_keys();

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace mygo
