#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mygo/config.hpp"
#include "mygo/gradcheck.hpp"
#include "mygo/synthetic.hpp"

namespace mygo {

const char* tool_version();

/// Graph plus refined model inputs, and the files they came from.
struct LoadedData {
    KnowledgeGraph graph;
    EntityInputs inputs;
    std::vector<std::filesystem::path> files;
};

/// Loads the graph and catalogs; refines tokens from the raw streams, or
/// reads `refined_cache` when that key is set. A missing stop-word file is an
/// empty set.
LoadedData load_data(const RunConfig& config);

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

/// Writes config.txt (canonical echo) and provenance.txt (version, command,
/// data checksums) into config.out.
void write_provenance(const RunConfig& config, const std::string& command,
                      const std::vector<std::filesystem::path>& files);

struct PrepareResult {
    TokenStats visual;
    TokenStats textual;
    std::filesystem::path cache;
};
PrepareResult cmd_prepare(const RunConfig& config);

struct TrainResult {
    std::filesystem::path last_checkpoint;
    std::optional<std::filesystem::path> best_checkpoint;
    std::vector<StepLog> log;
};
TrainResult cmd_train(const RunConfig& config);

/// Evaluates `checkpoint` on `split` (train, valid or test). Model settings
/// come from the checkpoint's config echo; data, out and workers from `config`.
MetricsReport cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint,
                       const std::string& split, bool dump_scores);

struct GradCheckSetup {
    std::size_t entities = 5;
    std::size_t relations = 2;
    std::size_t triples = 6;
    ModelConfig model;
    std::uint64_t seed = 0;

    GradCheckSetup();
    /// Tiny defaults overridden by the model keys `config` sets explicitly.
    static GradCheckSetup from(const RunConfig& config);
};
GradCheckReport cmd_gradcheck(const GradCheckSetup& setup, const GradCheckOptions& options = {});

/// Trains with the named ablation and evaluates the train split plus any
/// non-empty valid/test split. Returns the train-split report.
MetricsReport cmd_ablate(const RunConfig& config, const std::string& name);

void cmd_synth(const SyntheticSpec& spec, const std::filesystem::path& dir);

}  // namespace mygo
