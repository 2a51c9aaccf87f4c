#pragma once

#include <cstdint>
#include <filesystem>

#include "mygo/model.hpp"

namespace mygo {

/// Random multi-modal graph used by the smoke tests and `mygo synth`.
struct SyntheticSpec {
    std::size_t entities = 20;
    std::size_t relations = 3;
    std::size_t train = 60;
    std::size_t valid = 0;
    std::size_t test = 0;
    std::uint32_t visual_size = 64;
    std::uint32_t visual_dim = 16;
    std::uint32_t textual_size = 128;
    std::uint32_t textual_dim = 16;
    /// Sources per entity are drawn from [0, max]; tokens per source from [1, max].
    std::size_t max_visual_sources = 3;
    std::size_t max_textual_sources = 1;
    std::size_t max_tokens_per_source = 12;
    std::size_t stopwords = 6;
    std::uint64_t seed = 0;
};

struct SyntheticDataset {
    KnowledgeGraph graph;
    TokenCatalog visual;
    TokenCatalog textual;
    RawTokenStream visual_stream;
    RawTokenStream textual_stream;
    StopwordSet stopwords;

    /// Refines the streams into model inputs with `m` / `n` slots.
    EntityInputs inputs(std::size_t m, std::size_t n, RefineMode mode = RefineMode::frequency) const;
};

/// Throws ConfigError when more distinct triples are asked for than exist.
SyntheticDataset make_synthetic(const SyntheticSpec& spec);

/// Writes graph TSVs, visual.cat, textual.cat, visual_tokens.tsv,
/// textual_tokens.tsv and stopwords.txt into `dir`.
void write_dataset(const SyntheticDataset& data, const std::filesystem::path& dir);

}  // namespace mygo
