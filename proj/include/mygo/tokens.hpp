#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mygo/kg.hpp"

namespace mygo {

using TokenId = std::uint32_t;

enum class Modality : std::uint8_t { visual = 0, textual = 1 };

const char* modality_name(Modality modality);

/// Frozen feature table of one tokenizer. Row `size` is the padding token,
/// appended at load time with a zero feature.
struct TokenCatalog {
    Modality modality = Modality::visual;
    std::uint32_t size = 0;
    std::uint32_t dim = 0;
    std::vector<float> features;  // (size + 1) x dim, row-major

    TokenId padding_id() const { return size; }
    std::span<const float> row(TokenId id) const {
        return {features.data() + static_cast<std::size_t>(id) * dim, dim};
    }
};

/// Builds a catalog from size x dim values and appends the padding row.
TokenCatalog make_catalog(Modality modality, std::uint32_t size, std::uint32_t dim,
                          std::vector<float> values);

/// Binary layout: "MYTC", u32 version = 1, u8 modality, u32 size, u32 dim,
/// then size * dim little-endian f32 in row-major order.
TokenCatalog load_catalog(const std::filesystem::path& path);
void save_catalog(const TokenCatalog& catalog, const std::filesystem::path& path);

/// Per entity, one token list per source (image or description), ordered by
/// source index. Entities absent from the file have no sources.
struct RawTokenStream {
    std::vector<std::vector<std::vector<TokenId>>> sources;
};

/// Lines: `<entity_name>\t<source_index>\t<space-separated ids>`.
RawTokenStream load_token_stream(const std::filesystem::path& path, const KnowledgeGraph& graph,
                                 const TokenCatalog& catalog);
void save_token_stream(const RawTokenStream& stream, const KnowledgeGraph& graph,
                       const std::filesystem::path& path);

using StopwordSet = std::unordered_set<TokenId>;

/// One token id per line.
StopwordSet load_stopwords(const std::filesystem::path& path);

enum class RefineMode {
    /// Pool all sources, drop stop words, rank by (count desc, id asc), truncate.
    frequency,
    /// Keep the first tokens in arrival order; no ranking, no stop-word removal.
    first_arrival,
};

/// Exactly `length` ids per entity, padded with `padding_id`.
struct RefinedModality {
    std::size_t length = 0;
    TokenId padding_id = 0;
    std::vector<TokenId> ids;          // entity_count x length
    std::vector<std::uint32_t> counts; // pooled frequency of each retained id, 0 for padding

    std::size_t entity_count() const { return length == 0 ? 0 : ids.size() / length; }
    std::span<const TokenId> of(EntityId e) const { return {ids.data() + e * length, length}; }
};

RefinedModality refine_modality(const RawTokenStream& stream, const StopwordSet* stopwords,
                                std::size_t length, TokenId padding_id,
                                RefineMode mode = RefineMode::frequency);

struct RefinedTokenSet {
    RefinedModality visual;
    RefinedModality textual;

    std::size_t entity_count() const { return visual.entity_count(); }
    std::size_t m() const { return visual.length; }
    std::size_t n() const { return textual.length; }
};

/// Stop words apply to the textual modality only.
RefinedTokenSet refine_tokens(const RawTokenStream& visual, const RawTokenStream& textual,
                              const StopwordSet& stopwords, std::size_t m, std::size_t n,
                              TokenId visual_padding, TokenId textual_padding,
                              RefineMode mode = RefineMode::frequency);

/// (m visual ids, n textual ids) for entity e.
std::pair<std::span<const TokenId>, std::span<const TokenId>> sequence_for_entity(
    const RefinedTokenSet& refined, EntityId e);

/// Cache TSV: `<entity_name>\t<m ids>\t<n ids>`, one line per entity in id order.
void save_refined_cache(const RefinedTokenSet& refined, const KnowledgeGraph& graph,
                        const std::filesystem::path& path);
RefinedTokenSet load_refined_cache(const std::filesystem::path& path, const KnowledgeGraph& graph,
                                   const TokenCatalog& visual, const TokenCatalog& textual);

struct TokenStats {
    double coverage = 0;       // entities with at least one non-padding token
    double catalog_usage = 0;  // distinct retained ids / catalog size
};

TokenStats token_stats(const RefinedModality& refined, const TokenCatalog& catalog);

}  // namespace mygo
