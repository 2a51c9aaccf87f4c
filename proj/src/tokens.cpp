#include "mygo/tokens.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "mygo/binary_io.hpp"
#include "mygo/errors.hpp"
#include "mygo/text.hpp"

namespace mygo {

namespace fs = std::filesystem;

namespace {
constexpr char kCatalogMagic[] = "MYTC";
constexpr std::uint32_t kCatalogVersion = 1;
}  // namespace

const char* modality_name(Modality modality) {
    return modality == Modality::visual ? "visual" : "textual";
}

TokenCatalog make_catalog(Modality modality, std::uint32_t size, std::uint32_t dim,
                          std::vector<float> values) {
    if (values.size() != static_cast<std::size_t>(size) * dim)
        throw DataError("catalog payload does not match size x dim");
    for (float v : values)
        if (!std::isfinite(v)) throw DataError("catalog contains a non-finite feature");
    TokenCatalog catalog{modality, size, dim, std::move(values)};
    catalog.features.resize(static_cast<std::size_t>(size + 1) * dim, 0.0f);
    return catalog;
}

TokenCatalog load_catalog(const fs::path& path) {
    ByteReader in = ByteReader::from_file(path);
    if (in.raw(4) != kCatalogMagic) throw DataError(path.string() + ": bad catalog magic");
    if (const auto version = in.u32(); version != kCatalogVersion)
        throw DataError(path.string() + ": unsupported catalog version " + std::to_string(version));
    const std::uint8_t modality = in.u8();
    if (modality > 1) throw DataError(path.string() + ": bad modality tag");
    const std::uint32_t size = in.u32();
    const std::uint32_t dim = in.u32();
    const std::size_t count = static_cast<std::size_t>(size) * dim;
    if (in.remaining() < count * 4)
        throw DataError(path.string() + ": truncated payload (expected " + std::to_string(count) +
                        " floats, found " + std::to_string(in.remaining() / 4) + ")");
    std::vector<float> values(count);
    for (float& v : values) v = in.f32();
    if (in.remaining() != 0) throw DataError(path.string() + ": trailing bytes after payload");
    try {
        return make_catalog(static_cast<Modality>(modality), size, dim, std::move(values));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void save_catalog(const TokenCatalog& catalog, const fs::path& path) {
    ByteWriter out;
    out.raw(kCatalogMagic);
    out.u32(kCatalogVersion);
    out.u8(static_cast<std::uint8_t>(catalog.modality));
    out.u32(catalog.size);
    out.u32(catalog.dim);
    const std::size_t count = static_cast<std::size_t>(catalog.size) * catalog.dim;
    for (std::size_t i = 0; i < count; ++i) out.f32(catalog.features[i]);
    out.write_file(path);
}

RawTokenStream load_token_stream(const fs::path& path, const KnowledgeGraph& graph,
                                 const TokenCatalog& catalog) {
    // Per entity: source index -> ids, so sources come out ordered by index.
    std::vector<std::map<std::uint32_t, std::vector<TokenId>>> by_entity(graph.entity_count());
    LineReader reader(path);
    std::string line;
    while (reader.next(line)) {
        const auto cols = split(line, '\t');
        if (cols.size() != 3)
            throw reader.error("expected 3 tab-separated columns, got " + std::to_string(cols.size()));
        EntityId e;
        if (!graph.find_entity(cols[0], e)) throw reader.error("unknown entity '" + cols[0] + "'");
        std::uint32_t source;
        std::vector<TokenId> ids;
        try {
            source = parse_u32(cols[1]);
            ids = parse_ids(cols[2]);
        } catch (const std::invalid_argument& err) {
            throw reader.error(err.what());
        }
        for (TokenId id : ids)
            if (id >= catalog.size)
                throw reader.error("token id " + std::to_string(id) + " outside catalog of size " +
                                   std::to_string(catalog.size));
        if (!by_entity[e].emplace(source, std::move(ids)).second)
            throw reader.error("duplicate source index " + cols[1] + " for entity '" + cols[0] + "'");
    }
    RawTokenStream stream;
    stream.sources.resize(graph.entity_count());
    for (std::size_t e = 0; e < by_entity.size(); ++e)
        for (auto& [index, ids] : by_entity[e]) stream.sources[e].push_back(std::move(ids));
    return stream;
}

void save_token_stream(const RawTokenStream& stream, const KnowledgeGraph& graph, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (std::size_t e = 0; e < stream.sources.size(); ++e)
        for (std::size_t s = 0; s < stream.sources[e].size(); ++s) {
            out << graph.entity_name(static_cast<EntityId>(e)) << '\t' << s << '\t';
            const auto& ids = stream.sources[e][s];
            for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? " " : "") << ids[i];
            out << '\n';
        }
}

StopwordSet load_stopwords(const fs::path& path) {
    LineReader reader(path);
    StopwordSet stopwords;
    std::string line;
    while (reader.next(line)) {
        try {
            stopwords.insert(parse_u32(line));
        } catch (const std::invalid_argument& err) {
            throw reader.error(err.what());
        }
    }
    return stopwords;
}

RefinedModality refine_modality(const RawTokenStream& stream, const StopwordSet* stopwords,
                                std::size_t length, TokenId padding_id, RefineMode mode) {
    if (length == 0) throw ConfigError("token count per modality must be at least 1");
    const std::size_t entities = stream.sources.size();
    RefinedModality out;
    out.length = length;
    out.padding_id = padding_id;
    out.ids.assign(entities * length, padding_id);
    out.counts.assign(entities * length, 0);
    std::unordered_map<TokenId, std::uint32_t> counts;
    std::vector<std::pair<TokenId, std::uint32_t>> ranked;
    for (std::size_t e = 0; e < entities; ++e) {
        counts.clear();
        for (const auto& source : stream.sources[e])
            for (TokenId id : source) {
                if (mode == RefineMode::frequency && stopwords && stopwords->count(id)) continue;
                ++counts[id];
            }
        TokenId* ids = out.ids.data() + e * length;
        std::uint32_t* freq = out.counts.data() + e * length;
        if (mode == RefineMode::first_arrival) {
            std::size_t k = 0;
            for (const auto& source : stream.sources[e])
                for (TokenId id : source) {
                    if (k == length) break;
                    ids[k] = id;
                    freq[k] = counts[id];
                    ++k;
                }
            continue;
        }
        ranked.assign(counts.begin(), counts.end());
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        for (std::size_t k = 0; k < std::min(length, ranked.size()); ++k) {
            ids[k] = ranked[k].first;
            freq[k] = ranked[k].second;
        }
    }
    return out;
}

RefinedTokenSet refine_tokens(const RawTokenStream& visual, const RawTokenStream& textual,
                              const StopwordSet& stopwords, std::size_t m, std::size_t n,
                              TokenId visual_padding, TokenId textual_padding, RefineMode mode) {
    if (visual.sources.size() != textual.sources.size())
        throw DataError("visual and textual streams cover different entity counts");
    return {refine_modality(visual, nullptr, m, visual_padding, mode),
            refine_modality(textual, &stopwords, n, textual_padding, mode)};
}

std::pair<std::span<const TokenId>, std::span<const TokenId>> sequence_for_entity(
    const RefinedTokenSet& refined, EntityId e) {
    if (e >= refined.entity_count()) throw DataError("entity id out of range for refined token set");
    return {refined.visual.of(e), refined.textual.of(e)};
}

void save_refined_cache(const RefinedTokenSet& refined, const KnowledgeGraph& graph, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (std::size_t e = 0; e < refined.entity_count(); ++e) {
        const auto [vis, txt] = sequence_for_entity(refined, static_cast<EntityId>(e));
        out << graph.entity_name(static_cast<EntityId>(e)) << '\t';
        for (std::size_t i = 0; i < vis.size(); ++i) out << (i ? " " : "") << vis[i];
        out << '\t';
        for (std::size_t i = 0; i < txt.size(); ++i) out << (i ? " " : "") << txt[i];
        out << '\n';
    }
}

RefinedTokenSet load_refined_cache(const fs::path& path, const KnowledgeGraph& graph,
                                   const TokenCatalog& visual, const TokenCatalog& textual) {
    LineReader reader(path);
    std::vector<std::pair<std::vector<TokenId>, std::vector<TokenId>>> rows(graph.entity_count());
    std::vector<bool> seen(graph.entity_count(), false);
    std::size_t m = 0, n = 0;
    std::string line;
    while (reader.next(line)) {
        const auto cols = split(line, '\t');
        if (cols.size() != 3) throw reader.error("expected 3 tab-separated columns");
        EntityId e;
        if (!graph.find_entity(cols[0], e)) throw reader.error("unknown entity '" + cols[0] + "'");
        if (seen[e]) throw reader.error("duplicate entity '" + cols[0] + "'");
        seen[e] = true;
        try {
            rows[e] = {parse_ids(cols[1]), parse_ids(cols[2])};
        } catch (const std::invalid_argument& err) {
            throw reader.error(err.what());
        }
        if (m == 0) {
            m = rows[e].first.size();
            n = rows[e].second.size();
        }
        if (rows[e].first.size() != m || rows[e].second.size() != n || m == 0 || n == 0)
            throw reader.error("inconsistent token counts in refined cache");
        for (TokenId id : rows[e].first)
            if (id > visual.padding_id()) throw reader.error("visual id out of range");
        for (TokenId id : rows[e].second)
            if (id > textual.padding_id()) throw reader.error("textual id out of range");
    }
    if (m == 0) throw DataError(path.string() + ": empty refined cache");
    RefinedTokenSet out;
    for (auto [mod, len, pad] : {std::tuple{&out.visual, m, visual.padding_id()},
                                 std::tuple{&out.textual, n, textual.padding_id()}}) {
        mod->length = len;
        mod->padding_id = pad;
        mod->ids.assign(graph.entity_count() * len, pad);
        mod->counts.assign(graph.entity_count() * len, 0);
    }
    for (std::size_t e = 0; e < rows.size(); ++e) {
        if (!seen[e]) continue;
        std::copy(rows[e].first.begin(), rows[e].first.end(), out.visual.ids.begin() + e * m);
        std::copy(rows[e].second.begin(), rows[e].second.end(), out.textual.ids.begin() + e * n);
    }
    return out;
}

TokenStats token_stats(const RefinedModality& refined, const TokenCatalog& catalog) {
    TokenStats stats;
    const std::size_t entities = refined.entity_count();
    if (entities == 0) return stats;
    std::vector<bool> used(catalog.size, false);
    std::size_t covered = 0;
    for (std::size_t e = 0; e < entities; ++e) {
        bool any = false;
        for (TokenId id : refined.of(static_cast<EntityId>(e)))
            if (id != refined.padding_id) {
                any = true;
                if (id < catalog.size) used[id] = true;
            }
        covered += any;
    }
    stats.coverage = static_cast<double>(covered) / static_cast<double>(entities);
    if (catalog.size > 0)
        stats.catalog_usage = static_cast<double>(std::count(used.begin(), used.end(), true)) /
                              static_cast<double>(catalog.size);
    return stats;
}

}  // namespace mygo
