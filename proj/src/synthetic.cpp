#include "mygo/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "mygo/errors.hpp"

namespace mygo {

namespace {

TokenCatalog random_catalog(Modality modality, std::uint32_t size, std::uint32_t dim, Rng& rng) {
    std::vector<float> values(static_cast<std::size_t>(size) * dim);
    for (float& v : values) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return make_catalog(modality, size, dim, std::move(values));
}

RawTokenStream random_stream(std::size_t entities, std::uint32_t vocab, std::size_t max_sources,
                             std::size_t max_tokens, Rng& rng) {
    RawTokenStream stream;
    stream.sources.resize(entities);
    for (auto& sources : stream.sources) {
        const std::size_t count = static_cast<std::size_t>(rng.below(max_sources + 1));
        for (std::size_t s = 0; s < count; ++s) {
            std::vector<TokenId> ids(1 + rng.below(max_tokens));
            for (TokenId& id : ids) id = static_cast<TokenId>(rng.below(vocab));
            sources.push_back(std::move(ids));
        }
    }
    return stream;
}

}  // namespace

SyntheticDataset make_synthetic(const SyntheticSpec& spec) {
    if (spec.entities == 0 || spec.relations == 0) throw ConfigError("synthetic graph needs entities and relations");
    if (spec.visual_size == 0 || spec.textual_size == 0) throw ConfigError("synthetic catalogs must be non-empty");
    const std::size_t wanted = spec.train + spec.valid + spec.test;
    if (wanted > spec.entities * spec.entities * spec.relations)
        throw ConfigError("synthetic graph cannot hold " + std::to_string(wanted) + " distinct triples");
    if (spec.stopwords > spec.textual_size) throw ConfigError("more stop words than textual tokens");

    Rng rng(spec.seed);
    std::vector<std::string> entities, relations;
    for (std::size_t i = 0; i < spec.entities; ++i) entities.push_back("e" + std::to_string(i));
    for (std::size_t i = 0; i < spec.relations; ++i) relations.push_back("r" + std::to_string(i));
    SyntheticDataset out{KnowledgeGraph(std::move(entities), std::move(relations)), {}, {}, {}, {}, {}};

    std::set<Triple> seen;
    auto draw = [&](std::vector<Triple>& split, std::size_t count) {
        while (split.size() < count) {
            Triple t{static_cast<EntityId>(rng.below(spec.entities)),
                     static_cast<RelationId>(rng.below(spec.relations)),
                     static_cast<EntityId>(rng.below(spec.entities))};
            if (seen.insert(t).second) split.push_back(t);
        }
    };
    draw(out.graph.train, spec.train);
    draw(out.graph.valid, spec.valid);
    draw(out.graph.test, spec.test);

    out.visual = random_catalog(Modality::visual, spec.visual_size, spec.visual_dim, rng);
    out.textual = random_catalog(Modality::textual, spec.textual_size, spec.textual_dim, rng);
    out.visual_stream =
        random_stream(spec.entities, spec.visual_size, spec.max_visual_sources, spec.max_tokens_per_source, rng);
    out.textual_stream =
        random_stream(spec.entities, spec.textual_size, spec.max_textual_sources, spec.max_tokens_per_source, rng);
    while (out.stopwords.size() < spec.stopwords)
        out.stopwords.insert(static_cast<TokenId>(rng.below(spec.textual_size)));
    return out;
}

EntityInputs SyntheticDataset::inputs(std::size_t m, std::size_t n, RefineMode mode) const {
    return {visual, textual,
            refine_tokens(visual_stream, textual_stream, stopwords, m, n, visual.padding_id(),
                          textual.padding_id(), mode)};
}

void write_dataset(const SyntheticDataset& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_graph(data.graph, dir);
    save_catalog(data.visual, dir / "visual.cat");
    save_catalog(data.textual, dir / "textual.cat");
    save_token_stream(data.visual_stream, data.graph, dir / "visual_tokens.tsv");
    save_token_stream(data.textual_stream, data.graph, dir / "textual_tokens.tsv");
    std::vector<TokenId> ids(data.stopwords.begin(), data.stopwords.end());
    std::sort(ids.begin(), ids.end());
    std::ofstream out(dir / "stopwords.txt", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "stopwords.txt").string());
    for (TokenId id : ids) out << id << '\n';
}

}  // namespace mygo
