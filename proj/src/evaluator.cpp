#include "mygo/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "mygo/errors.hpp"

namespace mygo {

QueryResult rank_query(std::span<const double> scores, EntityId gold, std::span<const EntityId> filter) {
    if (gold >= scores.size()) throw NumericError("rank_query: gold entity out of range");
    std::vector<EntityId> sorted;
    if (!std::is_sorted(filter.begin(), filter.end())) {
        sorted.assign(filter.begin(), filter.end());
        std::sort(sorted.begin(), sorted.end());
        filter = sorted;
    }
    const double target = scores[gold];
    double raw_greater = 0, raw_ties = 0, flt_greater = 0, flt_ties = 0;
    for (std::size_t c = 0; c < scores.size(); ++c) {
        if (c == gold) continue;
        const bool filtered = std::binary_search(filter.begin(), filter.end(), static_cast<EntityId>(c));
        if (scores[c] > target) {
            raw_greater += 1;
            if (!filtered) flt_greater += 1;
        } else if (scores[c] == target) {
            raw_ties += 1;
            if (!filtered) flt_ties += 1;
        }
    }
    QueryResult r;
    r.raw_rank = 1 + raw_greater + raw_ties / 2;
    r.filtered_rank = 1 + flt_greater + flt_ties / 2;
    return r;
}

MetricsReport aggregate(std::span<const QueryResult> results) {
    MetricsReport report;
    std::array<std::size_t, 3> counts{};
    for (const QueryResult& q : results) {
        const std::size_t dir = static_cast<std::size_t>(q.direction);
        for (std::size_t slot : {dir, std::size_t{2}}) {
            ++counts[slot];
            for (auto [metrics, rank] : {std::pair{&report.raw[slot], q.raw_rank},
                                         std::pair{&report.filtered[slot], q.filtered_rank}}) {
                metrics->mrr += 1.0 / rank;
                metrics->hits1 += rank <= 1 ? 1 : 0;
                metrics->hits3 += rank <= 3 ? 1 : 0;
                metrics->hits10 += rank <= 10 ? 1 : 0;
            }
        }
    }
    for (std::size_t slot = 0; slot < 3; ++slot) {
        if (counts[slot] == 0) continue;
        for (RankMetrics* m : {&report.raw[slot], &report.filtered[slot]}) {
            const double inv = 1.0 / static_cast<double>(counts[slot]);
            m->mrr *= inv;
            m->hits1 *= inv;
            m->hits3 *= inv;
            m->hits10 *= inv;
        }
    }
    report.triples = counts[0];
    return report;
}

template <typename Real>
Tensor<Real> entity_embeddings(const Model<Real>& model, const ModelParams<Real>& params) {
    Tape<Real> tape(false);
    Rng unused;
    std::vector<EntityId> all(model.entity_count());
    std::iota(all.begin(), all.end(), EntityId{0});
    const auto encoded = model.encode_entities(tape, params, all, ops::Mode::eval, unused);
    return tape.value(encoded.embeddings);
}

template <typename Real>
std::vector<double> score_all_candidates(const Model<Real>& model, const ModelParams<Real>& params,
                                         const Tensor<Real>& embeddings, EntityId entity,
                                         RelationId directed_relation) {
    Tape<Real> tape(false);
    Rng unused;
    const Var all = tape.constant(embeddings);
    const std::size_t row[] = {entity};
    const RelationId rel[] = {directed_relation};
    const Var known = ops::gather_rows(tape, all, std::span<const std::size_t>(row));
    const auto context = model.encode_context(tape, params, known, rel, ops::Mode::eval, unused);
    const auto& scores = tape.value(model.score_candidates(tape, params, context, all));
    return {scores.data().begin(), scores.data().end()};
}

namespace {

struct ChunkResult {
    std::vector<QueryResult> results;
    std::vector<std::vector<double>> scores;
};

template <typename Real>
ChunkResult rank_chunk(const Model<Real>& model, const ModelParams<Real>& params,
                       const Tensor<Real>& embeddings, const FilterIndex& filter,
                       std::span<const Triple> triples, bool keep_scores) {
    Tape<Real> tape(false);
    Rng unused;
    const std::size_t b = triples.size();
    const auto R = static_cast<RelationId>(model.relation_count());
    std::vector<std::size_t> known(2 * b);
    std::vector<RelationId> rels(2 * b);
    // Query 2i: (h, r, ?), query 2i + 1: (t, r^-1, ?).
    for (std::size_t i = 0; i < b; ++i) {
        known[2 * i] = triples[i].head;
        rels[2 * i] = triples[i].relation;
        known[2 * i + 1] = triples[i].tail;
        rels[2 * i + 1] = triples[i].relation + R;
    }
    const Var all = tape.constant(embeddings);
    const Var known_rows = ops::gather_rows(tape, all, known);
    const auto context = model.encode_context(tape, params, known_rows, rels, ops::Mode::eval, unused);
    const auto& scores = tape.value(model.score_candidates(tape, params, context, all));
    const std::size_t n = scores.cols();
    ChunkResult out;
    std::vector<double> row(n);
    for (std::size_t q = 0; q < 2 * b; ++q) {
        const Triple& t = triples[q / 2];
        const bool tail_query = q % 2 == 0;
        for (std::size_t c = 0; c < n; ++c) row[c] = scores(q, c);
        QueryResult r = tail_query ? rank_query(row, t.tail, filter.tails(t.head, t.relation))
                                   : rank_query(row, t.head, filter.heads(t.tail, t.relation));
        r.triple = t;
        r.direction = tail_query ? Direction::tail : Direction::head;
        out.results.push_back(r);
        if (keep_scores) out.scores.push_back(row);
    }
    return out;
}

}  // namespace

template <typename Real>
std::vector<QueryResult> rank_split(const Model<Real>& model, const ModelParams<Real>& params,
                                    const FilterIndex& filter, std::span<const Triple> split,
                                    const EvalOptions& options) {
    if (split.empty()) throw DataError("cannot evaluate an empty split");
    const Tensor<Real> embeddings = entity_embeddings(model, params);
    const std::size_t chunk = std::max<std::size_t>(1, options.chunk);
    const std::size_t chunks = (split.size() + chunk - 1) / chunk;
    std::vector<ChunkResult> parts(chunks);
    const bool keep = static_cast<bool>(options.on_scores);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t c = next++; c < chunks; c = next++) {
            const std::size_t begin = c * chunk;
            const std::size_t len = std::min(chunk, split.size() - begin);
            parts[c] = rank_chunk(model, params, embeddings, filter, split.subspan(begin, len), keep);
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, chunks);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    std::vector<QueryResult> results;
    results.reserve(2 * split.size());
    std::size_t query = 0;
    for (ChunkResult& part : parts) {
        for (std::size_t i = 0; i < part.results.size(); ++i, ++query) {
            results.push_back(part.results[i]);
            if (keep) options.on_scores(query, part.scores[i]);
        }
    }
    return results;
}

template <typename Real>
MetricsReport evaluate(const Model<Real>& model, const ModelParams<Real>& params,
                       const FilterIndex& filter, std::span<const Triple> split,
                       const EvalOptions& options) {
    const auto results = rank_split(model, params, filter, split, options);
    return aggregate(results);
}

void write_metrics_tsv(const MetricsReport& report, const std::string& label,
                       const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "label\tsetting\tdirection\tMRR\tHits@1\tHits@3\tHits@10\tqueries\n";
    const char* directions[] = {"tail", "head", "both"};
    char buf[256];
    for (int setting = 0; setting < 2; ++setting)
        for (std::size_t slot = 0; slot < 3; ++slot) {
            const RankMetrics& m = setting == 0 ? report.raw[slot] : report.filtered[slot];
            const std::size_t queries = slot == 2 ? 2 * report.triples : report.triples;
            std::snprintf(buf, sizeof buf, "%s\t%s\t%s\t%.6f\t%.6f\t%.6f\t%.6f\t%zu\n", label.c_str(),
                          setting == 0 ? "raw" : "filtered", directions[slot], m.mrr, m.hits1, m.hits3,
                          m.hits10, queries);
            out << buf;
        }
}

std::string format_summary(const MetricsReport& report, const std::string& label) {
    std::ostringstream out;
    char buf[256];
    out << "== " << label << " (" << report.triples << " triples, " << 2 * report.triples
        << " queries) ==\n";
    out << "setting    direction      MRR   Hits@1   Hits@3  Hits@10\n";
    const char* directions[] = {"tail", "head", "both"};
    for (int setting = 0; setting < 2; ++setting)
        for (std::size_t slot = 0; slot < 3; ++slot) {
            const RankMetrics& m = setting == 0 ? report.raw[slot] : report.filtered[slot];
            std::snprintf(buf, sizeof buf, "%-10s %-9s %8.4f %8.4f %8.4f %8.4f\n",
                          setting == 0 ? "raw" : "filtered", directions[slot], m.mrr, m.hits1, m.hits3,
                          m.hits10);
            out << buf;
        }
    return out.str();
}

template <typename Real>
void dump_embeddings(const Model<Real>& model, const ModelParams<Real>& params,
                     const KnowledgeGraph& graph, std::span<const EntityId> entities,
                     const std::filesystem::path& path, bool with_tokens) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    const std::size_t d = model.config().dim;
    out << "entity";
    for (std::size_t j = 0; j < d; ++j) out << "\te" << j;
    out << '\n';
    if (entities.empty()) return;
    Tape<Real> tape(false);
    Rng unused;
    const auto encoded = model.encode_entities(tape, params, entities, ops::Mode::eval, unused);
    const auto& emb = tape.value(encoded.embeddings);
    const auto& seq = tape.value(encoded.sequence);
    const std::size_t L = model.sequence_length();
    char buf[64];
    auto write_row = [&](const std::string& name, std::span<const Real> row) {
        out << name;
        for (Real v : row) {
            std::snprintf(buf, sizeof buf, "\t%.9g", static_cast<double>(v));
            out << buf;
        }
        out << '\n';
    };
    for (std::size_t i = 0; i < entities.size(); ++i) {
        const std::string& name = graph.entity_name(entities[i]);
        write_row(name, emb.row(i));
        if (with_tokens)
            for (std::size_t k = 0; k < L; ++k) write_row(name + "#" + std::to_string(k), seq.row(i * L + k));
    }
}

#define MYGO_INSTANTIATE_EVAL(Real)                                                                  \
    template Tensor<Real> entity_embeddings<Real>(const Model<Real>&, const ModelParams<Real>&);      \
    template std::vector<double> score_all_candidates<Real>(const Model<Real>&,                       \
                                                            const ModelParams<Real>&,                 \
                                                            const Tensor<Real>&, EntityId, RelationId); \
    template std::vector<QueryResult> rank_split<Real>(const Model<Real>&, const ModelParams<Real>&,  \
                                                       const FilterIndex&, std::span<const Triple>,   \
                                                       const EvalOptions&);                           \
    template MetricsReport evaluate<Real>(const Model<Real>&, const ModelParams<Real>&,               \
                                          const FilterIndex&, std::span<const Triple>,                \
                                          const EvalOptions&);                                        \
    template void dump_embeddings<Real>(const Model<Real>&, const ModelParams<Real>&,                 \
                                        const KnowledgeGraph&, std::span<const EntityId>,             \
                                        const std::filesystem::path&, bool);

MYGO_INSTANTIATE_EVAL(float)
MYGO_INSTANTIATE_EVAL(double)

}  // namespace mygo
