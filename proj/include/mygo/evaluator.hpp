#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mygo/kg.hpp"
#include "mygo/model.hpp"

namespace mygo {

enum class Direction { tail = 0, head = 1 };

struct QueryResult {
    Triple triple;
    Direction direction = Direction::tail;
    double raw_rank = 0;
    double filtered_rank = 0;
};

/// Tie-averaged rank of `gold`: 1 + #(strictly greater) + #(other ties) / 2.
/// The filtered rank ignores every member of `filter` except the gold itself.
QueryResult rank_query(std::span<const double> scores, EntityId gold, std::span<const EntityId> filter);

struct RankMetrics {
    double mrr = 0;
    double hits1 = 0;
    double hits3 = 0;
    double hits10 = 0;
};

/// Index 0: tail queries, 1: head queries, 2: both directions pooled.
struct MetricsReport {
    std::size_t triples = 0;
    std::array<RankMetrics, 3> raw{};
    std::array<RankMetrics, 3> filtered{};

    const RankMetrics& both_filtered() const { return filtered[2]; }
    const RankMetrics& both_raw() const { return raw[2]; }
};

/// Aggregates per-query ranks; pooled metrics average all 2|T| queries.
MetricsReport aggregate(std::span<const QueryResult> results);

/// Eval-mode encoder output of every entity, in id order (|E| x d).
template <typename Real>
Tensor<Real> entity_embeddings(const Model<Real>& model, const ModelParams<Real>& params);

/// Tucker score of the query (entity, directed relation) against every entity.
template <typename Real>
std::vector<double> score_all_candidates(const Model<Real>& model, const ModelParams<Real>& params,
                                         const Tensor<Real>& embeddings, EntityId entity,
                                         RelationId directed_relation);

struct EvalOptions {
    std::size_t workers = 1;
    std::size_t chunk = 128;  // triples per forward batch
    /// Called once per query in query order with (query id, scores).
    /// Query 2i is the tail query of triple i, 2i + 1 its head query.
    std::function<void(std::size_t, std::span<const double>)> on_scores;
};

template <typename Real>
std::vector<QueryResult> rank_split(const Model<Real>& model, const ModelParams<Real>& params,
                                    const FilterIndex& filter, std::span<const Triple> split,
                                    const EvalOptions& options = {});

template <typename Real>
MetricsReport evaluate(const Model<Real>& model, const ModelParams<Real>& params,
                       const FilterIndex& filter, std::span<const Triple> split,
                       const EvalOptions& options = {});

/// TSV: setting, direction, MRR, Hits@1, Hits@3, Hits@10, queries.
void write_metrics_tsv(const MetricsReport& report, const std::string& label,
                       const std::filesystem::path& path);
std::string format_summary(const MetricsReport& report, const std::string& label);

/// Header `entity` + `e0..e{d-1}`, then one row per entity of its pooled
/// embedding. With `with_tokens`, each entity's full encoder output rows
/// follow as `<name>#<position>` lines.
template <typename Real>
void dump_embeddings(const Model<Real>& model, const ModelParams<Real>& params,
                     const KnowledgeGraph& graph, std::span<const EntityId> entities,
                     const std::filesystem::path& path, bool with_tokens = false);

}  // namespace mygo
