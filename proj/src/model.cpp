#include "mygo/model.hpp"

#include <algorithm>
#include <numeric>

#include "mygo/errors.hpp"

namespace mygo {

const std::vector<std::string>& ablation_names() {
    static const std::vector<std::string> names = {"no_mt",  "no_refine", "no_cmee",
                                                   "no_cte", "no_con",    "no_esec",
                                                   "no_s",   "no_v",      "no_w"};
    return names;
}

Ablation ablation_from_name(const std::string& name) {
    Ablation a;
    if (name == "no_mt") a.no_mt = true;
    else if (name == "no_refine") a.no_refine = true;
    else if (name == "no_cmee") a.no_cmee = true;
    else if (name == "no_cte") a.no_cte = true;
    else if (name == "no_con") a.no_con = true;
    else if (name == "no_esec") a.no_esec = true;
    else if (name == "no_s") a.no_s = true;
    else if (name == "no_v") a.no_v = true;
    else if (name == "no_w") a.no_w = true;
    else if (name != "full" && !name.empty()) throw ConfigError("unknown ablation '" + name + "'");
    return a;
}

void ModelConfig::validate() const {
    if (dim == 0) throw ConfigError("dim must be positive");
    if (heads == 0 || dim % heads != 0)
        throw ConfigError("dim (" + std::to_string(dim) + ") must be divisible by heads (" +
                          std::to_string(heads) + ")");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
    if (ff_multiplier == 0) throw ConfigError("ff_multiplier must be positive");
    if (m == 0 || n == 0) throw ConfigError("m and n must be at least 1");
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    if (!(tau > 0.0)) throw ConfigError("tau must be positive");
    if (!(norm_eps > 0.0)) throw ConfigError("norm_eps must be positive");
}

namespace {

template <typename Real>
TransformerLayerParams<Real> shaped_layer(std::size_t d, std::size_t ff) {
    TransformerLayerParams<Real> p;
    for (auto* w : {&p.attn.wq, &p.attn.wk, &p.attn.wv, &p.attn.wo}) *w = Tensor<Real>({d, d});
    for (auto* b : {&p.attn.bq, &p.attn.bk, &p.attn.bv, &p.attn.bo}) *b = Tensor<Real>({d});
    p.norm1_gamma = Tensor<Real>({d}, Real{1});
    p.norm1_beta = Tensor<Real>({d});
    p.norm2_gamma = Tensor<Real>({d}, Real{1});
    p.norm2_beta = Tensor<Real>({d});
    p.ff1_w = Tensor<Real>({d, ff});
    p.ff1_b = Tensor<Real>({ff});
    p.ff2_w = Tensor<Real>({ff, d});
    p.ff2_b = Tensor<Real>({d});
    return p;
}

std::vector<EntityId> iota_ids(std::size_t n) {
    std::vector<EntityId> ids(n);
    std::iota(ids.begin(), ids.end(), EntityId{0});
    return ids;
}

}  // namespace

template <typename Real>
ModelParams<Real> ModelParams<Real>::shaped(const ModelConfig& config, std::size_t entities,
                                            std::size_t relations, std::size_t visual_dim,
                                            std::size_t textual_dim) {
    const std::size_t d = config.dim;
    ModelParams p;
    p.structural = Tensor<Real>({entities, d});
    p.relations = Tensor<Real>({2 * relations, d});
    p.visual_w = Tensor<Real>({visual_dim, d});
    p.visual_b = Tensor<Real>({d});
    p.textual_w = Tensor<Real>({textual_dim, d});
    p.textual_b = Tensor<Real>({d});
    p.ent_token = Tensor<Real>({1, d});
    p.cxt_token = Tensor<Real>({1, d});
    p.cmee = shaped_layer<Real>(d, d * config.ff_multiplier);
    p.cte = shaped_layer<Real>(d, d * config.ff_multiplier);
    p.core = Tensor<Real>({d, d, d});
    p.visit([](const std::string&, Tensor<Real>& t) { t.set_requires_grad(true); });
    return p;
}

template <typename Real>
bool ModelParams<Real>::operator==(const ModelParams& other) const {
    std::vector<const Tensor<Real>*> mine;
    visit([&](const std::string&, const Tensor<Real>& t) { mine.push_back(&t); });
    bool equal = true;
    std::size_t i = 0;
    other.visit([&](const std::string&, const Tensor<Real>& t) { equal = equal && *mine[i++] == t; });
    return equal;
}

template <typename Real>
double tucker_score(std::span<const Real> head, std::span<const Real> relation,
                    std::span<const Real> tail, const Tensor<Real>& core) {
    const std::size_t d = head.size();
    if (relation.size() != d || tail.size() != d || core.shape() != Shape{d, d, d})
        throw NumericError("tucker_score: shape mismatch");
    double total = 0;
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
            const double hr = static_cast<double>(head[a]) * relation[b];
            for (std::size_t c = 0; c < d; ++c) total += core(a, b, c) * hr * tail[c];
        }
    return total;
}

template <typename Real>
Model<Real>::Model(ModelConfig config, const EntityInputs& inputs, std::size_t entity_count,
                   std::size_t relation_count)
    : config_(std::move(config)),
      inputs_(inputs),
      entity_count_(entity_count),
      relation_count_(relation_count) {
    config_.validate();
    if (inputs_.entity_count() != entity_count)
        throw DataError("token data covers " + std::to_string(inputs_.entity_count()) +
                        " entities, graph has " + std::to_string(entity_count));
    if (inputs_.tokens.m() != config_.m || inputs_.tokens.n() != config_.n)
        throw ConfigError("refined token lengths do not match configured m/n");
    layer_options_ = {config_.heads, config_.dropout, config_.norm_eps};
    if (config_.ablation.no_mt) {
        // Per entity, the mean frozen feature of its retained tokens (zero when none).
        for (auto [out, catalog, refined] :
             {std::tuple{&mean_visual_, &inputs_.visual, &inputs_.tokens.visual},
              std::tuple{&mean_textual_, &inputs_.textual, &inputs_.tokens.textual}}) {
            *out = Tensor<Real>({entity_count, catalog->dim});
            for (std::size_t e = 0; e < entity_count; ++e) {
                std::size_t used = 0;
                std::vector<double> acc(catalog->dim, 0.0);
                for (TokenId id : refined->of(static_cast<EntityId>(e))) {
                    if (id == refined->padding_id) continue;
                    const auto row = catalog->row(id);
                    for (std::size_t j = 0; j < catalog->dim; ++j) acc[j] += row[j];
                    ++used;
                }
                for (std::size_t j = 0; j < catalog->dim; ++j)
                    (*out)(e, j) = used ? static_cast<Real>(acc[j] / static_cast<double>(used)) : Real{0};
            }
        }
    }
}

template <typename Real>
ModelParams<Real> Model<Real>::shaped_params() const {
    return ModelParams<Real>::shaped(config_, entity_count_, relation_count_, inputs_.visual.dim,
                                     inputs_.textual.dim);
}

namespace {

template <typename Real>
Tensor<Real> gather_features(const TokenCatalog& catalog, std::span<const TokenId> ids) {
    Tensor<Real> out({ids.size(), catalog.dim});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] > catalog.padding_id())
            throw DataError(std::string(modality_name(catalog.modality)) + " token id " +
                            std::to_string(ids[i]) + " out of range");
        const auto row = catalog.row(ids[i]);
        for (std::size_t j = 0; j < catalog.dim; ++j) out(i, j) = static_cast<Real>(row[j]);
    }
    return out;
}

}  // namespace

template <typename Real>
typename Model<Real>::Projected Model<Real>::project_tokens(Tape<Real>& tape,
                                                            const ModelParams<Real>& params,
                                                            std::span<const TokenId> visual_ids,
                                                            std::span<const TokenId> textual_ids) const {
    const Var vis = tape.constant(gather_features<Real>(inputs_.visual, visual_ids));
    const Var txt = tape.constant(gather_features<Real>(inputs_.textual, textual_ids));
    return {ops::affine(tape, vis, tape.param(params.visual_w), tape.param(params.visual_b)),
            ops::affine(tape, txt, tape.param(params.textual_w), tape.param(params.textual_b))};
}

template <typename Real>
typename Model<Real>::Encoded Model<Real>::encode_entities(Tape<Real>& tape,
                                                           const ModelParams<Real>& params,
                                                           std::span<const EntityId> entities,
                                                           ops::Mode mode, Rng& rng) const {
    const std::size_t count = entities.size();
    const std::size_t vs = visual_slots(), ts = textual_slots(), L = sequence_length();
    Var vis, txt;
    if (config_.ablation.no_mt) {
        const Var vis_feat = tape.constant([&] {
            Tensor<Real> t({count, mean_visual_.cols()});
            for (std::size_t i = 0; i < count; ++i)
                std::copy_n(mean_visual_.row(entities[i]).begin(), t.cols(), t.row(i).begin());
            return t;
        }());
        const Var txt_feat = tape.constant([&] {
            Tensor<Real> t({count, mean_textual_.cols()});
            for (std::size_t i = 0; i < count; ++i)
                std::copy_n(mean_textual_.row(entities[i]).begin(), t.cols(), t.row(i).begin());
            return t;
        }());
        vis = ops::affine(tape, vis_feat, tape.param(params.visual_w), tape.param(params.visual_b));
        txt = ops::affine(tape, txt_feat, tape.param(params.textual_w), tape.param(params.textual_b));
    } else {
        std::vector<TokenId> vis_ids, txt_ids;
        vis_ids.reserve(count * vs);
        txt_ids.reserve(count * ts);
        for (EntityId e : entities) {
            if (e >= entity_count_) throw DataError("entity id out of range");
            const auto [v, w] = sequence_for_entity(inputs_.tokens, e);
            vis_ids.insert(vis_ids.end(), v.begin(), v.end());
            txt_ids.insert(txt_ids.end(), w.begin(), w.end());
        }
        const Projected projected = project_tokens(tape, params, vis_ids, txt_ids);
        vis = projected.visual;
        txt = projected.textual;
    }

    const Var sources[] = {tape.param(params.ent_token), tape.param(params.structural), vis, txt};
    std::vector<ops::RowRef> picks;
    picks.reserve(count * L);
    for (std::size_t i = 0; i < count; ++i) {
        picks.push_back({0, 0});
        picks.push_back({1, entities[i]});
        for (std::size_t k = 0; k < vs; ++k) picks.push_back({2, i * vs + k});
        for (std::size_t k = 0; k < ts; ++k) picks.push_back({3, i * ts + k});
    }
    const Var input = ops::assemble_rows(tape, std::span<const Var>(sources),
                                         std::span<const ops::RowRef>(picks));
    if (config_.ablation.no_cmee) return {ops::segment_mean(tape, input, L, 0, L), input};

    const Var output = transformer_layer(tape, input, params.cmee, L, layer_options_, mode, rng);
    std::vector<std::size_t> pooled(count);
    for (std::size_t i = 0; i < count; ++i) pooled[i] = i * L;
    return {ops::gather_rows(tape, output, pooled), output};
}

template <typename Real>
typename Model<Real>::Context Model<Real>::encode_context(Tape<Real>& tape,
                                                          const ModelParams<Real>& params, Var known,
                                                          std::span<const RelationId> relations,
                                                          ops::Mode mode, Rng& rng) const {
    const std::size_t queries = relations.size();
    if (tape.value(known).rows() != queries)
        throw NumericError("encode_context: one known-entity row per relation required");
    std::vector<std::size_t> rel_rows(relations.begin(), relations.end());
    for (std::size_t r : rel_rows)
        if (r >= 2 * relation_count_) throw DataError("relation id out of range");
    const Var rel = ops::gather_rows(tape, tape.param(params.relations), rel_rows);
    if (config_.ablation.no_cte) return {known, rel};

    const Var sources[] = {tape.param(params.cxt_token), known, rel};
    std::vector<ops::RowRef> picks;
    picks.reserve(queries * 3);
    for (std::size_t q = 0; q < queries; ++q) {
        picks.push_back({0, 0});
        picks.push_back({1, q});
        picks.push_back({2, q});
    }
    const Var input = ops::assemble_rows(tape, std::span<const Var>(sources),
                                         std::span<const ops::RowRef>(picks));
    const Var output = transformer_layer(tape, input, params.cte, 3, layer_options_, mode, rng);
    std::vector<std::size_t> head_rows(queries), rel_out_rows(queries);
    for (std::size_t q = 0; q < queries; ++q) {
        head_rows[q] = 3 * q;
        rel_out_rows[q] = 3 * q + 2;
    }
    const Var head = ops::gather_rows(tape, output, head_rows);
    const Var relation = config_.relation_from_cte ? ops::gather_rows(tape, output, rel_out_rows) : rel;
    return {head, relation};
}

template <typename Real>
Var Model<Real>::score_candidates(Tape<Real>& tape, const ModelParams<Real>& params,
                                  const Context& context, Var candidates) const {
    const Var mixed = ops::tucker_contract(tape, context.head, context.relation, tape.param(params.core));
    return ops::matmul_nt(tape, mixed, candidates);
}

template <typename Real>
Var Model<Real>::kgc_loss(Tape<Real>& tape, const ModelParams<Real>& params,
                          std::span<const Triple> batch, Var all_embeddings, ops::Mode mode,
                          Rng& rng) const {
    if (batch.empty()) throw NumericError("kgc_loss: empty batch");
    const std::size_t b = batch.size();
    const auto R = static_cast<RelationId>(relation_count_);
    // Rows [0, b): tail queries (h, r, ?). Rows [b, 2b): head queries via (t, r^-1, ?).
    std::vector<std::size_t> known(2 * b), gold(2 * b);
    std::vector<RelationId> rels(2 * b);
    for (std::size_t i = 0; i < b; ++i) {
        known[i] = batch[i].head;
        rels[i] = batch[i].relation;
        gold[i] = batch[i].tail;
        known[b + i] = batch[i].tail;
        rels[b + i] = batch[i].relation + R;
        gold[b + i] = batch[i].head;
    }
    const Var known_rows = ops::gather_rows(tape, all_embeddings, known);
    const Context context = encode_context(tape, params, known_rows, rels, mode, rng);
    const Var scores = score_candidates(tape, params, context, all_embeddings);
    return ops::scale(tape, ops::cross_entropy(tape, scores, gold), 1.0 / static_cast<double>(b));
}

template <typename Real>
typename Model<Real>::Views Model<Real>::fgcl_views(Tape<Real>& tape, const ModelParams<Real>& params,
                                                    const Encoded& pass1,
                                                    std::span<const EntityId> batch, ops::Mode mode,
                                                    Rng& rng) const {
    const std::size_t L = sequence_length(), vs = visual_slots(), ts = textual_slots();
    const auto& ab = config_.ablation;
    std::vector<std::size_t> rows(batch.begin(), batch.end());
    Views views;
    views.anchor = ops::gather_rows(tape, pass1.embeddings, rows);
    if (!ab.no_esec) {
        views.kinds.push_back(View::e_sec);
        views.rows.push_back(encode_entities(tape, params, batch, mode, rng).embeddings);
    }
    if (ab.no_s && ab.no_v && ab.no_w) return views;
    std::vector<std::size_t> seq_rows;
    seq_rows.reserve(batch.size() * L);
    for (EntityId e : batch)
        for (std::size_t k = 0; k < L; ++k) seq_rows.push_back(e * L + k);
    const Var seq = ops::gather_rows(tape, pass1.sequence, seq_rows);
    if (!ab.no_s) {
        views.kinds.push_back(View::s);
        views.rows.push_back(ops::segment_mean(tape, seq, L, 0, L));
    }
    if (!ab.no_v) {
        views.kinds.push_back(View::v);
        views.rows.push_back(ops::segment_mean(tape, seq, L, 2, vs));
    }
    if (!ab.no_w) {
        views.kinds.push_back(View::w);
        views.rows.push_back(ops::segment_mean(tape, seq, L, 2 + vs, ts));
    }
    return views;
}

template <typename Real>
Var contrastive_loss(Tape<Real>& tape, Var anchor, std::span<const Var> views, double tau, double min_norm) {
    if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
    if (views.empty()) throw NumericError("contrastive_loss: no views");
    const std::size_t b = tape.value(anchor).rows();
    std::vector<std::size_t> gold(b);
    std::iota(gold.begin(), gold.end(), std::size_t{0});
    const Var a = ops::normalize_rows(tape, anchor, min_norm);
    std::optional<Var> total;
    for (Var view : views) {
        const Var logits = ops::scale(tape, ops::matmul_nt(tape, a, ops::normalize_rows(tape, view, min_norm)), 1.0 / tau);
        const Var term = ops::cross_entropy(tape, logits, gold);
        total = total ? ops::add(tape, *total, term) : term;
    }
    return *total;
}

std::vector<EntityId> batch_entities(std::span<const Triple> batch) {
    std::vector<EntityId> ids;
    ids.reserve(2 * batch.size());
    for (const Triple& t : batch) {
        ids.push_back(t.head);
        ids.push_back(t.tail);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

template <typename Real>
typename Model<Real>::LossTerms Model<Real>::total_loss(Tape<Real>& tape, const ModelParams<Real>& params,
                                                        std::span<const Triple> batch, ops::Mode mode,
                                                        Rng& rng) const {
    const std::vector<EntityId> all = iota_ids(entity_count_);
    const Encoded pass1 = encode_entities(tape, params, all, mode, rng);
    LossTerms terms;
    terms.kgc = kgc_loss(tape, params, batch, pass1.embeddings, mode, rng);
    terms.total = terms.kgc;
    if (config_.lambda == 0.0 || config_.ablation.no_con) return terms;
    const std::vector<EntityId> members = batch_entities(batch);
    const Views views = fgcl_views(tape, params, pass1, members, mode, rng);
    if (views.rows.empty()) return terms;
    // Without the encoder a modality made only of padding projects to the bias,
    // which is exactly zero at init.
    const double min_norm = config_.ablation.no_cmee ? 1e-12 : 0.0;
    terms.con = contrastive_loss(tape, views.anchor, std::span<const Var>(views.rows), config_.tau, min_norm);
    terms.total = ops::add_scaled(tape, terms.kgc, *terms.con, config_.lambda);
    return terms;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template class Model<float>;
template class Model<double>;
template double tucker_score<float>(std::span<const float>, std::span<const float>,
                                    std::span<const float>, const Tensor<float>&);
template double tucker_score<double>(std::span<const double>, std::span<const double>,
                                     std::span<const double>, const Tensor<double>&);
template Var contrastive_loss<float>(Tape<float>&, Var, std::span<const Var>, double, double);
template Var contrastive_loss<double>(Tape<double>&, Var, std::span<const Var>, double, double);

}  // namespace mygo
