#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mygo/kg.hpp"
#include "mygo/layers.hpp"
#include "mygo/tokens.hpp"

namespace mygo {

/// Component switches for ablation runs. All false is the full model.
struct Ablation {
    bool no_mt = false;      // one mean-feature row per modality instead of tokens
    bool no_refine = false;  // first-arrival tokens, no ranking or stop-word removal
    bool no_cmee = false;    // entity embedding = mean of input rows
    bool no_cte = false;     // query side uses the raw entity/relation embeddings
    bool no_con = false;     // contrastive term disabled
    bool no_esec = false;    // views removed from the contrastive candidate set
    bool no_s = false;
    bool no_v = false;
    bool no_w = false;

    bool operator==(const Ablation&) const = default;
};

const std::vector<std::string>& ablation_names();
/// Throws ConfigError for unknown names.
Ablation ablation_from_name(const std::string& name);

struct ModelConfig {
    std::size_t dim = 256;
    std::size_t heads = 4;
    double dropout = 0.3;
    std::size_t ff_multiplier = 4;
    std::size_t m = 8;
    std::size_t n = 8;
    double norm_eps = 1e-5;
    /// Use the context-encoder output at the relation slot as r~ (else the raw embedding).
    bool relation_from_cte = true;
    double lambda = 0.01;
    double tau = 0.5;
    Ablation ablation;

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
};

/// Every learnable tensor. Token catalog features are frozen and live elsewhere.
template <typename Real>
struct ModelParams {
    using value_type = Real;

    Tensor<Real> structural;      // |E| x d
    Tensor<Real> relations;       // 2|R| x d: forward rows, then reciprocal rows
    Tensor<Real> visual_w;        // dim_v x d
    Tensor<Real> visual_b;        // d
    Tensor<Real> textual_w;       // dim_t x d
    Tensor<Real> textual_b;       // d
    Tensor<Real> ent_token;       // 1 x d
    Tensor<Real> cxt_token;       // 1 x d
    TransformerLayerParams<Real> cmee;
    TransformerLayerParams<Real> cte;
    Tensor<Real> core;            // d x d x d

    /// Zero tensors of the right shapes, all marked as requiring gradient.
    static ModelParams shaped(const ModelConfig& config, std::size_t entities, std::size_t relations,
                              std::size_t visual_dim, std::size_t textual_dim);

    template <typename F> void visit(F&& f) { visit_impl(*this, f); }
    template <typename F> void visit(F&& f) const { visit_impl(*this, f); }

    template <typename Other>
    ModelParams<Other> cast() const;

    void zero_grad() {
        visit([](const std::string&, Tensor<Real>& t) { t.zero_grad(); });
    }

    bool operator==(const ModelParams& other) const;

private:
    template <typename Self, typename F>
    static void visit_impl(Self& p, F& f) {
        f("structural", p.structural);
        f("relations", p.relations);
        f("visual.w", p.visual_w);
        f("visual.b", p.visual_b);
        f("textual.w", p.textual_w);
        f("textual.b", p.textual_b);
        f("token.ent", p.ent_token);
        f("token.cxt", p.cxt_token);
        p.cmee.visit("cmee.", f);
        p.cte.visit("cte.", f);
        f("tucker.core", p.core);
    }
};

/// Frozen per-entity modality data consumed by the model.
struct EntityInputs {
    TokenCatalog visual;
    TokenCatalog textual;
    RefinedTokenSet tokens;

    std::size_t entity_count() const { return tokens.entity_count(); }
};

/// Contraction of a d x d x d core with three d-vectors.
template <typename Real>
double tucker_score(std::span<const Real> head, std::span<const Real> relation,
                    std::span<const Real> tail, const Tensor<Real>& core);

/// The network: token projection, cross-modal entity encoder, contextual
/// triple encoder, Tucker decoder, and both training objectives. The model is
/// stateless apart from configuration; parameters are passed per call so one
/// Model can drive float training and double-precision verification.
template <typename Real>
class Model {
public:
    Model(ModelConfig config, const EntityInputs& inputs, std::size_t entity_count,
          std::size_t relation_count);

    const ModelConfig& config() const { return config_; }
    std::size_t entity_count() const { return entity_count_; }
    std::size_t relation_count() const { return relation_count_; }
    /// Rows per entity sequence: [ENT], s_e, visual slots, textual slots.
    std::size_t sequence_length() const { return 2 + visual_slots() + textual_slots(); }
    std::size_t visual_slots() const { return config_.ablation.no_mt ? 1 : config_.m; }
    std::size_t textual_slots() const { return config_.ablation.no_mt ? 1 : config_.n; }

    ModelParams<Real> shaped_params() const;

    struct Projected {
        Var visual;   // rows: one per visual id
        Var textual;  // rows: one per textual id
    };
    /// Frozen features mapped into the model space: feature * W + b.
    Projected project_tokens(Tape<Real>& tape, const ModelParams<Real>& params,
                             std::span<const TokenId> visual_ids,
                             std::span<const TokenId> textual_ids) const;

    struct Encoded {
        Var embeddings;  // N x d, pooled at [ENT]
        Var sequence;    // (N * sequence_length()) x d, full encoder output
    };
    Encoded encode_entities(Tape<Real>& tape, const ModelParams<Real>& params,
                            std::span<const EntityId> entities, ops::Mode mode, Rng& rng) const;

    struct Context {
        Var head;      // h~ per query
        Var relation;  // r~ per query
    };
    /// `known` holds one entity embedding row per query; `relations` index the
    /// doubled table (r for tail queries, r + |R| for head queries).
    Context encode_context(Tape<Real>& tape, const ModelParams<Real>& params, Var known,
                           std::span<const RelationId> relations, ops::Mode mode, Rng& rng) const;

    /// Tucker scores of every query against every candidate row: Q x N.
    Var score_candidates(Tape<Real>& tape, const ModelParams<Real>& params, const Context& context,
                         Var candidates) const;

    /// Head plus tail cross-entropy over all entities, summed over the batch and
    /// divided by its size. `all_embeddings` are the encoder outputs of every entity.
    Var kgc_loss(Tape<Real>& tape, const ModelParams<Real>& params, std::span<const Triple> batch,
                 Var all_embeddings, ops::Mode mode, Rng& rng) const;

    enum class View { e_sec, s, v, w };
    struct Views {
        Var anchor;                 // B x d
        std::vector<View> kinds;
        std::vector<Var> rows;      // one B x d matrix per kind
    };
    /// Contrastive views of `batch` entities. `pass1` must be the encoding of
    /// every entity in id order; e_sec comes from a fresh second pass.
    Views fgcl_views(Tape<Real>& tape, const ModelParams<Real>& params, const Encoded& pass1,
                     std::span<const EntityId> batch, ops::Mode mode, Rng& rng) const;

    struct LossTerms {
        Var kgc;
        std::optional<Var> con;
        Var total;
    };
    /// kgc + lambda * con. The contrastive pass is skipped entirely when
    /// lambda is 0, no_con is set, or every view is ablated.
    LossTerms total_loss(Tape<Real>& tape, const ModelParams<Real>& params,
                         std::span<const Triple> batch, ops::Mode mode, Rng& rng) const;

private:
    ModelConfig config_;
    const EntityInputs& inputs_;
    std::size_t entity_count_;
    std::size_t relation_count_;
    LayerOptions layer_options_;
    Tensor<Real> mean_visual_;   // |E| x dim_v, only for no_mt
    Tensor<Real> mean_textual_;  // |E| x dim_t
};

/// InfoNCE over same-type views: for each view matrix V,
/// sum_i -log softmax_j(cos(anchor_i, V_j) / tau)[i], summed over views.
/// `min_norm` as in ops::normalize_rows.
template <typename Real>
Var contrastive_loss(Tape<Real>& tape, Var anchor, std::span<const Var> views, double tau, double min_norm = 0.0);

/// Sorted unique heads and tails of a batch.
std::vector<EntityId> batch_entities(std::span<const Triple> batch);

template <typename Real>
template <typename Other>
ModelParams<Other> ModelParams<Real>::cast() const {
    std::vector<const Tensor<Real>*> sources;
    visit([&](const std::string&, const Tensor<Real>& t) { sources.push_back(&t); });
    ModelParams<Other> out;
    std::size_t i = 0;
    out.visit([&](const std::string&, Tensor<Other>& t) { t = sources[i++]->template cast<Other>(); });
    return out;
}

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;
extern template class Model<float>;
extern template class Model<double>;

}  // namespace mygo
