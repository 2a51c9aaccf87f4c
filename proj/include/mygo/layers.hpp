#pragma once

#include <string>

#include "mygo/ops.hpp"

namespace mygo {

template <typename Real>
struct AttentionParams {
    Tensor<Real> wq, bq, wk, bk, wv, bv, wo, bo;

    template <typename F> void visit(const std::string& prefix, F&& f) { visit_impl(*this, prefix, f); }
    template <typename F> void visit(const std::string& prefix, F&& f) const { visit_impl(*this, prefix, f); }

private:
    template <typename Self, typename F>
    static void visit_impl(Self& p, const std::string& prefix, F& f) {
        f(prefix + "q.w", p.wq); f(prefix + "q.b", p.bq);
        f(prefix + "k.w", p.wk); f(prefix + "k.b", p.bk);
        f(prefix + "v.w", p.wv); f(prefix + "v.b", p.bv);
        f(prefix + "o.w", p.wo); f(prefix + "o.b", p.bo);
    }
};

/// Post-norm encoder layer: attention, add, norm, feed-forward (ReLU), add, norm.
template <typename Real>
struct TransformerLayerParams {
    AttentionParams<Real> attn;
    Tensor<Real> norm1_gamma, norm1_beta;
    Tensor<Real> ff1_w, ff1_b, ff2_w, ff2_b;
    Tensor<Real> norm2_gamma, norm2_beta;

    template <typename F> void visit(const std::string& prefix, F&& f) { visit_impl(*this, prefix, f); }
    template <typename F> void visit(const std::string& prefix, F&& f) const { visit_impl(*this, prefix, f); }

private:
    template <typename Self, typename F>
    static void visit_impl(Self& p, const std::string& prefix, F& f) {
        p.attn.visit(prefix + "attn.", f);
        f(prefix + "norm1.gamma", p.norm1_gamma); f(prefix + "norm1.beta", p.norm1_beta);
        f(prefix + "ff1.w", p.ff1_w); f(prefix + "ff1.b", p.ff1_b);
        f(prefix + "ff2.w", p.ff2_w); f(prefix + "ff2.b", p.ff2_b);
        f(prefix + "norm2.gamma", p.norm2_gamma); f(prefix + "norm2.beta", p.norm2_beta);
    }
};

struct LayerOptions {
    std::size_t heads = 4;
    double dropout = 0.0;
    double norm_eps = 1e-5;
};

/// Q/K/V projections, per-segment attention, output projection. No positional
/// encodings: permuting rows inside a segment permutes the output rows.
template <typename Real>
Var multi_head_attention(Tape<Real>& tape, Var x, const AttentionParams<Real>& params,
                         std::size_t seg_len, const LayerOptions& options, ops::Mode mode, Rng& rng);

template <typename Real>
Var transformer_layer(Tape<Real>& tape, Var x, const TransformerLayerParams<Real>& params,
                      std::size_t seg_len, const LayerOptions& options, ops::Mode mode, Rng& rng);

}  // namespace mygo
