#include "mygo/layers.hpp"

namespace mygo {

template <typename Real>
Var multi_head_attention(Tape<Real>& tape, Var x, const AttentionParams<Real>& params,
                         std::size_t seg_len, const LayerOptions& options, ops::Mode mode, Rng& rng) {
    const Var q = ops::affine(tape, x, tape.param(params.wq), tape.param(params.bq));
    const Var k = ops::affine(tape, x, tape.param(params.wk), tape.param(params.bk));
    const Var v = ops::affine(tape, x, tape.param(params.wv), tape.param(params.bv));
    const Var heads = ops::attention(tape, q, k, v, options.heads, seg_len, options.dropout, mode, rng);
    return ops::affine(tape, heads, tape.param(params.wo), tape.param(params.bo));
}

template <typename Real>
Var transformer_layer(Tape<Real>& tape, Var x, const TransformerLayerParams<Real>& params,
                      std::size_t seg_len, const LayerOptions& options, ops::Mode mode, Rng& rng) {
    Var attn = multi_head_attention(tape, x, params.attn, seg_len, options, mode, rng);
    attn = ops::dropout(tape, attn, options.dropout, mode, rng);
    const Var h1 = ops::layer_norm(tape, ops::add(tape, x, attn), tape.param(params.norm1_gamma),
                                   tape.param(params.norm1_beta), options.norm_eps);
    Var ff = ops::relu(tape, ops::affine(tape, h1, tape.param(params.ff1_w), tape.param(params.ff1_b)));
    ff = ops::affine(tape, ff, tape.param(params.ff2_w), tape.param(params.ff2_b));
    ff = ops::dropout(tape, ff, options.dropout, mode, rng);
    return ops::layer_norm(tape, ops::add(tape, h1, ff), tape.param(params.norm2_gamma),
                           tape.param(params.norm2_beta), options.norm_eps);
}

template Var multi_head_attention<float>(Tape<float>&, Var, const AttentionParams<float>&, std::size_t,
                                         const LayerOptions&, ops::Mode, Rng&);
template Var multi_head_attention<double>(Tape<double>&, Var, const AttentionParams<double>&,
                                          std::size_t, const LayerOptions&, ops::Mode, Rng&);
template Var transformer_layer<float>(Tape<float>&, Var, const TransformerLayerParams<float>&,
                                      std::size_t, const LayerOptions&, ops::Mode, Rng&);
template Var transformer_layer<double>(Tape<double>&, Var, const TransformerLayerParams<double>&,
                                       std::size_t, const LayerOptions&, ops::Mode, Rng&);

}  // namespace mygo
