#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mygo/rng.hpp"
#include "mygo/tape.hpp"

// Differentiable dense ops. Every op validates shapes, rejects non-finite
// results, and records its gradient rule when any input needs gradient.
// Rank-1 tensors are treated as a single row; rank-3 tensors as
// shape[0] x (shape[1] * shape[2]) where a matrix view is needed.
namespace mygo::ops {

enum class Mode { train, eval };

/// One output row of assemble_rows: row `row` of source number `source`.
struct RowRef {
    std::size_t source;
    std::size_t row;
};

template <typename Real> Var matmul(Tape<Real>& tape, Var a, Var b);
/// a * transpose(b); a is s x p, b is q x p.
template <typename Real> Var matmul_nt(Tape<Real>& tape, Var a, Var b);
/// x * w + b with b broadcast over rows.
template <typename Real> Var affine(Tape<Real>& tape, Var x, Var w, Var b);
template <typename Real> Var add(Tape<Real>& tape, Var a, Var b);
/// a + weight * b.
template <typename Real> Var add_scaled(Tape<Real>& tape, Var a, Var b, double weight);
template <typename Real> Var scale(Tape<Real>& tape, Var x, double factor);
template <typename Real> Var relu(Tape<Real>& tape, Var x);
/// Row-wise softmax with max subtraction.
template <typename Real> Var softmax_rows(Tape<Real>& tape, Var x);
/// Row-wise normalization with population variance, then gamma * z + beta.
template <typename Real>
Var layer_norm(Tape<Real>& tape, Var x, Var gamma, Var beta, double eps);

/// Inverted dropout. Identity (same Var) in eval mode or when p == 0.
template <typename Real> Var dropout(Tape<Real>& tape, Var x, double p, Mode mode, Rng& rng);
/// Inverted dropout with an explicit keep mask (nonzero = keep, one per element).
template <typename Real>
Var dropout_with_mask(Tape<Real>& tape, Var x, double p, std::span<const std::uint8_t> keep);

template <typename Real>
Var assemble_rows(Tape<Real>& tape, std::span<const Var> sources, std::span<const RowRef> picks);
template <typename Real>
Var gather_rows(Tape<Real>& tape, Var table, std::span<const std::size_t> rows);
/// x holds consecutive segments of seg_len rows; returns one row per segment,
/// the mean of rows [begin, begin + count) inside it.
template <typename Real>
Var segment_mean(Tape<Real>& tape, Var x, std::size_t seg_len, std::size_t begin,
                 std::size_t count);

/// Scaled dot-product attention over independent segments of seg_len rows.
/// q, k, v are (segments * seg_len) x d; d is split into `heads` slices and
/// head outputs are concatenated. Dropout (rate p) acts on attention weights.
template <typename Real>
Var attention(Tape<Real>& tape, Var q, Var k, Var v, std::size_t heads, std::size_t seg_len,
              double p, Mode mode, Rng& rng);

/// Row-wise mode-1/2 contraction of a d x d x d core:
/// out[i, c] = sum_{a,b} core[a, b, c] * h[i, a] * r[i, b].
template <typename Real> Var tucker_contract(Tape<Real>& tape, Var h, Var r, Var core);

/// Sum over rows of -log softmax(logits[i])[gold[i]].
template <typename Real>
Var cross_entropy(Tape<Real>& tape, Var logits, std::span<const std::size_t> gold);
/// Unit L2 norm per row; throws NumericError on a zero-norm row. Rows with
/// norm below `min_norm` are divided by `min_norm` instead.
template <typename Real> Var normalize_rows(Tape<Real>& tape, Var x, double min_norm = 0.0);
/// Sum of all elements as a 1-element tensor.
template <typename Real> Var sum(Tape<Real>& tape, Var x);

/// Test fixture: corrupts one gradient rule so verification harnesses can be
/// shown to catch it. Never enabled outside tests.
enum class Fault { none, tucker_core_grad };
void inject_fault(Fault fault);
Fault injected_fault();

}  // namespace mygo::ops
