#include "mygo/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "mygo/errors.hpp"

namespace mygo::ops {

namespace {

std::atomic<Fault> g_fault{Fault::none};

struct Extent {
    std::size_t rows;
    std::size_t cols;
};

template <typename Real>
Extent extent(const Tensor<Real>& t) {
    if (t.rank() == 1) return {1, t.size()};
    return {t.rows(), t.cols()};
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
    throw NumericError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                       shape_string(b));
}

template <typename Real>
Var finish(Tape<Real>& tape, Tensor<Real> out, const char* op, bool needs_grad,
           typename Tape<Real>::Backward backward) {
    out.check_finite(op);
    return tape.push(std::move(out), needs_grad, std::move(backward));
}

template <typename Real>
bool any_grad(const Tape<Real>& tape, std::initializer_list<Var> vars) {
    for (Var v : vars)
        if (tape.needs_grad(v)) return true;
    return false;
}

}  // namespace

void inject_fault(Fault fault) { g_fault = fault; }
Fault injected_fault() { return g_fault; }

template <typename Real>
Var matmul(Tape<Real>& tape, Var a, Var b) {
    const auto& A = tape.value(a);
    const auto& B = tape.value(b);
    const auto [s, p] = extent(A);
    const auto [p2, q] = extent(B);
    if (A.rank() != 2 || B.rank() != 2 || p != p2) shape_error("matmul", A.shape(), B.shape());
    Tensor<Real> out({s, q});
    std::vector<double> acc(q);
    for (std::size_t i = 0; i < s; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t k = 0; k < p; ++k) {
            const double aik = A(i, k);
            for (std::size_t j = 0; j < q; ++j) acc[j] += aik * B(k, j);
        }
        for (std::size_t j = 0; j < q; ++j) out(i, j) = static_cast<Real>(acc[j]);
    }
    return finish(tape, std::move(out), "matmul", any_grad(tape, {a, b}),
                  [a, b, s, p, q](Tape<Real>& t, Var self) {
                      const auto& A = t.value(a);
                      const auto& B = t.value(b);
                      auto g = t.grad(self);
                      if (t.needs_grad(a)) {
                          auto ga = t.grad(a);
                          for (std::size_t i = 0; i < s; ++i)
                              for (std::size_t k = 0; k < p; ++k) {
                                  double acc = 0;
                                  for (std::size_t j = 0; j < q; ++j) acc += g[i * q + j] * B(k, j);
                                  ga[i * p + k] += static_cast<Real>(acc);
                              }
                      }
                      if (t.needs_grad(b)) {
                          auto gb = t.grad(b);
                          for (std::size_t k = 0; k < p; ++k)
                              for (std::size_t j = 0; j < q; ++j) {
                                  double acc = 0;
                                  for (std::size_t i = 0; i < s; ++i) acc += A(i, k) * g[i * q + j];
                                  gb[k * q + j] += static_cast<Real>(acc);
                              }
                      }
                  });
}

template <typename Real>
Var matmul_nt(Tape<Real>& tape, Var a, Var b) {
    const auto& A = tape.value(a);
    const auto& B = tape.value(b);
    const auto [s, p] = extent(A);
    const auto [q, p2] = extent(B);
    if (p != p2) shape_error("matmul_nt", A.shape(), B.shape());
    Tensor<Real> out({s, q});
    const Real* ad = A.data().data();
    const Real* bd = B.data().data();
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < q; ++j) {
            double acc = 0;
            for (std::size_t k = 0; k < p; ++k) acc += static_cast<double>(ad[i * p + k]) * bd[j * p + k];
            out(i, j) = static_cast<Real>(acc);
        }
    return finish(tape, std::move(out), "matmul_nt", any_grad(tape, {a, b}),
                  [a, b, s, p, q](Tape<Real>& t, Var self) {
                      const Real* ad = t.value(a).data().data();
                      const Real* bd = t.value(b).data().data();
                      auto g = t.grad(self);
                      if (t.needs_grad(a)) {
                          auto ga = t.grad(a);
                          for (std::size_t i = 0; i < s; ++i)
                              for (std::size_t k = 0; k < p; ++k) {
                                  double acc = 0;
                                  for (std::size_t j = 0; j < q; ++j) acc += g[i * q + j] * static_cast<double>(bd[j * p + k]);
                                  ga[i * p + k] += static_cast<Real>(acc);
                              }
                      }
                      if (t.needs_grad(b)) {
                          auto gb = t.grad(b);
                          for (std::size_t j = 0; j < q; ++j)
                              for (std::size_t k = 0; k < p; ++k) {
                                  double acc = 0;
                                  for (std::size_t i = 0; i < s; ++i) acc += g[i * q + j] * static_cast<double>(ad[i * p + k]);
                                  gb[j * p + k] += static_cast<Real>(acc);
                              }
                      }
                  });
}

template <typename Real>
Var affine(Tape<Real>& tape, Var x, Var w, Var b) {
    const auto& X = tape.value(x);
    const auto& W = tape.value(w);
    const auto& B = tape.value(b);
    const auto [s, p] = extent(X);
    if (W.rank() != 2 || W.dim(0) != p) shape_error("affine", X.shape(), W.shape());
    const std::size_t q = W.dim(1);
    if (B.size() != q) shape_error("affine(bias)", W.shape(), B.shape());
    Tensor<Real> out({s, q});
    std::vector<double> acc(q);
    for (std::size_t i = 0; i < s; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t k = 0; k < p; ++k) {
            const double xik = X.data()[i * p + k];
            if (xik == 0.0) continue;
            for (std::size_t j = 0; j < q; ++j) acc[j] += xik * W(k, j);
        }
        for (std::size_t j = 0; j < q; ++j) out(i, j) = static_cast<Real>(acc[j] + B[j]);
    }
    return finish(tape, std::move(out), "affine", any_grad(tape, {x, w, b}),
                  [x, w, b, s, p, q](Tape<Real>& t, Var self) {
                      const auto& X = t.value(x);
                      const auto& W = t.value(w);
                      auto g = t.grad(self);
                      if (t.needs_grad(x)) {
                          auto gx = t.grad(x);
                          for (std::size_t i = 0; i < s; ++i)
                              for (std::size_t k = 0; k < p; ++k) {
                                  double acc = 0;
                                  for (std::size_t j = 0; j < q; ++j) acc += g[i * q + j] * W(k, j);
                                  gx[i * p + k] += static_cast<Real>(acc);
                              }
                      }
                      if (t.needs_grad(w)) {
                          auto gw = t.grad(w);
                          for (std::size_t k = 0; k < p; ++k)
                              for (std::size_t j = 0; j < q; ++j) {
                                  double acc = 0;
                                  for (std::size_t i = 0; i < s; ++i)
                                      acc += static_cast<double>(X.data()[i * p + k]) * g[i * q + j];
                                  gw[k * q + j] += static_cast<Real>(acc);
                              }
                      }
                      if (t.needs_grad(b)) {
                          auto gb = t.grad(b);
                          for (std::size_t j = 0; j < q; ++j) {
                              double acc = 0;
                              for (std::size_t i = 0; i < s; ++i) acc += g[i * q + j];
                              gb[j] += static_cast<Real>(acc);
                          }
                      }
                  });
}

template <typename Real>
Var add_scaled(Tape<Real>& tape, Var a, Var b, double weight) {
    const auto& A = tape.value(a);
    const auto& B = tape.value(b);
    if (A.shape() != B.shape()) shape_error("add", A.shape(), B.shape());
    Tensor<Real> out(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i)
        out[i] = static_cast<Real>(A[i] + weight * static_cast<double>(B[i]));
    return finish(tape, std::move(out), "add", any_grad(tape, {a, b}),
                  [a, b, weight](Tape<Real>& t, Var self) {
                      auto g = t.grad(self);
                      if (t.needs_grad(a)) {
                          auto ga = t.grad(a);
                          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                      }
                      if (t.needs_grad(b)) {
                          auto gb = t.grad(b);
                          for (std::size_t i = 0; i < g.size(); ++i)
                              gb[i] += static_cast<Real>(weight * g[i]);
                      }
                  });
}

template <typename Real>
Var add(Tape<Real>& tape, Var a, Var b) {
    return add_scaled(tape, a, b, 1.0);
}

template <typename Real>
Var scale(Tape<Real>& tape, Var x, double factor) {
    const auto& X = tape.value(x);
    Tensor<Real> out(X.shape());
    for (std::size_t i = 0; i < X.size(); ++i) out[i] = static_cast<Real>(factor * X[i]);
    return finish(tape, std::move(out), "scale", tape.needs_grad(x),
                  [x, factor](Tape<Real>& t, Var self) {
                      auto g = t.grad(self);
                      auto gx = t.grad(x);
                      for (std::size_t i = 0; i < g.size(); ++i)
                          gx[i] += static_cast<Real>(factor * g[i]);
                  });
}

template <typename Real>
Var relu(Tape<Real>& tape, Var x) {
    const auto& X = tape.value(x);
    Tensor<Real> out(X.shape());
    for (std::size_t i = 0; i < X.size(); ++i) out[i] = X[i] > Real{0} ? X[i] : Real{0};
    return finish(tape, std::move(out), "relu", tape.needs_grad(x), [x](Tape<Real>& t, Var self) {
        const auto& X = t.value(x);
        auto g = t.grad(self);
        auto gx = t.grad(x);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (X[i] > Real{0}) gx[i] += g[i];
    });
}

template <typename Real>
Var softmax_rows(Tape<Real>& tape, Var x) {
    const auto& X = tape.value(x);
    X.check_finite("softmax input");
    const auto [rows, cols] = extent(X);
    if (cols == 0) throw NumericError("softmax: empty row");
    Tensor<Real> out(X.shape());
    for (std::size_t i = 0; i < rows; ++i) {
        const Real* in = X.data().data() + i * cols;
        Real* o = out.data().data() + i * cols;
        const double mx = *std::max_element(in, in + cols);
        double total = 0;
        for (std::size_t j = 0; j < cols; ++j) total += std::exp(in[j] - mx);
        for (std::size_t j = 0; j < cols; ++j) o[j] = static_cast<Real>(std::exp(in[j] - mx) / total);
    }
    return finish(tape, std::move(out), "softmax", tape.needs_grad(x),
                  [x, rows, cols](Tape<Real>& t, Var self) {
                      const auto& Y = t.value(self);
                      auto g = t.grad(self);
                      auto gx = t.grad(x);
                      for (std::size_t i = 0; i < rows; ++i) {
                          double dot = 0;
                          for (std::size_t j = 0; j < cols; ++j) dot += g[i * cols + j] * Y[i * cols + j];
                          for (std::size_t j = 0; j < cols; ++j)
                              gx[i * cols + j] += static_cast<Real>(Y[i * cols + j] * (g[i * cols + j] - dot));
                      }
                  });
}

template <typename Real>
Var layer_norm(Tape<Real>& tape, Var x, Var gamma, Var beta, double eps) {
    const auto& X = tape.value(x);
    const auto [rows, d] = extent(X);
    if (tape.value(gamma).size() != d || tape.value(beta).size() != d)
        shape_error("layer_norm", X.shape(), tape.value(gamma).shape());
    const auto& G = tape.value(gamma);
    const auto& B = tape.value(beta);
    Tensor<Real> out(X.shape());
    // Normalized rows and inverse std are kept for the gradient rule.
    std::vector<double> zhat(rows * d);
    std::vector<double> inv_std(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const Real* in = X.data().data() + i * d;
        double mean = 0;
        for (std::size_t j = 0; j < d; ++j) mean += in[j];
        mean /= static_cast<double>(d);
        double var = 0;
        for (std::size_t j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
        var /= static_cast<double>(d);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) {
            zhat[i * d + j] = (in[j] - mean) * inv_std[i];
            out[i * d + j] = static_cast<Real>(G[j] * zhat[i * d + j] + B[j]);
        }
    }
    return finish(tape, std::move(out), "layer_norm", any_grad(tape, {x, gamma, beta}),
                  [x, gamma, beta, rows, d, zhat = std::move(zhat),
                   inv_std = std::move(inv_std)](Tape<Real>& t, Var self) {
                      const auto& G = t.value(gamma);
                      auto g = t.grad(self);
                      if (t.needs_grad(gamma)) {
                          auto gg = t.grad(gamma);
                          for (std::size_t j = 0; j < d; ++j) {
                              double acc = 0;
                              for (std::size_t i = 0; i < rows; ++i) acc += g[i * d + j] * zhat[i * d + j];
                              gg[j] += static_cast<Real>(acc);
                          }
                      }
                      if (t.needs_grad(beta)) {
                          auto gb = t.grad(beta);
                          for (std::size_t j = 0; j < d; ++j) {
                              double acc = 0;
                              for (std::size_t i = 0; i < rows; ++i) acc += g[i * d + j];
                              gb[j] += static_cast<Real>(acc);
                          }
                      }
                      if (t.needs_grad(x)) {
                          auto gx = t.grad(x);
                          std::vector<double> dz(d);
                          for (std::size_t i = 0; i < rows; ++i) {
                              double mean_dz = 0, mean_dz_z = 0;
                              for (std::size_t j = 0; j < d; ++j) {
                                  dz[j] = static_cast<double>(g[i * d + j]) * G[j];
                                  mean_dz += dz[j];
                                  mean_dz_z += dz[j] * zhat[i * d + j];
                              }
                              mean_dz /= static_cast<double>(d);
                              mean_dz_z /= static_cast<double>(d);
                              for (std::size_t j = 0; j < d; ++j)
                                  gx[i * d + j] += static_cast<Real>(
                                      inv_std[i] * (dz[j] - mean_dz - zhat[i * d + j] * mean_dz_z));
                          }
                      }
                  });
}

template <typename Real>
Var dropout_with_mask(Tape<Real>& tape, Var x, double p, std::span<const std::uint8_t> keep) {
    const auto& X = tape.value(x);
    if (keep.size() != X.size()) throw NumericError("dropout: mask size mismatch");
    if (p < 0.0 || p >= 1.0) throw NumericError("dropout: p must lie in [0, 1)");
    const double factor = 1.0 / (1.0 - p);
    std::vector<Real> scale_by(X.size());
    Tensor<Real> out(X.shape());
    for (std::size_t i = 0; i < X.size(); ++i) {
        scale_by[i] = keep[i] ? static_cast<Real>(factor) : Real{0};
        out[i] = X[i] * scale_by[i];
    }
    return finish(tape, std::move(out), "dropout", tape.needs_grad(x),
                  [x, scale_by = std::move(scale_by)](Tape<Real>& t, Var self) {
                      auto g = t.grad(self);
                      auto gx = t.grad(x);
                      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * scale_by[i];
                  });
}

template <typename Real>
Var dropout(Tape<Real>& tape, Var x, double p, Mode mode, Rng& rng) {
    if (mode == Mode::eval) return x;
    if (p < 0.0 || p >= 1.0) throw NumericError("dropout: p must lie in [0, 1) in train mode");
    if (p == 0.0) return x;
    const std::size_t n = tape.value(x).size();
    std::vector<std::uint8_t> keep(n);
    for (std::size_t i = 0; i < n; ++i) keep[i] = rng.uniform() >= p ? 1 : 0;
    return dropout_with_mask(tape, x, p, std::span<const std::uint8_t>(keep));
}

template <typename Real>
Var assemble_rows(Tape<Real>& tape, std::span<const Var> sources, std::span<const RowRef> picks) {
    if (sources.empty()) throw NumericError("assemble_rows: no sources");
    const std::size_t d = extent(tape.value(sources[0])).cols;
    for (Var s : sources)
        if (extent(tape.value(s)).cols != d)
            shape_error("assemble_rows", tape.value(sources[0]).shape(), tape.value(s).shape());
    Tensor<Real> out({picks.size(), d});
    bool needs = false;
    for (Var s : sources) needs = needs || tape.needs_grad(s);
    for (std::size_t i = 0; i < picks.size(); ++i) {
        const auto& src = tape.value(sources[picks[i].source]);
        if (picks[i].row >= extent(src).rows) throw NumericError("assemble_rows: row out of range");
        std::copy_n(src.data().data() + picks[i].row * d, d, out.data().data() + i * d);
    }
    std::vector<Var> srcs(sources.begin(), sources.end());
    std::vector<RowRef> refs(picks.begin(), picks.end());
    return finish(tape, std::move(out), "assemble_rows", needs,
                  [srcs = std::move(srcs), refs = std::move(refs), d](Tape<Real>& t, Var self) {
                      auto g = t.grad(self);
                      for (std::size_t i = 0; i < refs.size(); ++i) {
                          Var s = srcs[refs[i].source];
                          if (!t.needs_grad(s)) continue;
                          auto gs = t.grad(s);
                          for (std::size_t j = 0; j < d; ++j) gs[refs[i].row * d + j] += g[i * d + j];
                      }
                  });
}

template <typename Real>
Var gather_rows(Tape<Real>& tape, Var table, std::span<const std::size_t> rows) {
    std::vector<RowRef> picks;
    picks.reserve(rows.size());
    for (std::size_t r : rows) picks.push_back({0, r});
    const Var sources[] = {table};
    return assemble_rows(tape, std::span<const Var>(sources), std::span<const RowRef>(picks));
}

template <typename Real>
Var segment_mean(Tape<Real>& tape, Var x, std::size_t seg_len, std::size_t begin,
                 std::size_t count) {
    const auto& X = tape.value(x);
    const auto [rows, d] = extent(X);
    if (seg_len == 0 || rows % seg_len != 0 || count == 0 || begin + count > seg_len)
        throw NumericError("segment_mean: invalid segment layout");
    const std::size_t segs = rows / seg_len;
    Tensor<Real> out({segs, d});
    for (std::size_t s = 0; s < segs; ++s)
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0;
            for (std::size_t r = 0; r < count; ++r) acc += X[(s * seg_len + begin + r) * d + j];
            out(s, j) = static_cast<Real>(acc / static_cast<double>(count));
        }
    return finish(tape, std::move(out), "segment_mean", tape.needs_grad(x),
                  [x, seg_len, begin, count, segs, d](Tape<Real>& t, Var self) {
                      auto g = t.grad(self);
                      auto gx = t.grad(x);
                      const double w = 1.0 / static_cast<double>(count);
                      for (std::size_t s = 0; s < segs; ++s)
                          for (std::size_t r = 0; r < count; ++r)
                              for (std::size_t j = 0; j < d; ++j)
                                  gx[(s * seg_len + begin + r) * d + j] +=
                                      static_cast<Real>(w * g[s * d + j]);
                  });
}

template <typename Real>
Var attention(Tape<Real>& tape, Var q, Var k, Var v, std::size_t heads, std::size_t seg_len,
              double p, Mode mode, Rng& rng) {
    const auto& Q = tape.value(q);
    const auto& K = tape.value(k);
    const auto& V = tape.value(v);
    if (Q.shape() != K.shape() || Q.shape() != V.shape() || Q.rank() != 2)
        shape_error("attention", Q.shape(), K.shape());
    const std::size_t rows = Q.rows(), d = Q.cols();
    if (heads == 0 || d % heads != 0)
        throw NumericError("attention: width " + std::to_string(d) + " not divisible by " +
                           std::to_string(heads) + " heads");
    if (seg_len == 0 || rows % seg_len != 0) throw NumericError("attention: bad segment length");
    const bool drop = mode == Mode::train && p > 0.0;
    if (mode == Mode::train && (p < 0.0 || p >= 1.0))
        throw NumericError("attention: dropout p must lie in [0, 1)");
    const std::size_t dh = d / heads, segs = rows / seg_len, L = seg_len;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    const double keep_scale = drop ? 1.0 / (1.0 - p) : 1.0;

    // probs[(seg, head, i, j)] pre-dropout; factor holds the dropout multiplier.
    std::vector<double> probs(segs * heads * L * L);
    std::vector<double> factor(drop ? probs.size() : 0);
    Tensor<Real> out({rows, d});
    std::vector<double> scores(L);
    for (std::size_t s = 0; s < segs; ++s)
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t i = 0; i < L; ++i) {
                const std::size_t qi = s * L + i;
                double mx = -INFINITY;
                for (std::size_t j = 0; j < L; ++j) {
                    const std::size_t kj = s * L + j;
                    double acc = 0;
                    for (std::size_t c = 0; c < dh; ++c)
                        acc += static_cast<double>(Q(qi, h * dh + c)) * K(kj, h * dh + c);
                    scores[j] = acc * inv_sqrt;
                    mx = std::max(mx, scores[j]);
                }
                double total = 0;
                for (std::size_t j = 0; j < L; ++j) {
                    scores[j] = std::exp(scores[j] - mx);
                    total += scores[j];
                }
                double* P = probs.data() + ((s * heads + h) * L + i) * L;
                for (std::size_t j = 0; j < L; ++j) P[j] = scores[j] / total;
                double* F = drop ? factor.data() + ((s * heads + h) * L + i) * L : nullptr;
                if (drop)
                    for (std::size_t j = 0; j < L; ++j) F[j] = rng.uniform() >= p ? keep_scale : 0.0;
                for (std::size_t c = 0; c < dh; ++c) {
                    double acc = 0;
                    for (std::size_t j = 0; j < L; ++j)
                        acc += P[j] * (drop ? F[j] : 1.0) * V(s * L + j, h * dh + c);
                    out(qi, h * dh + c) = static_cast<Real>(acc);
                }
            }
    return finish(
        tape, std::move(out), "attention", any_grad(tape, {q, k, v}),
        [q, k, v, heads, L, segs, dh, d, inv_sqrt, probs = std::move(probs),
         factor = std::move(factor)](Tape<Real>& t, Var self) {
            const auto& Q = t.value(q);
            const auto& K = t.value(k);
            const auto& V = t.value(v);
            auto g = t.grad(self);
            const bool drop = !factor.empty();
            std::span<Real> gq = t.grad(q), gk = t.grad(k), gv = t.grad(v);
            std::vector<double> dP(L), dS(L);
            for (std::size_t s = 0; s < segs; ++s)
                for (std::size_t h = 0; h < heads; ++h)
                    for (std::size_t i = 0; i < L; ++i) {
                        const std::size_t qi = s * L + i;
                        const double* P = probs.data() + ((s * heads + h) * L + i) * L;
                        const double* F = drop ? factor.data() + ((s * heads + h) * L + i) * L : nullptr;
                        double dot = 0;
                        for (std::size_t j = 0; j < L; ++j) {
                            const std::size_t vj = s * L + j;
                            const double f = drop ? F[j] : 1.0;
                            double acc = 0;
                            for (std::size_t c = 0; c < dh; ++c)
                                acc += static_cast<double>(g[qi * d + h * dh + c]) * V(vj, h * dh + c);
                            dP[j] = acc * f;
                            dot += dP[j] * P[j];
                            if (!gv.empty() && f != 0.0)
                                for (std::size_t c = 0; c < dh; ++c)
                                    gv[vj * d + h * dh + c] +=
                                        static_cast<Real>(P[j] * f * g[qi * d + h * dh + c]);
                        }
                        for (std::size_t j = 0; j < L; ++j) dS[j] = P[j] * (dP[j] - dot) * inv_sqrt;
                        for (std::size_t j = 0; j < L; ++j) {
                            const std::size_t kj = s * L + j;
                            for (std::size_t c = 0; c < dh; ++c) {
                                if (!gq.empty())
                                    gq[qi * d + h * dh + c] += static_cast<Real>(dS[j] * K(kj, h * dh + c));
                                if (!gk.empty())
                                    gk[kj * d + h * dh + c] += static_cast<Real>(dS[j] * Q(qi, h * dh + c));
                            }
                        }
                    }
        });
}

template <typename Real>
Var tucker_contract(Tape<Real>& tape, Var h, Var r, Var core) {
    const auto& H = tape.value(h);
    const auto& R = tape.value(r);
    const auto& W = tape.value(core);
    if (H.shape() != R.shape() || H.rank() != 2) shape_error("tucker", H.shape(), R.shape());
    const std::size_t rows = H.rows(), d = H.cols();
    if (W.shape() != Shape{d, d, d}) shape_error("tucker(core)", H.shape(), W.shape());
    Tensor<Real> out({rows, d});
    std::vector<double> acc(d);
    for (std::size_t i = 0; i < rows; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) {
                const double hr = static_cast<double>(H(i, a)) * R(i, b);
                const Real* w = W.data().data() + (a * d + b) * d;
                for (std::size_t c = 0; c < d; ++c) acc[c] += hr * w[c];
            }
        for (std::size_t c = 0; c < d; ++c) out(i, c) = static_cast<Real>(acc[c]);
    }
    return finish(tape, std::move(out), "tucker", any_grad(tape, {h, r, core}),
                  [h, r, core, rows, d](Tape<Real>& t, Var self) {
                      const auto& H = t.value(h);
                      const auto& R = t.value(r);
                      const auto& W = t.value(core);
                      auto g = t.grad(self);
                      std::span<Real> gh = t.grad(h), gr = t.grad(r), gw = t.grad(core);
                      const double core_scale = injected_fault() == Fault::tucker_core_grad ? 1.5 : 1.0;
                      for (std::size_t i = 0; i < rows; ++i) {
                          const Real* gi = g.data() + i * d;
                          for (std::size_t a = 0; a < d; ++a) {
                              double acc_h = 0;
                              for (std::size_t b = 0; b < d; ++b) {
                                  const Real* w = W.data().data() + (a * d + b) * d;
                                  double wg = 0;
                                  for (std::size_t c = 0; c < d; ++c) wg += static_cast<double>(w[c]) * gi[c];
                                  acc_h += wg * R(i, b);
                                  if (!gr.empty()) gr[i * d + b] += static_cast<Real>(wg * H(i, a));
                                  if (!gw.empty()) {
                                      const double hr = core_scale * H(i, a) * R(i, b);
                                      Real* gwab = gw.data() + (a * d + b) * d;
                                      for (std::size_t c = 0; c < d; ++c) gwab[c] += static_cast<Real>(hr * gi[c]);
                                  }
                              }
                              if (!gh.empty()) gh[i * d + a] += static_cast<Real>(acc_h);
                          }
                      }
                  });
}

template <typename Real>
Var cross_entropy(Tape<Real>& tape, Var logits, std::span<const std::size_t> gold) {
    const auto& X = tape.value(logits);
    const auto [rows, cols] = extent(X);
    if (gold.size() != rows) throw NumericError("cross_entropy: one gold label per row required");
    std::vector<double> probs(rows * cols);
    double total = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        if (gold[i] >= cols) throw NumericError("cross_entropy: gold label out of range");
        const Real* in = X.data().data() + i * cols;
        const double mx = *std::max_element(in, in + cols);
        double z = 0;
        for (std::size_t j = 0; j < cols; ++j) z += std::exp(in[j] - mx);
        for (std::size_t j = 0; j < cols; ++j) probs[i * cols + j] = std::exp(in[j] - mx) / z;
        total += std::log(z) + mx - in[gold[i]];
    }
    Tensor<Real> out({1}, {static_cast<Real>(total)});
    std::vector<std::size_t> labels(gold.begin(), gold.end());
    return finish(tape, std::move(out), "cross_entropy", tape.needs_grad(logits),
                  [logits, rows, cols, probs = std::move(probs),
                   labels = std::move(labels)](Tape<Real>& t, Var self) {
                      const double g = t.grad(self)[0];
                      auto gx = t.grad(logits);
                      for (std::size_t i = 0; i < rows; ++i)
                          for (std::size_t j = 0; j < cols; ++j) {
                              const double onehot = j == labels[i] ? 1.0 : 0.0;
                              gx[i * cols + j] += static_cast<Real>(g * (probs[i * cols + j] - onehot));
                          }
                  });
}

template <typename Real>
Var normalize_rows(Tape<Real>& tape, Var x, double min_norm) {
    const auto& X = tape.value(x);
    const auto [rows, d] = extent(X);
    Tensor<Real> out(X.shape());
    std::vector<double> norms(rows);
    std::vector<std::uint8_t> clamped(rows, 0);
    for (std::size_t i = 0; i < rows; ++i) {
        double n2 = 0;
        for (std::size_t j = 0; j < d; ++j) n2 += static_cast<double>(X[i * d + j]) * X[i * d + j];
        norms[i] = std::sqrt(n2);
        if (norms[i] < min_norm) {
            norms[i] = min_norm;
            clamped[i] = 1;
        }
        if (!(norms[i] > 1e-30) || !std::isfinite(norms[i]))
            throw NumericError("cosine similarity undefined for zero-norm embedding");
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = static_cast<Real>(X[i * d + j] / norms[i]);
    }
    return finish(tape, std::move(out), "normalize_rows", tape.needs_grad(x),
                  [x, rows, d, norms = std::move(norms), clamped = std::move(clamped)](Tape<Real>& t, Var self) {
                      const auto& X = t.value(x);
                      auto g = t.grad(self);
                      auto gx = t.grad(x);
                      for (std::size_t i = 0; i < rows; ++i) {
                          double dot = 0;
                          if (!clamped[i])
                              for (std::size_t j = 0; j < d; ++j) dot += g[i * d + j] * (X[i * d + j] / norms[i]);
                          for (std::size_t j = 0; j < d; ++j)
                              gx[i * d + j] += static_cast<Real>(
                                  (g[i * d + j] - (X[i * d + j] / norms[i]) * dot) / norms[i]);
                      }
                  });
}

template <typename Real>
Var sum(Tape<Real>& tape, Var x) {
    const auto& X = tape.value(x);
    double total = 0;
    for (std::size_t i = 0; i < X.size(); ++i) total += X[i];
    Tensor<Real> out({1}, {static_cast<Real>(total)});
    return finish(tape, std::move(out), "sum", tape.needs_grad(x), [x](Tape<Real>& t, Var self) {
        const Real g = t.grad(self)[0];
        for (Real& gx : t.grad(x)) gx += g;
    });
}

#define MYGO_INSTANTIATE_OPS(Real)                                                              \
    template Var matmul<Real>(Tape<Real>&, Var, Var);                                            \
    template Var matmul_nt<Real>(Tape<Real>&, Var, Var);                                         \
    template Var affine<Real>(Tape<Real>&, Var, Var, Var);                                       \
    template Var add<Real>(Tape<Real>&, Var, Var);                                               \
    template Var add_scaled<Real>(Tape<Real>&, Var, Var, double);                                \
    template Var scale<Real>(Tape<Real>&, Var, double);                                          \
    template Var relu<Real>(Tape<Real>&, Var);                                                   \
    template Var softmax_rows<Real>(Tape<Real>&, Var);                                           \
    template Var layer_norm<Real>(Tape<Real>&, Var, Var, Var, double);                           \
    template Var dropout<Real>(Tape<Real>&, Var, double, Mode, Rng&);                            \
    template Var dropout_with_mask<Real>(Tape<Real>&, Var, double, std::span<const std::uint8_t>);\
    template Var assemble_rows<Real>(Tape<Real>&, std::span<const Var>, std::span<const RowRef>); \
    template Var gather_rows<Real>(Tape<Real>&, Var, std::span<const std::size_t>);              \
    template Var segment_mean<Real>(Tape<Real>&, Var, std::size_t, std::size_t, std::size_t);    \
    template Var attention<Real>(Tape<Real>&, Var, Var, Var, std::size_t, std::size_t, double,   \
                                 Mode, Rng&);                                                    \
    template Var tucker_contract<Real>(Tape<Real>&, Var, Var, Var);                              \
    template Var cross_entropy<Real>(Tape<Real>&, Var, std::span<const std::size_t>);            \
    template Var normalize_rows<Real>(Tape<Real>&, Var, double);                                         \
    template Var sum<Real>(Tape<Real>&, Var);

MYGO_INSTANTIATE_OPS(float)
MYGO_INSTANTIATE_OPS(double)

}  // namespace mygo::ops
