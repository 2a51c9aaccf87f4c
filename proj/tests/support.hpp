// Shared fixtures and independent reference implementations for the tests.
// Oracles work on plain row-major std::vector<double> and never call into
// the library's ops.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mygo/model.hpp"
#include "mygo/synthetic.hpp"
#include "mygo/trainer.hpp"

namespace testing {

using Mat = std::vector<double>;  // row-major, dimensions carried separately

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("mygo_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

template <typename Real>
Mat to_mat(const mygo::Tensor<Real>& t) {
    return Mat(t.data().begin(), t.data().end());
}

template <typename Real>
mygo::Tensor<Real> random_tensor(mygo::Shape shape, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    mygo::Tensor<Real> t(shape);
    for (auto& v : t.data()) v = static_cast<Real>(dist(gen));
    return t;
}

inline Mat naive_matmul(const Mat& a, const Mat& b, std::size_t n, std::size_t k, std::size_t m) {
    Mat out(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * m + j];
            out[i * m + j] = s;
        }
    return out;
}

inline Mat naive_affine(const Mat& x, const Mat& w, const Mat& b, std::size_t n, std::size_t k, std::size_t m) {
    Mat out = naive_matmul(x, w, n, k, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] += b[j];
    return out;
}

inline Mat naive_layer_norm(const Mat& x, const Mat& gamma, const Mat& beta, std::size_t n, std::size_t d,
                            double eps) {
    Mat out(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        double mean = 0;
        for (std::size_t j = 0; j < d; ++j) mean += x[i * d + j];
        mean /= static_cast<double>(d);
        double var = 0;
        for (std::size_t j = 0; j < d; ++j) var += (x[i * d + j] - mean) * (x[i * d + j] - mean);
        var /= static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j)
            out[i * d + j] = gamma[j] * (x[i * d + j] - mean) / std::sqrt(var + eps) + beta[j];
    }
    return out;
}

/// Per-segment multi-head scaled dot-product attention, no dropout.
inline Mat naive_attention(const Mat& q, const Mat& k, const Mat& v, std::size_t rows, std::size_t d,
                           std::size_t heads, std::size_t seg_len) {
    const std::size_t dh = d / heads;
    Mat out(rows * d, 0.0);
    for (std::size_t s = 0; s < rows / seg_len; ++s)
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t i = 0; i < seg_len; ++i) {
                const std::size_t qi = s * seg_len + i;
                std::vector<double> w(seg_len);
                double mx = -1e300;
                for (std::size_t j = 0; j < seg_len; ++j) {
                    const std::size_t kj = s * seg_len + j;
                    double dot = 0;
                    for (std::size_t c = 0; c < dh; ++c) dot += q[qi * d + h * dh + c] * k[kj * d + h * dh + c];
                    w[j] = dot / std::sqrt(static_cast<double>(dh));
                    mx = std::max(mx, w[j]);
                }
                double z = 0;
                for (double& x : w) z += (x = std::exp(x - mx));
                for (std::size_t j = 0; j < seg_len; ++j) {
                    const std::size_t vj = s * seg_len + j;
                    for (std::size_t c = 0; c < dh; ++c) out[qi * d + h * dh + c] += w[j] / z * v[vj * d + h * dh + c];
                }
            }
    return out;
}

/// Post-norm encoder layer in eval mode.
template <typename Real>
Mat naive_transformer_layer(const Mat& x, const mygo::TransformerLayerParams<Real>& p, std::size_t rows,
                            std::size_t d, std::size_t heads, std::size_t seg_len, double eps) {
    const std::size_t ff = p.ff1_b.size();
    const Mat q = naive_affine(x, to_mat(p.attn.wq), to_mat(p.attn.bq), rows, d, d);
    const Mat k = naive_affine(x, to_mat(p.attn.wk), to_mat(p.attn.bk), rows, d, d);
    const Mat v = naive_affine(x, to_mat(p.attn.wv), to_mat(p.attn.bv), rows, d, d);
    const Mat a = naive_affine(naive_attention(q, k, v, rows, d, heads, seg_len), to_mat(p.attn.wo),
                               to_mat(p.attn.bo), rows, d, d);
    Mat r1(rows * d);
    for (std::size_t i = 0; i < r1.size(); ++i) r1[i] = x[i] + a[i];
    const Mat h1 = naive_layer_norm(r1, to_mat(p.norm1_gamma), to_mat(p.norm1_beta), rows, d, eps);
    Mat f = naive_affine(h1, to_mat(p.ff1_w), to_mat(p.ff1_b), rows, d, ff);
    for (double& z : f) z = std::max(0.0, z);
    const Mat f2 = naive_affine(f, to_mat(p.ff2_w), to_mat(p.ff2_b), rows, ff, d);
    Mat r2(rows * d);
    for (std::size_t i = 0; i < r2.size(); ++i) r2[i] = h1[i] + f2[i];
    return naive_layer_norm(r2, to_mat(p.norm2_gamma), to_mat(p.norm2_beta), rows, d, eps);
}

/// sum_{a,b,c} W[a,b,c] h[a] r[b] t[c]
template <typename Real>
double naive_tucker(const Mat& h, const Mat& r, const Mat& t, const mygo::Tensor<Real>& core) {
    const std::size_t d = h.size();
    double s = 0;
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
            for (std::size_t c = 0; c < d; ++c)
                s += static_cast<double>(core[(a * d + b) * d + c]) * h[a] * r[b] * t[c];
    return s;
}

/// -log softmax(logits)[gold]
inline double naive_cross_entropy(const std::vector<double>& logits, std::size_t gold) {
    double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0;
    for (double l : logits) z += std::exp(l - mx);
    return -(logits[gold] - mx - std::log(z));
}

/// Brute-force central differences of f at every coordinate of `values`.
inline std::vector<double> numeric_gradient(const std::function<double()>& f, std::span<double> values,
                                            double h = 1e-5) {
    std::vector<double> g(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + h;
        const double plus = f();
        values[i] = saved - h;
        const double minus = f();
        values[i] = saved;
        g[i] = (plus - minus) / (2 * h);
    }
    return g;
}

inline double rel_error(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / scale;
}

/// The smoke graph of the acceptance suite: |E|=20, |R|=3, 60 train triples.
inline mygo::SyntheticSpec smoke_spec(std::uint64_t seed) {
    mygo::SyntheticSpec spec;
    spec.entities = 20;
    spec.relations = 3;
    spec.train = 60;
    spec.seed = seed;
    return spec;
}

inline mygo::TrainConfig smoke_config(std::uint64_t seed, std::size_t epochs = 500) {
    mygo::TrainConfig c;
    c.model.dim = 32;
    c.model.heads = 4;
    c.model.dropout = 0.0;
    c.model.m = 4;
    c.model.n = 4;
    c.model.lambda = 0.01;
    c.model.tau = 0.5;
    c.learning_rate = 5e-3;
    c.batch_size = 64;
    c.epochs = epochs;
    c.seed = seed;
    return c;
}

/// A small model with random (non-trivial) parameters for forward-pass tests.
struct TinyModel {
    mygo::SyntheticDataset data;
    mygo::EntityInputs inputs;
    mygo::ModelConfig config;

    TinyModel(std::uint64_t seed, mygo::ModelConfig cfg, std::size_t entities = 6, std::size_t relations = 2) {
        mygo::SyntheticSpec spec;
        spec.entities = entities;
        spec.relations = relations;
        spec.train = std::min<std::size_t>(8, entities * entities * relations);
        spec.visual_size = 10;
        spec.visual_dim = 5;
        spec.textual_size = 12;
        spec.textual_dim = 6;
        spec.max_visual_sources = 3;
        spec.max_textual_sources = 2;
        spec.max_tokens_per_source = 6;
        spec.stopwords = 2;
        spec.seed = seed;
        data = mygo::make_synthetic(spec);
        config = cfg;
        inputs = data.inputs(cfg.m, cfg.n);
    }

    template <typename Real>
    mygo::ModelParams<Real> params(std::uint64_t seed) const {
        mygo::Rng rng(seed);
        auto p = mygo::init_params(config, data.graph.entity_count(), data.graph.relation_count(),
                                   inputs.visual.dim, inputs.textual.dim, rng);
        // Non-trivial norm gains and biases so every parameter matters.
        p.visit([&](const std::string& name, mygo::Tensor<float>& t) {
            if (name.ends_with(".gamma") || name.ends_with(".b") || name.ends_with(".beta"))
                for (float& v : t.data()) v += static_cast<float>(rng.uniform(-0.2, 0.2));
        });
        if constexpr (std::is_same_v<Real, float>) {
            return p;
        } else {
            auto out = p.template cast<Real>();
            out.visit([](const std::string&, mygo::Tensor<Real>& t) { t.set_requires_grad(true); });
            return out;
        }
    }
};

inline mygo::ModelConfig tiny_model_config() {
    mygo::ModelConfig c;
    c.dim = 8;
    c.heads = 2;
    c.dropout = 0.0;
    c.m = 3;
    c.n = 3;
    c.lambda = 0.3;
    c.tau = 0.5;
    return c;
}

}  // namespace testing
