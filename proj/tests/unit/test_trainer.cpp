#include <cmath>

#include "doctest.h"
#include "mygo/binary_io.hpp"
#include "mygo/errors.hpp"
#include "mygo/trainer.hpp"
#include "support.hpp"

using namespace mygo;

namespace {

std::vector<std::uint8_t> bytes_of(const Checkpoint& c) { return encode_checkpoint(c); }

}  // namespace

TEST_CASE("init_params: bounds, zero biases, determinism") {
    ModelConfig cfg;
    cfg.dim = 32;
    cfg.heads = 4;
    Rng a(3), b(3);
    const auto p = init_params(cfg, 3000, 5, 48, 24, a);
    const auto q = init_params(cfg, 3000, 5, 48, 24, b);
    CHECK(p == q);
    std::size_t draws = 0;
    p.visit([&](const std::string& name, const Tensor<float>& t) {
        INFO(name);
        if (name.ends_with(".b") || name.ends_with(".beta")) {
            for (float v : t.data()) CHECK(v == 0.0f);
        } else if (name.ends_with(".gamma")) {
            for (float v : t.data()) CHECK(v == 1.0f);
        } else {
            const double bound = name == "tucker.core"
                                     ? 0.1
                                     : std::sqrt(6.0 / static_cast<double>(t.dim(0) + t.size() / t.dim(0)));
            double lo = 0, hi = 0;
            for (float v : t.data()) {
                lo = std::min(lo, static_cast<double>(v));
                hi = std::max(hi, static_cast<double>(v));
            }
            CHECK(lo >= -bound);
            CHECK(hi <= bound);
            if (t.size() > 1000) {
                CHECK(hi > 0.9 * bound);
                CHECK(lo < -0.9 * bound);
            }
            draws += t.size();
        }
    });
    CHECK(draws > 100000);
}

TEST_CASE("adam: hand-rolled single step and zero gradient") {
    ModelConfig cfg = testing::tiny_model_config();
    testing::TinyModel tiny(1, cfg);
    auto params = tiny.params<float>(1);
    auto state = AdamState::for_params(params, 0.9, 0.999, 1e-8);
    const auto before = params;
    adam_step(params, state, 0.1);
    CHECK(params == before);
    CHECK(state.step == 1);

    // theta = 0, g = 1: m_hat = 1, v_hat = 1, theta' = -0.1 / (1 + 1e-8).
    state = AdamState::for_params(params, 0.9, 0.999, 1e-8);
    params.core[0] = 0.0f;
    params.core.grad()[0] = 1.0f;
    params.core.grad()[1] = -2.0f;
    const float other = params.core[1];
    adam_step(params, state, 0.1);
    CHECK(params.core[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(params.core[1] == doctest::Approx(other + 0.1).epsilon(1e-6));
    CHECK(params.core.grad()[0] == 0.0f);

    // Second step with the same gradient: closed form from two moment updates.
    params.core.grad()[0] = 1.0f;
    adam_step(params, state, 0.1);
    const double m = 0.9 * 0.1 + 0.1, v = 0.999 * 0.001 + 0.001;
    const double expect = -0.1 - 0.1 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
    CHECK(params.core[0] == doctest::Approx(expect).epsilon(1e-5));

    const auto snapshot = params;
    params.visual_w.grad()[0] = std::nanf("");
    CHECK_THROWS_AS(adam_step(params, state, 0.1), NumericError);
    CHECK(state.step == 2);
    params.visual_w.grad()[0] = 0.0f;
    CHECK(params == snapshot);
}

TEST_CASE("trainer: zero epochs returns initial params and an empty log") {
    const auto data = make_synthetic(testing::smoke_spec(1));
    const auto cfg = testing::smoke_config(1, 0);
    const auto inputs = data.inputs(cfg.model.m, cfg.model.n);
    const Trainer t = train(data.graph, inputs, cfg);
    Rng rng(cfg.seed);
    CHECK(t.params() == init_params(cfg.model, 20, 3, inputs.visual.dim, inputs.textual.dim, rng));
    CHECK(t.log().empty());
}

TEST_CASE("trainer: training loss decreases over the first 20 epochs for most seeds") {
    int decreasing = 0;
    const int seeds = 10;
    for (int seed = 0; seed < seeds; ++seed) {
        const auto data = make_synthetic(testing::smoke_spec(100 + seed));
        auto cfg = testing::smoke_config(seed, 20);
        cfg.learning_rate = 5e-4;
        const auto inputs = data.inputs(cfg.model.m, cfg.model.n);
        Trainer t(data.graph, inputs, cfg);
        std::vector<double> per_epoch;
        t.run([&](const Trainer& tr) { per_epoch.push_back(tr.log().back().total); });
        bool strict = true;
        for (std::size_t i = 1; i < per_epoch.size(); ++i) strict = strict && per_epoch[i] < per_epoch[i - 1];
        decreasing += strict;
    }
    CHECK(decreasing >= 9);
}

TEST_CASE("trainer: lambda = 0 diverges from the full loss after the first step") {
    const auto data = make_synthetic(testing::smoke_spec(2));
    auto full = testing::smoke_config(2, 1);
    full.batch_size = 20;
    auto plain = full;
    plain.model.lambda = 0.0;
    const auto inputs = data.inputs(full.model.m, full.model.n);
    Trainer a(data.graph, inputs, full), b(data.graph, inputs, plain);
    a.run();
    b.run();
    REQUIRE(a.log().size() == 3);
    CHECK(a.log()[0].kgc == b.log()[0].kgc);
    CHECK(a.log()[0].con > 0.0);
    CHECK(b.log()[0].con == 0.0);
    CHECK(a.log()[1].kgc != b.log()[1].kgc);
}

TEST_CASE("trainer: identical runs are bit-identical; resume matches an uninterrupted run") {
    const auto data = make_synthetic(testing::smoke_spec(3));
    auto cfg = testing::smoke_config(3, 6);
    cfg.batch_size = 16;
    cfg.model.dropout = 0.2;
    const auto inputs = data.inputs(cfg.model.m, cfg.model.n);
    Trainer a(data.graph, inputs, cfg), b(data.graph, inputs, cfg);
    a.run();
    b.run();
    CHECK(bytes_of(a.checkpoint("x")) == bytes_of(b.checkpoint("x")));

    auto half = cfg;
    half.epochs = 3;
    Trainer first(data.graph, inputs, half);
    first.run();
    const auto dir = testing::temp_dir("resume");
    save_checkpoint(first.checkpoint("x"), dir / "mid.ckpt");
    Trainer resumed(data.graph, inputs, cfg);
    resumed.restore(load_checkpoint(dir / "mid.ckpt"));
    CHECK(resumed.epoch() == 3);
    resumed.run();
    CHECK(resumed.log().back().total == a.log().back().total);
    CHECK(bytes_of(resumed.checkpoint("x")) == bytes_of(a.checkpoint("x")));
}

TEST_CASE("trainer: validation keeps the best parameters") {
    auto spec = testing::smoke_spec(4);
    spec.valid = 10;
    const auto data = make_synthetic(spec);
    auto cfg = testing::smoke_config(4, 4);
    cfg.eval_every = 2;
    const auto inputs = data.inputs(cfg.model.m, cfg.model.n);
    Trainer t(data.graph, inputs, cfg);
    t.run();
    REQUIRE(t.validation().size() == 2);
    REQUIRE(t.best_params().has_value());
    double best = 0;
    for (const auto& v : t.validation()) best = std::max(best, v.report.both_filtered().mrr);
    CHECK(t.best_mrr() == best);
}

TEST_CASE("trainer: invalid configs are rejected") {
    const auto data = make_synthetic(testing::smoke_spec(5));
    auto cfg = testing::smoke_config(5, 1);
    const auto inputs = data.inputs(cfg.model.m, cfg.model.n);
    auto bad = cfg;
    bad.model.heads = 5;
    CHECK_THROWS_AS(Trainer(data.graph, inputs, bad), ConfigError);
    bad = cfg;
    bad.learning_rate = 0;
    CHECK_THROWS_AS(Trainer(data.graph, inputs, bad), ConfigError);
    bad = cfg;
    bad.batch_size = 0;
    CHECK_THROWS_AS(Trainer(data.graph, inputs, bad), ConfigError);
}

TEST_CASE("checkpoint: encode/decode round trip and corrupt inputs") {
    const auto data = make_synthetic(testing::smoke_spec(6));
    auto cfg = testing::smoke_config(6, 1);
    const auto inputs = data.inputs(cfg.model.m, cfg.model.n);
    Trainer t(data.graph, inputs, cfg);
    t.run();
    const Checkpoint c = t.checkpoint("dim = 32\n");
    const auto bytes = encode_checkpoint(c);
    const Checkpoint back = decode_checkpoint(bytes);
    CHECK(back == c);
    CHECK(encode_checkpoint(back) == bytes);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "MYGO");

    const auto dir = testing::temp_dir("ckpt");
    save_checkpoint(c, dir / "a.ckpt");
    save_checkpoint(load_checkpoint(dir / "a.ckpt"), dir / "b.ckpt");
    CHECK(ByteReader::from_file(dir / "a.ckpt").raw(bytes.size()) == ByteReader::from_file(dir / "b.ckpt").raw(bytes.size()));

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad), DataError);
    bad = bytes;
    bad[4] = 2;
    CHECK_THROWS_AS(decode_checkpoint(bad), DataError);
    bad = bytes;
    bad.pop_back();
    CHECK_THROWS_AS(decode_checkpoint(bad), DataError);
    bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(decode_checkpoint(bad), DataError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), DataError);

    auto params = t.params();
    auto tensors = export_params(params);
    tensors[0].name = "nope";
    CHECK_THROWS_AS(import_params(tensors, params), DataError);
    tensors = export_params(params);
    tensors[1].shape = {1};
    CHECK_THROWS_AS(import_params(tensors, params), DataError);
}
