#include "mygo/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "mygo/errors.hpp"

namespace mygo {

void TrainConfig::validate() const {
    model.validate();
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
        throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

ModelParams<float> init_params(const ModelConfig& config, std::size_t entities, std::size_t relations,
                               std::size_t visual_dim, std::size_t textual_dim, Rng& rng) {
    auto params = ModelParams<float>::shaped(config, entities, relations, visual_dim, textual_dim);
    params.visit([&](const std::string& name, Tensor<float>& t) {
        if (ends_with(name, ".b") || ends_with(name, ".beta")) {
            std::fill(t.data().begin(), t.data().end(), 0.0f);
        } else if (ends_with(name, ".gamma")) {
            std::fill(t.data().begin(), t.data().end(), 1.0f);
        } else if (name == "tucker.core") {
            for (float& v : t.data()) v = static_cast<float>(rng.uniform(-0.1, 0.1));
        } else {
            const double fan_in = static_cast<double>(t.dim(0));
            const double fan_out = static_cast<double>(t.size() / t.dim(0));
            const double bound = std::sqrt(6.0 / (fan_in + fan_out));
            for (float& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
        }
    });
    return params;
}

AdamState AdamState::for_params(const ModelParams<float>& params, double beta1, double beta2, double eps) {
    AdamState state;
    state.beta1 = beta1;
    state.beta2 = beta2;
    state.eps = eps;
    params.visit([&](const std::string&, const Tensor<float>& t) {
        state.first.emplace_back(t.shape());
        state.second.emplace_back(t.shape());
    });
    return state;
}

void adam_step(ModelParams<float>& params, AdamState& state, double learning_rate) {
    params.visit([&](const std::string& name, const Tensor<float>& t) {
        for (float g : t.grad())
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + name + "; step rejected");
    });
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    std::size_t index = 0;
    params.visit([&](const std::string&, Tensor<float>& p) {
        auto m = state.first[index].data();
        auto v = state.second[index].data();
        ++index;
        auto values = p.data();
        auto grad = p.grad();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = grad[i];
            m[i] = static_cast<float>(state.beta1 * m[i] + (1.0 - state.beta1) * g);
            v[i] = static_cast<float>(state.beta2 * v[i] + (1.0 - state.beta2) * g * g);
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            values[i] = static_cast<float>(values[i] - learning_rate * m_hat / (std::sqrt(v_hat) + state.eps));
        }
        p.zero_grad();
    });
}

Trainer::Trainer(const KnowledgeGraph& graph, const EntityInputs& inputs, TrainConfig config)
    : graph_(graph),
      config_(std::move(config)),
      model_(config_.model, inputs, graph.entity_count(), graph.relation_count()),
      filter_(graph),
      rng_(config_.seed) {
    config_.validate();
    if (graph_.train.empty()) throw DataError("training split is empty");
    params_ = init_params(config_.model, graph.entity_count(), graph.relation_count(), inputs.visual.dim,
                          inputs.textual.dim, rng_);
    adam_ = AdamState::for_params(params_, config_.beta1, config_.beta2, config_.adam_eps);
}

StepLog Trainer::train_step(std::span<const Triple> batch) {
    Tape<float> tape;
    const auto terms = model_.total_loss(tape, params_, batch, ops::Mode::train, rng_);
    StepLog entry;
    entry.epoch = epoch_ + 1;
    entry.step = adam_.step + 1;
    entry.kgc = tape.value(terms.kgc)[0];
    entry.con = terms.con ? tape.value(*terms.con)[0] : 0.0;
    entry.total = tape.value(terms.total)[0];
    if (!std::isfinite(entry.total))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch_ + 1) + " step " +
                           std::to_string(entry.step));
    tape.backward(terms.total);
    params_.visit([&](const std::string&, Tensor<float>& p) {
        const auto g = tape.param_grad(p);
        auto slot = p.grad();
        for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
    });
    adam_step(params_, adam_, config_.learning_rate);
    log_.push_back(entry);
    return entry;
}

std::vector<StepLog> Trainer::run_epoch() {
    std::vector<std::size_t> order(graph_.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = rng_.split();
    shuffle.shuffle(order);
    std::vector<StepLog> steps;
    std::vector<Triple> batch;
    for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size) {
        batch.clear();
        const std::size_t end = std::min(order.size(), begin + config_.batch_size);
        for (std::size_t i = begin; i < end; ++i) batch.push_back(graph_.train[order[i]]);
        steps.push_back(train_step(batch));
    }
    ++epoch_;
    if (config_.eval_every > 0 && epoch_ % config_.eval_every == 0 && !graph_.valid.empty()) {
        EvalOptions options;
        options.workers = config_.workers;
        ValidationLog entry{epoch_, evaluate(model_, params_, filter_, graph_.valid, options)};
        if (entry.report.both_filtered().mrr > best_mrr_) {
            best_mrr_ = entry.report.both_filtered().mrr;
            best_ = params_;
        }
        validation_.push_back(entry);
    }
    return steps;
}

void Trainer::run(const std::function<void(const Trainer&)>& after_epoch) {
    while (epoch_ < config_.epochs) {
        run_epoch();
        if (after_epoch) after_epoch(*this);
    }
}

Checkpoint Trainer::checkpoint(const std::string& config_echo) const {
    Checkpoint c;
    c.params = export_params(params_);
    std::size_t i = 0;
    params_.visit([&](const std::string& name, const Tensor<float>&) {
        const auto& m = adam_.first[i];
        const auto& v = adam_.second[i];
        c.optimizer.push_back({"adam.m/" + name, m.shape(), {m.data().begin(), m.data().end()}});
        c.optimizer.push_back({"adam.v/" + name, v.shape(), {v.data().begin(), v.data().end()}});
        ++i;
    });
    c.step = adam_.step;
    c.epoch = epoch_;
    const auto state = rng_.state();
    c.rng_state.assign(state.begin(), state.end());
    c.config_echo = config_echo;
    return c;
}

void Trainer::restore(const Checkpoint& checkpoint) {
    import_params(checkpoint.params, params_);
    if (checkpoint.optimizer.size() != 2 * adam_.first.size())
        throw DataError("checkpoint optimizer state does not match the model");
    for (std::size_t i = 0; i < adam_.first.size(); ++i) {
        for (auto [dst, src] : {std::pair{&adam_.first[i], &checkpoint.optimizer[2 * i]},
                                std::pair{&adam_.second[i], &checkpoint.optimizer[2 * i + 1]}}) {
            if (src->shape != dst->shape()) throw DataError("optimizer tensor shape mismatch: " + src->name);
            std::copy(src->values.begin(), src->values.end(), dst->data().begin());
        }
    }
    adam_.step = checkpoint.step;
    epoch_ = static_cast<std::size_t>(checkpoint.epoch);
    rng_ = Rng::from_state(checkpoint.rng_state);
    params_.zero_grad();
}

Trainer train(const KnowledgeGraph& graph, const EntityInputs& inputs, const TrainConfig& config) {
    Trainer trainer(graph, inputs, config);
    trainer.run();
    return trainer;
}

void write_train_log(const std::vector<StepLog>& log, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "epoch\tstep\tL_kgc\tL_con\ttotal\n";
    char buf[160];
    for (const StepLog& s : log) {
        std::snprintf(buf, sizeof buf, "%zu\t%zu\t%.9g\t%.9g\t%.9g\n", s.epoch, s.step, s.kgc, s.con, s.total);
        out << buf;
    }
}

}  // namespace mygo
