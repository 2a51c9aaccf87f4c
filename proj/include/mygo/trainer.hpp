#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mygo/checkpoint.hpp"
#include "mygo/evaluator.hpp"
#include "mygo/model.hpp"

namespace mygo {

struct TrainConfig {
    ModelConfig model;
    double learning_rate = 1e-3;
    std::size_t batch_size = 1024;
    std::size_t epochs = 2000;
    std::uint64_t seed = 0;
    /// Validate every this many epochs (0 disables validation).
    std::size_t eval_every = 0;
    std::size_t workers = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

/// Fan-based uniform init (+-sqrt(6 / (fan_in + fan_out))) for weights and
/// embeddings, +-0.1 for the Tucker core, zero biases, unit norm gains.
ModelParams<float> init_params(const ModelConfig& config, std::size_t entities, std::size_t relations,
                               std::size_t visual_dim, std::size_t textual_dim, Rng& rng);

/// First and second moment estimates, one pair per parameter in visit order.
struct AdamState {
    std::vector<Tensor<float>> first;
    std::vector<Tensor<float>> second;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_params(const ModelParams<float>& params, double beta1, double beta2, double eps);
};

/// Bias-corrected Adam update from the gradient slots of `params`, which are
/// zeroed afterwards. A non-finite gradient rejects the whole step.
void adam_step(ModelParams<float>& params, AdamState& state, double learning_rate);

/// Epoch and step both count from 1.
struct StepLog {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double kgc = 0;
    double con = 0;
    double total = 0;
};

struct ValidationLog {
    std::size_t epoch = 0;
    MetricsReport report;
};

/// Epoch loop over shuffled mini-batches. Every stochastic choice (shuffles,
/// dropout masks) draws from one master generator seeded from the config, so
/// (seed, config, data) fixes the whole trajectory.
class Trainer {
public:
    Trainer(const KnowledgeGraph& graph, const EntityInputs& inputs, TrainConfig config);

    const TrainConfig& config() const { return config_; }
    const Model<float>& model() const { return model_; }
    const ModelParams<float>& params() const { return params_; }
    ModelParams<float>& params() { return params_; }
    const AdamState& optimizer() const { return adam_; }
    const Rng& rng() const { return rng_; }
    std::size_t epoch() const { return epoch_; }
    const std::vector<StepLog>& log() const { return log_; }
    const std::vector<ValidationLog>& validation() const { return validation_; }
    /// Parameters with the best filtered validation MRR so far, if validated.
    const std::optional<ModelParams<float>>& best_params() const { return best_; }
    double best_mrr() const { return best_mrr_; }

    /// Runs one epoch; returns the per-step logs it produced.
    std::vector<StepLog> run_epoch();
    /// Runs until config().epochs epochs are complete.
    void run(const std::function<void(const Trainer&)>& after_epoch = {});

    /// One optimizer step on `batch` (exposed for tests).
    StepLog train_step(std::span<const Triple> batch);

    Checkpoint checkpoint(const std::string& config_echo) const;
    /// Resume from a checkpoint written by checkpoint().
    void restore(const Checkpoint& checkpoint);

private:
    const KnowledgeGraph& graph_;
    TrainConfig config_;
    Model<float> model_;
    FilterIndex filter_;
    Rng rng_;
    ModelParams<float> params_;
    AdamState adam_;
    std::size_t epoch_ = 0;
    std::vector<StepLog> log_;
    std::vector<ValidationLog> validation_;
    std::optional<ModelParams<float>> best_;
    double best_mrr_ = -1;
};

/// Convenience wrapper: construct, run to completion, return the trainer.
Trainer train(const KnowledgeGraph& graph, const EntityInputs& inputs, const TrainConfig& config);

/// Training log TSV `epoch\tstep\tL_kgc\tL_con\ttotal` (with header line).
void write_train_log(const std::vector<StepLog>& log, const std::filesystem::path& path);

}  // namespace mygo
