#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mygo/model.hpp"

namespace mygo {

struct GradCheckOptions {
    double step = 1e-4;
    /// Coordinates where both gradients are below this are compared absolutely.
    double floor = 1e-8;
};

struct GradCheckGroup {
    std::string name;
    std::size_t coordinates = 0;
    double max_rel_error = 0;
    double max_abs_error = 0;
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    double loss = 0;

    double max_rel_error() const;
    bool passed(double tolerance) const { return max_rel_error() < tolerance; }
};

using NamedParams = std::vector<std::pair<std::string, Tensor<double>*>>;

/// Central-difference check of the tape's gradient for every coordinate of
/// every listed parameter. `loss` must build a scalar on the tape it is
/// given; it is called once recording and then twice per coordinate.
/// Throws NumericError if two evaluations at the same point disagree.
GradCheckReport grad_check(const std::function<Var(Tape<double>&)>& loss, const NamedParams& params,
                           const GradCheckOptions& options = {});

/// grad_check over every tensor of `params` against the model's total loss
/// on `batch`. `rng` is shared by all evaluations, so any active dropout
/// shows up as non-determinism.
GradCheckReport grad_check_model(const Model<double>& model, ModelParams<double>& params,
                                 std::span<const Triple> batch, Rng& rng,
                                 const GradCheckOptions& options = {});

std::string format_grad_check(const GradCheckReport& report);

}  // namespace mygo
