#include "mygo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mygo/errors.hpp"

namespace mygo {

double GradCheckReport::max_rel_error() const {
    double worst = 0;
    for (const auto& g : groups) worst = std::max(worst, g.max_rel_error);
    return worst;
}

GradCheckReport grad_check(const std::function<Var(Tape<double>&)>& loss, const NamedParams& params,
                           const GradCheckOptions& options) {
    auto evaluate = [&] {
        Tape<double> tape(false);
        return tape.value(loss(tape))[0];
    };

    GradCheckReport report;
    std::vector<std::vector<double>> analytic;
    {
        Tape<double> tape;
        const Var out = loss(tape);
        if (tape.value(out).size() != 1) throw NumericError("grad_check: loss is not a scalar");
        report.loss = tape.value(out)[0];
        tape.backward(out);
        for (const auto& [name, tensor] : params) {
            const auto g = tape.param_grad(*tensor);
            std::vector<double> copy(tensor->size(), 0.0);
            std::copy(g.begin(), g.end(), copy.begin());
            analytic.push_back(std::move(copy));
        }
    }
    const double again = evaluate();
    if (again != report.loss)
        throw NumericError("grad_check: loss is not deterministic (" + std::to_string(report.loss) + " vs " +
                           std::to_string(again) + "); disable dropout");

    const double h = options.step;
    for (std::size_t p = 0; p < params.size(); ++p) {
        const auto& [name, tensor] = params[p];
        GradCheckGroup group{name, tensor->size(), 0, 0};
        auto values = tensor->data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + h;
            const double plus = evaluate();
            values[i] = saved - h;
            const double minus = evaluate();
            values[i] = saved;
            const double numeric = (plus - minus) / (2 * h);
            const double a = analytic[p][i];
            const double diff = std::abs(a - numeric);
            const double scale = std::max(std::abs(a), std::abs(numeric));
            group.max_abs_error = std::max(group.max_abs_error, diff);
            const double rel = scale < options.floor ? diff : diff / scale;
            group.max_rel_error = std::max(group.max_rel_error, rel);
        }
        report.groups.push_back(group);
    }
    return report;
}

GradCheckReport grad_check_model(const Model<double>& model, ModelParams<double>& params,
                                 std::span<const Triple> batch, Rng& rng, const GradCheckOptions& options) {
    NamedParams named;
    params.visit([&](const std::string& name, Tensor<double>& t) { named.emplace_back(name, &t); });
    auto loss = [&](Tape<double>& tape) {
        return model.total_loss(tape, params, batch, ops::Mode::train, rng).total;
    };
    return grad_check(loss, named, options);
}

std::string format_grad_check(const GradCheckReport& report) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "loss %.12g\n%-24s %8s %14s %14s\n", report.loss, "group", "coords",
                  "max_rel_err", "max_abs_err");
    out << buf;
    for (const auto& g : report.groups) {
        std::snprintf(buf, sizeof buf, "%-24s %8zu %14.6e %14.6e\n", g.name.c_str(), g.coordinates,
                      g.max_rel_error, g.max_abs_error);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "max relative error %.6e\n", report.max_rel_error());
    out << buf;
    return out.str();
}

}  // namespace mygo
