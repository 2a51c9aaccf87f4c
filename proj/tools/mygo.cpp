// mygo: prepare | train | eval | gradcheck | ablate | synth

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mygo/commands.hpp"
#include "mygo/errors.hpp"
#include "mygo/ops.hpp"

namespace {

enum Exit { ok = 0, other = 1, config_error = 2, data_error = 3, numeric_error = 4 };

struct SharedFlags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::string data;
    std::vector<std::string> sets;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config, "flat key = value config file");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--seed", seed, "master RNG seed");
        cmd->add_option("--workers", workers, "evaluation worker threads");
        cmd->add_option("--data", data, "dataset directory");
        cmd->add_option("--set", sets, "override one config key (key=value), repeatable");
    }

    // File first, then --set, then the dedicated flags.
    mygo::RunConfig build() const {
        mygo::RunConfig cfg = config.empty() ? mygo::RunConfig{} : mygo::load_run_config(config);
        for (const std::string& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw mygo::ConfigError("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (!out.empty()) cfg.set("out", out);
        if (seed) cfg.set("seed", std::to_string(*seed));
        if (workers) cfg.set("workers", std::to_string(*workers));
        if (!data.empty()) cfg.set("data", data);
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-modal knowledge graph completion with modality tokens"};
    app.set_version_flag("--version", std::string("mygo ") + mygo::tool_version());
    app.require_subcommand(1);

    SharedFlags flags;

    auto* prepare = app.add_subcommand("prepare", "refine raw token streams into the cache TSV");
    flags.attach(prepare);

    auto* train = app.add_subcommand("train", "train and write last/best checkpoints plus the log");
    flags.attach(train);

    auto* eval = app.add_subcommand("eval", "filtered link-prediction metrics for a checkpoint");
    flags.attach(eval);
    std::string checkpoint, split = "test";
    bool dump_scores = false;
    eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    eval->add_option("--split", split, "train, valid or test")->check(CLI::IsMember({"train", "valid", "test"}));
    eval->add_flag("--dump-scores", dump_scores, "write per-query raw scores");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
    flags.attach(gradcheck);
    double step = 1e-4, tolerance = 1e-4;
    std::string fault;
    gradcheck->add_option("--step", step, "central-difference step");
    gradcheck->add_option("--tolerance", tolerance, "max relative error allowed");
    gradcheck->add_option("--inject-fault", fault)->group("");

    auto* ablate = app.add_subcommand("ablate", "train + eval with one component disabled");
    flags.attach(ablate);
    std::string name;
    ablate->add_option("--name", name, "ablation name")->required();

    auto* synth = app.add_subcommand("synth", "write a random multi-modal dataset");
    mygo::SyntheticSpec spec;
    std::string synth_out;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--entities", spec.entities);
    synth->add_option("--relations", spec.relations);
    synth->add_option("--train", spec.train);
    synth->add_option("--valid", spec.valid);
    synth->add_option("--test", spec.test);
    synth->add_option("--seed", spec.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : config_error;
    }

    try {
        if (*synth) {
            mygo::cmd_synth(spec, synth_out);
            std::printf("wrote %s\n", synth_out.c_str());
            return ok;
        }
        mygo::RunConfig cfg = flags.build();
        if (*prepare) {
            mygo::cmd_prepare(cfg);
        } else if (*train) {
            const auto result = mygo::cmd_train(cfg);
            std::printf("wrote %s\n", result.last_checkpoint.string().c_str());
            if (result.best_checkpoint) std::printf("wrote %s\n", result.best_checkpoint->string().c_str());
        } else if (*eval) {
            mygo::cmd_eval(cfg, checkpoint, split, dump_scores);
        } else if (*gradcheck) {
            if (fault == "tucker_core_grad") mygo::ops::inject_fault(mygo::ops::Fault::tucker_core_grad);
            else if (!fault.empty()) throw mygo::ConfigError("unknown fault '" + fault + "'");
            cfg.finalize();
            const auto setup = mygo::GradCheckSetup::from(cfg);
            mygo::GradCheckOptions options;
            options.step = step;
            const auto report = mygo::cmd_gradcheck(setup, options);
            const std::string text = mygo::format_grad_check(report);
            std::cout << text;
            mygo::write_provenance(cfg, "gradcheck", {});
            std::ofstream(cfg.out / "gradcheck.txt", std::ios::binary) << text;
            if (!report.passed(tolerance)) {
                std::fprintf(stderr, "gradcheck FAILED: max relative error %.3e >= %.1e\n",
                             report.max_rel_error(), tolerance);
                return numeric_error;
            }
            std::printf("gradcheck passed (< %.1e)\n", tolerance);
        } else if (*ablate) {
            mygo::cmd_ablate(cfg, name);
        }
        return ok;
    } catch (const mygo::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return config_error;
    } catch (const mygo::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return data_error;
    } catch (const mygo::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return numeric_error;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return other;
    }
}
