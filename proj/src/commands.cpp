#include "mygo/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mygo/errors.hpp"

namespace mygo {

namespace fs = std::filesystem;

#ifndef MYGO_VERSION
#define MYGO_VERSION "0.0.0"
#endif

const char* tool_version() { return MYGO_VERSION; }

std::string file_checksum(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
    return hex;
}

LoadedData load_data(const RunConfig& config) {
    if (config.data.empty()) throw ConfigError("no data directory given (set data = <dir> or --data)");
    LoadedData out;
    out.graph = load_graph(config.data);
    out.graph.validate();
    for (const char* name : {"entities.tsv", "relations.tsv", "train.tsv", "valid.tsv", "test.tsv"})
        out.files.push_back(config.data / name);

    out.inputs.visual = load_catalog(config.visual_catalog_path());
    out.inputs.textual = load_catalog(config.textual_catalog_path());
    if (out.inputs.visual.modality != Modality::visual)
        throw DataError(config.visual_catalog_path().string() + ": not a visual catalog");
    if (out.inputs.textual.modality != Modality::textual)
        throw DataError(config.textual_catalog_path().string() + ": not a textual catalog");
    out.files.push_back(config.visual_catalog_path());
    out.files.push_back(config.textual_catalog_path());

    const ModelConfig& mc = config.train.model;
    if (config.explicit_keys.count("refined_cache")) {
        out.inputs.tokens = load_refined_cache(config.refined_cache_path(), out.graph, out.inputs.visual,
                                               out.inputs.textual);
        if (out.inputs.tokens.m() != mc.m || out.inputs.tokens.n() != mc.n)
            throw ConfigError("refined cache holds m=" + std::to_string(out.inputs.tokens.m()) +
                              ", n=" + std::to_string(out.inputs.tokens.n()) + " but the config asks for m=" +
                              std::to_string(mc.m) + ", n=" + std::to_string(mc.n));
        out.files.push_back(config.refined_cache_path());
        return out;
    }
    const auto visual = load_token_stream(config.visual_tokens_path(), out.graph, out.inputs.visual);
    const auto textual = load_token_stream(config.textual_tokens_path(), out.graph, out.inputs.textual);
    out.files.push_back(config.visual_tokens_path());
    out.files.push_back(config.textual_tokens_path());
    StopwordSet stopwords;
    if (fs::exists(config.stopwords_path())) {
        stopwords = load_stopwords(config.stopwords_path());
        out.files.push_back(config.stopwords_path());
    } else if (config.explicit_keys.count("stopwords")) {
        throw DataError("stop-word file not found: " + config.stopwords_path().string());
    }
    const RefineMode mode = mc.ablation.no_refine ? RefineMode::first_arrival : RefineMode::frequency;
    out.inputs.tokens = refine_tokens(visual, textual, stopwords, mc.m, mc.n, out.inputs.visual.padding_id(),
                                      out.inputs.textual.padding_id(), mode);
    return out;
}

void write_provenance(const RunConfig& config, const std::string& command, const std::vector<fs::path>& files) {
    fs::create_directories(config.out);
    {
        std::ofstream echo(config.out / "config.txt", std::ios::binary);
        if (!echo) throw DataError("cannot write " + (config.out / "config.txt").string());
        echo << config.to_text();
    }
    std::ofstream out(config.out / "provenance.txt", std::ios::binary);
    if (!out) throw DataError("cannot write " + (config.out / "provenance.txt").string());
    out << "tool\tmygo " << tool_version() << '\n' << "command\t" << command << '\n';
    for (const fs::path& f : files) out << "checksum\t" << f.string() << '\t' << file_checksum(f) << '\n';
}

PrepareResult cmd_prepare(const RunConfig& config) {
    RunConfig raw = config;
    raw.finalize();
    raw.explicit_keys.erase("refined_cache");
    LoadedData data = load_data(raw);
    fs::create_directories(config.out);
    PrepareResult result;
    result.cache = config.out / "refined.tsv";
    save_refined_cache(data.inputs.tokens, data.graph, result.cache);
    result.visual = token_stats(data.inputs.tokens.visual, data.inputs.visual);
    result.textual = token_stats(data.inputs.tokens.textual, data.inputs.textual);
    std::ofstream stats(config.out / "prepare_stats.tsv", std::ios::binary);
    stats << "modality\tslots\tcoverage\tcatalog_usage\n";
    char buf[128];
    for (auto [name, slots, s] : {std::tuple{"visual", data.inputs.tokens.m(), result.visual},
                                  std::tuple{"textual", data.inputs.tokens.n(), result.textual}}) {
        std::snprintf(buf, sizeof buf, "%s\t%zu\t%.6f\t%.6f\n", name, slots, s.coverage, s.catalog_usage);
        stats << buf;
        std::cout << buf;
    }
    write_provenance(config, "prepare", data.files);
    return result;
}

namespace {

TrainResult run_training(const RunConfig& config, Trainer& trainer) {
    fs::create_directories(config.out);
    const std::string echo = config.to_text();
    trainer.run([&](const Trainer& t) {
        const StepLog& last = t.log().back();
        if (t.epoch() == 1 || t.epoch() % 50 == 0 || t.epoch() == t.config().epochs)
            std::fprintf(stderr, "epoch %zu  L_kgc %.6f  L_con %.6f  total %.6f\n", t.epoch(), last.kgc,
                         last.con, last.total);
        if (!t.validation().empty() && t.validation().back().epoch == t.epoch())
            std::fprintf(stderr, "epoch %zu  valid filtered MRR %.4f\n", t.epoch(),
                         t.validation().back().report.both_filtered().mrr);
    });
    TrainResult result;
    result.log = trainer.log();
    result.last_checkpoint = config.out / "last.ckpt";
    const Checkpoint last = trainer.checkpoint(echo);
    save_checkpoint(last, result.last_checkpoint);
    if (trainer.best_params()) {
        Checkpoint best = last;
        best.params = export_params(*trainer.best_params());
        result.best_checkpoint = config.out / "best.ckpt";
        save_checkpoint(best, *result.best_checkpoint);
    }
    write_train_log(trainer.log(), config.out / "train_log.tsv");
    return result;
}

std::span<const Triple> split_of(const KnowledgeGraph& graph, const std::string& split) {
    if (split == "train") return graph.train;
    if (split == "valid") return graph.valid;
    if (split == "test") return graph.test;
    throw ConfigError("unknown split '" + split + "' (expected train, valid or test)");
}

void write_query_dump(std::span<const Triple> triples, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "query_id\thead\trelation\ttail\tdirection\tgold\n";
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const Triple& t = triples[i];
        for (int dir = 0; dir < 2; ++dir)
            out << 2 * i + dir << '\t' << t.head << '\t' << t.relation << '\t' << t.tail << '\t'
                << (dir == 0 ? "tail" : "head") << '\t' << (dir == 0 ? t.tail : t.head) << '\n';
    }
}

}  // namespace

TrainResult cmd_train(const RunConfig& config) {
    RunConfig run = config;
    run.finalize();
    LoadedData data = load_data(run);
    Trainer trainer(data.graph, data.inputs, run.train);
    write_provenance(run, "train", data.files);
    return run_training(run, trainer);
}

MetricsReport cmd_eval(const RunConfig& config, const fs::path& checkpoint_path, const std::string& split,
                       bool dump_scores) {
    const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
    RunConfig eval_config;
    eval_config.apply_text(checkpoint.config_echo, checkpoint_path.string() + " (config echo)");
    const std::pair<const char*, fs::path RunConfig::*> paths[] = {
        {"data", &RunConfig::data},
        {"visual_catalog", &RunConfig::visual_catalog},
        {"textual_catalog", &RunConfig::textual_catalog},
        {"visual_tokens", &RunConfig::visual_tokens},
        {"textual_tokens", &RunConfig::textual_tokens},
        {"stopwords", &RunConfig::stopwords},
        {"refined_cache", &RunConfig::refined_cache}};
    for (const auto& [key, member] : paths) {
        if (!config.explicit_keys.count(key)) continue;
        eval_config.*member = config.*member;
        eval_config.explicit_keys.insert(key);
    }
    eval_config.out = config.out;
    eval_config.train.workers = config.train.workers;
    eval_config.finalize();

    LoadedData data = load_data(eval_config);
    const std::span<const Triple> triples = split_of(data.graph, split);
    Model<float> model(eval_config.train.model, data.inputs, data.graph.entity_count(),
                       data.graph.relation_count());
    ModelParams<float> params = model.shaped_params();
    import_params(checkpoint.params, params);

    fs::create_directories(config.out);
    EvalOptions options;
    options.workers = eval_config.train.workers;
    std::ofstream scores;
    char buf[96];
    if (dump_scores) {
        const fs::path path = config.out / ("scores_" + split + ".tsv");
        scores.open(path, std::ios::binary);
        if (!scores) throw DataError("cannot write " + path.string());
        scores << "query_id\tcandidate\tscore\n";
        options.on_scores = [&](std::size_t query, std::span<const double> row) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                std::snprintf(buf, sizeof buf, "%zu\t%zu\t%.9g\n", query, c, row[c]);
                scores << buf;
            }
        };
        write_query_dump(triples, config.out / ("queries_" + split + ".tsv"));
    }
    const FilterIndex filter(data.graph);
    const MetricsReport report = evaluate(model, params, filter, triples, options);
    const std::string label = eval_config.ablation + "/" + split;
    write_metrics_tsv(report, label, config.out / ("metrics_" + split + ".tsv"));
    const std::string summary = format_summary(report, label);
    std::ofstream(config.out / ("summary_" + split + ".txt"), std::ios::binary) << summary;
    std::cout << summary;
    auto files = data.files;
    files.push_back(checkpoint_path);
    write_provenance(eval_config, "eval --split " + split, files);
    return report;
}

GradCheckSetup::GradCheckSetup() {
    model.dim = 8;
    model.heads = 2;
    model.dropout = 0.0;
    model.m = 2;
    model.n = 2;
    model.lambda = 0.5;
    model.tau = 0.5;
}

GradCheckSetup GradCheckSetup::from(const RunConfig& config) {
    GradCheckSetup setup;
    const ModelConfig& mc = config.train.model;
    const auto& keys = config.explicit_keys;
    if (keys.count("dim")) setup.model.dim = mc.dim;
    if (keys.count("heads")) setup.model.heads = mc.heads;
    if (keys.count("dropout")) setup.model.dropout = mc.dropout;
    if (keys.count("ff_multiplier")) setup.model.ff_multiplier = mc.ff_multiplier;
    if (keys.count("m")) setup.model.m = mc.m;
    if (keys.count("n")) setup.model.n = mc.n;
    if (keys.count("norm_eps")) setup.model.norm_eps = mc.norm_eps;
    if (keys.count("relation_from_cte")) setup.model.relation_from_cte = mc.relation_from_cte;
    if (keys.count("lambda")) setup.model.lambda = mc.lambda;
    if (keys.count("tau")) setup.model.tau = mc.tau;
    if (keys.count("ablation")) setup.model.ablation = combine_ablations(config.ablation);
    if (keys.count("seed")) setup.seed = config.train.seed;
    return setup;
}

GradCheckReport cmd_gradcheck(const GradCheckSetup& setup, const GradCheckOptions& options) {
    setup.model.validate();
    if (setup.model.dim > 16 || setup.entities > 8)
        throw ConfigError("gradcheck needs a tiny model (dim <= 16, at most 8 entities)");
    SyntheticSpec spec;
    spec.entities = setup.entities;
    spec.relations = setup.relations;
    spec.train = setup.triples;
    spec.visual_size = 6;
    spec.visual_dim = 4;
    spec.textual_size = 8;
    spec.textual_dim = 5;
    spec.max_visual_sources = 2;
    spec.max_textual_sources = 1;
    spec.max_tokens_per_source = 4;
    spec.stopwords = 1;
    spec.seed = setup.seed;
    const SyntheticDataset data = make_synthetic(spec);
    const RefineMode mode = setup.model.ablation.no_refine ? RefineMode::first_arrival : RefineMode::frequency;
    const EntityInputs inputs = data.inputs(setup.model.m, setup.model.n, mode);

    Rng rng(setup.seed);
    const ModelParams<float> init = init_params(setup.model, spec.entities, spec.relations, spec.visual_dim,
                                                spec.textual_dim, rng);
    ModelParams<double> params = init.cast<double>();
    params.visit([](const std::string&, Tensor<double>& t) { t.set_requires_grad(true); });
    Model<double> model(setup.model, inputs, spec.entities, spec.relations);
    return grad_check_model(model, params, data.graph.train, rng, options);
}

MetricsReport cmd_ablate(const RunConfig& config, const std::string& name) {
    if (name != "full") ablation_from_name(name);
    RunConfig run = config;
    run.ablation = name;
    run.explicit_keys.insert("ablation");
    run.finalize();
    LoadedData data = load_data(run);
    Trainer trainer(data.graph, data.inputs, run.train);
    write_provenance(run, "ablate --name " + name, data.files);
    run_training(run, trainer);

    const FilterIndex filter(data.graph);
    EvalOptions options;
    options.workers = run.train.workers;
    MetricsReport train_report;
    for (const std::string split : {"train", "valid", "test"}) {
        const auto triples = split_of(data.graph, split);
        if (triples.empty()) continue;
        const MetricsReport report = evaluate(trainer.model(), trainer.params(), filter, triples, options);
        const std::string label = name + "/" + split;
        write_metrics_tsv(report, label, run.out / ("metrics_" + split + ".tsv"));
        std::cout << format_summary(report, label);
        if (split == "train") train_report = report;
    }
    return train_report;
}

void cmd_synth(const SyntheticSpec& spec, const fs::path& dir) {
    write_dataset(make_synthetic(spec), dir);
}

}  // namespace mygo
