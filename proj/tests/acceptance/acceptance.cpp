// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "mygo/binary_io.hpp"
#include "mygo/commands.hpp"
#include "mygo/evaluator.hpp"
#include "mygo/ops.hpp"
#include "support.hpp"

using namespace mygo;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            if (pass) detail = "first failure: " + what;
            pass = false;
        }
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

std::vector<EntityId> all_ids(std::size_t n) {
    std::vector<EntityId> ids(n);
    std::iota(ids.begin(), ids.end(), EntityId{0});
    return ids;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Tie-averaged rank of `gold` after dropping `removed` (except gold),
// found by sorting and scanning the block of equal scores.
double sort_and_scan_rank(const std::vector<double>& scores, std::size_t gold, const std::vector<EntityId>& removed) {
    std::vector<std::size_t> kept;
    for (std::size_t c = 0; c < scores.size(); ++c)
        if (c == gold || std::find(removed.begin(), removed.end(), c) == removed.end()) kept.push_back(c);
    std::stable_sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t first = kept.size(), last = 0;
    for (std::size_t pos = 0; pos < kept.size(); ++pos)
        if (scores[kept[pos]] == scores[gold]) {
            first = std::min(first, pos);
            last = pos;
        }
    return (static_cast<double>(first + 1) + static_cast<double>(last + 1)) / 2.0;
}

Outcome gradient_correctness() {
    Outcome o;
    const auto start = Clock::now();
    GradCheckSetup setup;
    const GradCheckReport report = cmd_gradcheck(setup);
    const double elapsed = seconds_since(start);
    std::size_t groups = 0;
    bool core = false, cte = false, cmee = false, tokens = false;
    for (const auto& g : report.groups) {
        ++groups;
        o.require(g.max_rel_error < 1e-4, g.name + fmt(" rel err %.3g", g.max_rel_error));
        core = core || g.name == "tucker.core";
        cte = cte || g.name.starts_with("cte.");
        cmee = cmee || g.name.starts_with("cmee.");
        tokens = tokens || g.name.find("token") != std::string::npos;
    }
    o.require(core && cte && cmee && tokens, "parameter groups missing from the report");
    o.require(elapsed < 60, fmt("runtime %.1f s", elapsed));
    if (o.pass)
        o.detail = fmt("%.0f groups, max rel err %.3g, %.2f s", static_cast<double>(groups), report.max_rel_error(),
                       elapsed);
    return o;
}

Outcome permutation_invariance() {
    Outcome o;
    double worst = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        auto cfg = testing::tiny_model_config();
        cfg.m = 4;
        cfg.n = 4;
        testing::TinyModel tiny(1000 + trial, cfg);
        EntityInputs permuted = tiny.inputs;
        Rng shuffle(trial);
        const std::size_t entities = tiny.data.graph.entity_count();
        for (EntityId e = 0; e < entities; ++e)
            for (auto* mod : {&permuted.tokens.visual, &permuted.tokens.textual}) {
                std::vector<TokenId> ids(mod->of(e).begin(), mod->of(e).end());
                shuffle.shuffle(ids);
                std::copy(ids.begin(), ids.end(), mod->ids.begin() + e * mod->length);
            }
        Model<double> a(cfg, tiny.inputs, entities, 2), b(cfg, permuted, entities, 2);
        const auto params = tiny.params<double>(trial);
        const auto all = all_ids(entities);
        auto views_of = [&](const Model<double>& m) {
            Tape<double> tape(false);
            Rng rng;
            const auto pass1 = m.encode_entities(tape, params, all, ops::Mode::eval, rng);
            const auto v = m.fgcl_views(tape, params, pass1, all, ops::Mode::eval, rng);
            std::vector<Tensor<double>> out = {tape.value(v.anchor)};
            for (Var r : v.rows) out.push_back(tape.value(r));
            return out;
        };
        const auto va = views_of(a), vb = views_of(b);
        o.require(va.size() == 5, "expected e plus four views");
        for (std::size_t k = 0; k < va.size(); ++k)
            for (std::size_t i = 0; i < va[k].size(); ++i) worst = std::max(worst, std::abs(va[k][i] - vb[k][i]));
    }
    o.require(worst < 1e-6, fmt("max inf-norm change %.3g", worst));
    if (o.pass) o.detail = fmt("100 cases, max inf-norm change %.3g", worst);
    return o;
}

Outcome loss_oracles() {
    Outcome o;
    {
        const auto cfg = testing::tiny_model_config();
        testing::TinyModel tiny(6, cfg);
        Model<double> model(cfg, tiny.inputs, 6, 2);
        auto params = tiny.params<double>(7);
        std::fill(params.core.data().begin(), params.core.data().end(), 0.0);
        Tape<double> tape(false);
        Rng rng;
        const auto enc = model.encode_entities(tape, params, all_ids(6), ops::Mode::eval, rng);
        const double both =
            tape.value(model.kgc_loss(tape, params, tiny.data.graph.train, enc.embeddings, ops::Mode::eval, rng))[0];
        o.require(std::abs(both / 2 - std::log(6.0)) < 1e-6, fmt("uniform kgc per direction %.9g", both / 2));
    }
    {
        Tape<double> tape(false);
        const Var logits = tape.constant(Tensor<double>({1, 2}, {std::log(3.0), 0.0}));
        const std::size_t gold[] = {0};
        const double ce = tape.value(ops::cross_entropy(tape, logits, gold))[0];
        o.require(std::abs(ce - std::log(4.0 / 3.0)) < 1e-6, fmt("two-candidate CE %.9g", ce));
    }
    {
        Tape<double> tape(false);
        const Var a = tape.constant(Tensor<double>({1, 3}, {0.3, -1.0, 2.0}));
        const Var v = tape.constant(Tensor<double>({1, 3}, {-4.0, 0.5, 0.1}));
        const Var views[] = {v, a};
        const double con = tape.value(contrastive_loss(tape, a, std::span<const Var>(views), 0.5))[0];
        o.require(con == 0.0, fmt("B=1 contrastive %.9g", con));
    }
    {
        Tape<double> tape(false);
        const Var a = tape.constant(Tensor<double>({2, 2}, {2.0, 0.0, 0.0, 0.5}));
        const Var v = tape.constant(Tensor<double>({2, 2}, {3.0, 0.0, 0.0, 7.0}));
        const Var views[] = {v};
        const double con = tape.value(contrastive_loss(tape, a, std::span<const Var>(views), 1.0))[0];
        o.require(std::abs(con - 0.626523) < 1e-5, fmt("B=2 orthogonal contrastive %.9g", con));
    }
    {
        const auto cfg = testing::tiny_model_config();
        testing::TinyModel tiny(4, cfg);
        Model<float> model(cfg, tiny.inputs, 6, 2);
        const auto params = tiny.params<float>(5);
        Tape<float> tape;
        Rng rng(9);
        const auto pass1 = model.encode_entities(tape, params, all_ids(6), ops::Mode::train, rng);
        const EntityId batch[] = {1, 3, 5};
        const auto views = model.fgcl_views(tape, params, pass1, batch, ops::Mode::train, rng);
        o.require(views.kinds.front() == Model<float>::View::e_sec && tape.value(views.anchor) == tape.value(views.rows.front()),
                  "dropout-off e_sec differs from e");
    }
    if (o.pass) o.detail = "uniform kgc, ln(4/3), B=1 zero, e_sec bitwise, 0.626523";
    return o;
}

Outcome ranking_oracle() {
    Outcome o;
    std::mt19937_64 gen(77);
    std::size_t queries = 0;
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
        const std::size_t entities = 2 + gen() % 29;
        const std::size_t relations = 1 + gen() % 3;
        auto cfg = testing::tiny_model_config();
        cfg.dim = 4;
        cfg.m = 2;
        cfg.n = 2;
        testing::TinyModel tiny(500 + trial, cfg, entities, relations);
        auto& g = tiny.data.graph;
        std::vector<Triple> all;
        for (EntityId h = 0; h < entities; ++h)
            for (RelationId r = 0; r < relations; ++r)
                for (EntityId t = 0; t < entities; ++t) all.push_back({h, r, t});
        std::shuffle(all.begin(), all.end(), gen);
        const std::size_t take = std::min<std::size_t>(all.size(), 4 + gen() % 20);
        g.train.assign(all.begin(), all.begin() + take / 2);
        g.valid.assign(all.begin() + take / 2, all.begin() + 3 * take / 4);
        g.test.assign(all.begin() + 3 * take / 4, all.begin() + take);
        if (g.test.empty()) g.test.push_back(all[take]);
        auto params = tiny.params<float>(trial);
        if (trial % 5 == 0) std::fill(params.core.data().begin(), params.core.data().end(), 0.0f);  // all ties
        Model<float> model(cfg, tiny.inputs, entities, relations);
        const FilterIndex filter(g);
        std::vector<std::vector<double>> dumped(2 * g.test.size());
        EvalOptions options;
        options.chunk = 1 + gen() % 4;
        options.on_scores = [&](std::size_t q, std::span<const double> s) { dumped[q].assign(s.begin(), s.end()); };
        const MetricsReport report = evaluate(model, params, filter, g.test, options);

        double f_mrr = 0, r_mrr = 0, f_h1 = 0, f_h3 = 0, f_h10 = 0, r_h10 = 0;
        for (std::size_t q = 0; q < dumped.size(); ++q) {
            const Triple& t = g.test[q / 2];
            const bool tail = q % 2 == 0;
            const EntityId gold = tail ? t.tail : t.head;
            std::vector<EntityId> known;
            for (const auto* split : {&g.train, &g.valid, &g.test})
                for (const Triple& x : *split)
                    if (x.relation == t.relation && (tail ? x.head == t.head : x.tail == t.tail))
                        known.push_back(tail ? x.tail : x.head);
            const double fr = sort_and_scan_rank(dumped[q], gold, known);
            const double rr = sort_and_scan_rank(dumped[q], gold, {});
            const QueryResult direct = rank_query(dumped[q], gold, known);
            o.require(direct.filtered_rank == fr && direct.raw_rank == rr, "rank_query disagrees with sort-and-scan");
            o.require(fr <= rr, "filtered rank above raw rank");
            f_mrr += 1 / fr;
            r_mrr += 1 / rr;
            f_h1 += fr <= 1;
            f_h3 += fr <= 3;
            f_h10 += fr <= 10;
            r_h10 += rr <= 10;
            ++queries;
        }
        const double n = static_cast<double>(dumped.size());
        auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
        o.require(close(report.both_filtered().mrr, f_mrr / n) && close(report.both_raw().mrr, r_mrr / n) &&
                      close(report.both_filtered().hits1, f_h1 / n) && close(report.both_filtered().hits3, f_h3 / n) &&
                      close(report.both_filtered().hits10, f_h10 / n) && close(report.both_raw().hits10, r_h10 / n),
                  "evaluate metrics disagree with the brute-force pipeline (trial " + std::to_string(trial) + ")");
    }
    if (o.pass) o.detail = fmt("50 instances, %.0f queries", static_cast<double>(queries));
    return o;
}

std::vector<TokenId> brute_refine(const std::vector<std::vector<TokenId>>& sources, const StopwordSet* stop,
                                  std::size_t length, TokenId pad) {
    std::map<TokenId, std::size_t> count;
    for (const auto& s : sources)
        for (TokenId id : s)
            if (!stop || !stop->count(id)) ++count[id];
    std::vector<std::pair<TokenId, std::size_t>> ranked(count.begin(), count.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<TokenId> out;
    for (std::size_t i = 0; i < ranked.size() && out.size() < length; ++i) out.push_back(ranked[i].first);
    out.resize(length, pad);
    return out;
}

Outcome refinement_oracle() {
    Outcome o;
    std::mt19937_64 gen(2024);
    std::size_t all_padding = 0, with_stopwords = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t entities = 1 + gen() % 6;
        const TokenId vocab = 3 + static_cast<TokenId>(gen() % 20);
        const std::size_t m = 1 + gen() % 6, n = 1 + gen() % 6;
        RawTokenStream visual, textual;
        for (auto* s : {&visual, &textual}) {
            s->sources.resize(entities);
            for (auto& e : s->sources) {
                e.resize(gen() % 4);  // zero sources leaves the entity all padding
                for (auto& src : e) {
                    src.resize(gen() % 10);
                    for (TokenId& id : src) id = static_cast<TokenId>(gen() % vocab);
                }
            }
        }
        StopwordSet stop;
        for (TokenId id = 0; id < vocab; ++id)
            if (gen() % 4 == 0) stop.insert(id);
        if (trial % 10 == 0)
            for (TokenId id = 0; id < vocab; ++id) stop.insert(id);  // every textual token is a stop word
        const RefinedTokenSet got = refine_tokens(visual, textual, stop, m, n, vocab, vocab);
        for (EntityId e = 0; e < entities; ++e) {
            const auto ev = brute_refine(visual.sources[e], nullptr, m, vocab);
            const auto et = brute_refine(textual.sources[e], &stop, n, vocab);
            const auto [gv, gt] = sequence_for_entity(got, e);
            o.require(std::equal(ev.begin(), ev.end(), gv.begin(), gv.end()),
                      "visual refinement differs (trial " + std::to_string(trial) + ")");
            o.require(std::equal(et.begin(), et.end(), gt.begin(), gt.end()),
                      "textual refinement differs (trial " + std::to_string(trial) + ")");
            all_padding += std::all_of(et.begin(), et.end(), [&](TokenId id) { return id == vocab; });
        }
        with_stopwords += !stop.empty();
    }
    o.require(all_padding > 0 && with_stopwords > 0, "random streams missed the padding or stop-word cases");
    if (o.pass)
        o.detail = fmt("200 streams, %.0f all-padding rows, %.0f with stop words", static_cast<double>(all_padding),
                       static_cast<double>(with_stopwords));
    return o;
}

double train_mrr(const SyntheticDataset& data, const TrainConfig& cfg, std::vector<StepLog>* log = nullptr) {
    const auto inputs = data.inputs(cfg.model.m, cfg.model.n,
                                    cfg.model.ablation.no_refine ? RefineMode::first_arrival : RefineMode::frequency);
    const Trainer t = train(data.graph, inputs, cfg);
    if (log) *log = t.log();
    const FilterIndex filter(data.graph);
    return evaluate(t.model(), t.params(), filter, data.graph.train).both_filtered().mrr;
}

Outcome overfit_smoke() {
    Outcome o;
    const auto start = Clock::now();
    const auto data = make_synthetic(testing::smoke_spec(1));
    const double mrr = train_mrr(data, testing::smoke_config(1));
    const double elapsed = seconds_since(start);
    o.require(mrr >= 0.95, fmt("train filtered MRR %.4f", mrr));
    o.require(elapsed < 120, fmt("runtime %.1f s", elapsed));
    if (o.pass) o.detail = fmt("train filtered MRR %.4f in %.1f s", mrr, elapsed);
    return o;
}

Outcome ablation_sanity() {
    Outcome o;
    int at_least = 0, strictly = 0;
    std::string per_seed;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto data = make_synthetic(testing::smoke_spec(seed));
        const auto full_cfg = testing::smoke_config(seed);
        auto plain_cfg = full_cfg;
        plain_cfg.model.ablation.no_cmee = true;
        const double full = train_mrr(data, full_cfg);
        const double plain = train_mrr(data, plain_cfg);
        at_least += full >= plain;
        strictly += full > plain;
        per_seed += fmt(" %.3f/%.3f", full, plain);
    }
    o.require(at_least >= 7, fmt("full >= no_cmee in %.0f/10 seeds;", at_least) + per_seed);
    const auto data = make_synthetic(testing::smoke_spec(0));
    auto no_con = testing::smoke_config(0);
    no_con.model.ablation.no_con = true;
    std::vector<StepLog> log;
    train_mrr(data, no_con, &log);
    bool zero = !log.empty();
    for (const auto& s : log) zero = zero && s.con == 0.0;
    o.require(zero, "no_con logged a non-zero L_con");
    if (o.pass)
        o.detail = fmt("full >= no_cmee in %.0f/10 seeds (strictly better in %.0f), no_con L_con = 0 over %.0f steps",
                       at_least, strictly, static_cast<double>(log.size())) +
                   "; MRR full/no_cmee:" + per_seed;
    return o;
}

Outcome reproducibility() {
    Outcome o;
    const auto dir = testing::temp_dir("acceptance_repro");
    const auto data = make_synthetic(testing::smoke_spec(5));
    auto cfg = testing::smoke_config(5, 20);
    cfg.model.dropout = 0.2;
    cfg.batch_size = 16;
    const auto inputs = data.inputs(cfg.model.m, cfg.model.n);
    const std::string echo = "seed = 5\n";
    for (const char* name : {"a.ckpt", "b.ckpt"}) {
        const Trainer t = train(data.graph, inputs, cfg);
        save_checkpoint(t.checkpoint(echo), dir / name);
    }
    o.require(file_bytes(dir / "a.ckpt") == file_bytes(dir / "b.ckpt"), "two identical runs wrote different checkpoints");
    save_checkpoint(load_checkpoint(dir / "a.ckpt"), dir / "c.ckpt");
    o.require(file_bytes(dir / "a.ckpt") == file_bytes(dir / "c.ckpt"), "load/save round trip changed the bytes");
    Trainer resumed(data.graph, inputs, cfg);
    resumed.restore(load_checkpoint(dir / "a.ckpt"));
    save_checkpoint(resumed.checkpoint(echo), dir / "d.ckpt");
    o.require(file_bytes(dir / "a.ckpt") == file_bytes(dir / "d.ckpt"), "restore/checkpoint round trip changed the bytes");
    if (o.pass) o.detail = fmt("%.0f-byte checkpoints identical across runs and round trips",
                               static_cast<double>(file_bytes(dir / "a.ckpt").size()));
    return o;
}

}  // namespace

int main() {
    const std::pair<const char*, Outcome (*)()> criteria[] = {
        {"gradient correctness", gradient_correctness},
        {"permutation invariance", permutation_invariance},
        {"loss oracles", loss_oracles},
        {"ranking/metrics oracle", ranking_oracle},
        {"refinement oracle", refinement_oracle},
        {"overfit smoke", overfit_smoke},
        {"ablation sanity", ablation_sanity},
        {"reproducibility", reproducibility},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += !o.pass;
        std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
    return failed == 0 ? 0 : 1;
}
