#include "mygo/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mygo/errors.hpp"

namespace mygo {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const char* first = value.data();
    const char* last = first + value.size();
    if (!value.empty() && value[0] == '-' && std::is_unsigned_v<T>)
        throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) throw ConfigError(key + ": cannot parse '" + value + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "dim",         "heads",          "dropout",         "ff_multiplier", "m",
        "n",           "norm_eps",       "relation_from_cte", "lambda",      "tau",
        "ablation",    "lr",             "batch_size",      "epochs",        "seed",
        "eval_every",  "workers",        "beta1",           "beta2",         "adam_eps",
        "data",        "visual_catalog", "textual_catalog", "visual_tokens", "textual_tokens",
        "stopwords",   "refined_cache",  "out"};
    return keys;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
    const std::string value = trim(raw);
    ModelConfig& mc = train.model;
    if (key == "dim") mc.dim = parse_number<std::size_t>(key, value);
    else if (key == "heads") mc.heads = parse_number<std::size_t>(key, value);
    else if (key == "dropout") mc.dropout = parse_number<double>(key, value);
    else if (key == "ff_multiplier") mc.ff_multiplier = parse_number<std::size_t>(key, value);
    else if (key == "m") mc.m = parse_number<std::size_t>(key, value);
    else if (key == "n") mc.n = parse_number<std::size_t>(key, value);
    else if (key == "norm_eps") mc.norm_eps = parse_number<double>(key, value);
    else if (key == "relation_from_cte") mc.relation_from_cte = parse_bool(key, value);
    else if (key == "lambda") mc.lambda = parse_number<double>(key, value);
    else if (key == "tau") mc.tau = parse_number<double>(key, value);
    else if (key == "ablation") ablation = value.empty() ? "full" : value;
    else if (key == "lr") train.learning_rate = parse_number<double>(key, value);
    else if (key == "batch_size") train.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "epochs") train.epochs = parse_number<std::size_t>(key, value);
    else if (key == "seed") train.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "eval_every") train.eval_every = parse_number<std::size_t>(key, value);
    else if (key == "workers") train.workers = parse_number<std::size_t>(key, value);
    else if (key == "beta1") train.beta1 = parse_number<double>(key, value);
    else if (key == "beta2") train.beta2 = parse_number<double>(key, value);
    else if (key == "adam_eps") train.adam_eps = parse_number<double>(key, value);
    else if (key == "data") data = value;
    else if (key == "visual_catalog") visual_catalog = value;
    else if (key == "textual_catalog") textual_catalog = value;
    else if (key == "visual_tokens") visual_tokens = value;
    else if (key == "textual_tokens") textual_tokens = value;
    else if (key == "stopwords") stopwords = value;
    else if (key == "refined_cache") refined_cache = value;
    else if (key == "out") out = value;
    else throw ConfigError("unknown config key '" + key + "'");
    explicit_keys.insert(key);
}

void RunConfig::apply_text(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
        try {
            set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

namespace {
fs::path or_default(const fs::path& explicit_path, const fs::path& data, const char* name) {
    return explicit_path.empty() ? data / name : explicit_path;
}
}  // namespace

fs::path RunConfig::visual_catalog_path() const { return or_default(visual_catalog, data, "visual.cat"); }
fs::path RunConfig::textual_catalog_path() const { return or_default(textual_catalog, data, "textual.cat"); }
fs::path RunConfig::visual_tokens_path() const { return or_default(visual_tokens, data, "visual_tokens.tsv"); }
fs::path RunConfig::textual_tokens_path() const {
    return or_default(textual_tokens, data, "textual_tokens.tsv");
}
fs::path RunConfig::stopwords_path() const { return or_default(stopwords, data, "stopwords.txt"); }
fs::path RunConfig::refined_cache_path() const { return or_default(refined_cache, data, "refined.tsv"); }

std::string RunConfig::to_text() const {
    const ModelConfig& mc = train.model;
    std::ostringstream o;
    o << "dim = " << mc.dim << '\n'
      << "heads = " << mc.heads << '\n'
      << "dropout = " << fmt_double(mc.dropout) << '\n'
      << "ff_multiplier = " << mc.ff_multiplier << '\n'
      << "m = " << mc.m << '\n'
      << "n = " << mc.n << '\n'
      << "norm_eps = " << fmt_double(mc.norm_eps) << '\n'
      << "relation_from_cte = " << (mc.relation_from_cte ? "true" : "false") << '\n'
      << "lambda = " << fmt_double(mc.lambda) << '\n'
      << "tau = " << fmt_double(mc.tau) << '\n'
      << "ablation = " << ablation << '\n'
      << "lr = " << fmt_double(train.learning_rate) << '\n'
      << "batch_size = " << train.batch_size << '\n'
      << "epochs = " << train.epochs << '\n'
      << "seed = " << train.seed << '\n'
      << "eval_every = " << train.eval_every << '\n'
      << "workers = " << train.workers << '\n'
      << "beta1 = " << fmt_double(train.beta1) << '\n'
      << "beta2 = " << fmt_double(train.beta2) << '\n'
      << "adam_eps = " << fmt_double(train.adam_eps) << '\n';
    // Unset paths are omitted so a re-read echo keeps the same defaults.
    const std::pair<const char*, const fs::path*> paths[] = {
        {"data", &data},
        {"visual_catalog", &visual_catalog},
        {"textual_catalog", &textual_catalog},
        {"visual_tokens", &visual_tokens},
        {"textual_tokens", &textual_tokens},
        {"stopwords", &stopwords},
        {"refined_cache", &refined_cache},
        {"out", &out}};
    for (const auto& [key, path] : paths)
        if (!path->empty()) o << key << " = " << path->string() << '\n';
    return o.str();
}

Ablation combine_ablations(const std::string& list) {
    Ablation combined;
    std::istringstream names(list);
    std::string name;
    while (std::getline(names, name, ',')) {
        const Ablation a = ablation_from_name(trim(name));
        combined.no_mt |= a.no_mt;
        combined.no_refine |= a.no_refine;
        combined.no_cmee |= a.no_cmee;
        combined.no_cte |= a.no_cte;
        combined.no_con |= a.no_con;
        combined.no_esec |= a.no_esec;
        combined.no_s |= a.no_s;
        combined.no_v |= a.no_v;
        combined.no_w |= a.no_w;
    }
    return combined;
}

void RunConfig::finalize() {
    train.model.ablation = combine_ablations(ablation);
    train.validate();
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    RunConfig config;
    config.apply_text(text.str(), path.string());
    return config;
}

}  // namespace mygo
