#include "depanom/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "depanom/errors.hpp"
#include "depanom/io_util.hpp"

namespace depanom {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

}  // namespace

TomlTable TomlTable::parse_string(const std::string& text, const std::string& origin) {
    TomlTable t;
    t.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::string prefix;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        const std::string ctx = origin + " line " + std::to_string(lineno);

        if (line.front() == '[') {
            bool array = line.size() > 1 && line[1] == '[';
            std::string expect_close = array ? "]]" : "]";
            if (line.size() < expect_close.size() + (array ? 2 : 1) ||
                line.compare(line.size() - expect_close.size(), expect_close.size(), expect_close) != 0)
                throw ConfigError(ctx + ": malformed table header");
            std::string name = trim(line.substr(array ? 2 : 1,
                                                line.size() - (array ? 4 : 2)));
            if (name.empty()) throw ConfigError(ctx + ": empty table name");
            if (array) {
                int idx = t.array_sizes_[name]++;
                prefix = name + "." + std::to_string(idx) + ".";
            } else {
                prefix = name + ".";
            }
            continue;
        }

        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(ctx + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) throw ConfigError(ctx + ": expected 'key = value'");
        if (value.front() == '"') {
            if (value.size() < 2 || value.back() != '"')
                throw ConfigError(ctx + ": unterminated string");
            value = value.substr(1, value.size() - 2);
        }
        t.values_[prefix + key] = value;
    }
    return t;
}

TomlTable TomlTable::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
}

bool TomlTable::has(const std::string& key) const { return values_.count(key) > 0; }

int TomlTable::array_size(const std::string& key) const {
    auto it = array_sizes_.find(key);
    return it == array_sizes_.end() ? 0 : it->second;
}

const std::string& TomlTable::raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(origin_ + ": missing required key '" + key + "'");
    return it->second;
}

std::string TomlTable::get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? values_.at(key) : fallback;
}

double TomlTable::get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    return parse_double_field(values_.at(key), origin_ + " key '" + key + "'");
}

std::int64_t TomlTable::get_int(const std::string& key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    return parse_int_field(values_.at(key), origin_ + " key '" + key + "'");
}

bool TomlTable::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& v = values_.at(key);
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(origin_ + " key '" + key + "': expected true or false");
}

std::string TomlTable::require_string(const std::string& key) const { return raw(key); }

double TomlTable::require_double(const std::string& key) const {
    return parse_double_field(raw(key), origin_ + " key '" + key + "'");
}

std::int64_t TomlTable::require_int(const std::string& key) const {
    return parse_int_field(raw(key), origin_ + " key '" + key + "'");
}

RunConfig RunConfig::from_table(const TomlTable& t) {
    RunConfig c;
    c.edges_path = t.get_string("paths.edges", "");
    c.metrics_path = t.get_string("paths.metrics", "");
    c.out_dir = t.get_string("paths.out_dir", "out");

    c.encoder.dims.d_in = static_cast<int>(t.get_int("model.d_in", 7));
    c.encoder.dims.d_hid = static_cast<int>(t.get_int("model.d_hid", 32));
    c.encoder.dims.d_emb = static_cast<int>(t.get_int("model.d_emb", 64));
    c.encoder.dims.layers = static_cast<int>(t.get_int("model.gcn_layers", 2));
    c.encoder.neighborhood_cap = static_cast<int>(t.get_int("model.neighborhood_cap", 10));
    c.encoder.activation = activation_from_name(t.get_string("model.activation", "relu"));

    c.objective.tau = t.get_double("objective.tau", 0.1);
    c.objective.lambda = t.get_double("objective.lambda", 0.1);
    c.objective.negatives_per_anchor = static_cast<int>(t.get_int("objective.negatives_per_anchor", 16));
    c.objective.positive_mode = positive_mode_from_name(t.get_string("objective.positive_mode", "augment"));
    c.objective.aug_feature_mask_prob = t.get_double("objective.aug_feature_mask_prob", 0.2);
    c.objective.aug_edge_drop_prob = t.get_double("objective.aug_edge_drop_prob", 0.2);

    c.train.epochs = static_cast<int>(t.get_int("train.epochs", 12));
    c.train.learning_rate = t.get_double("train.learning_rate", 1e-3);
    c.train.optimizer = optimizer_from_name(t.get_string("train.optimizer", "adam"));
    c.train.window_length = static_cast<int>(t.get_int("train.window_length", 8));
    c.train.window_stride = static_cast<int>(t.get_int("train.window_stride", 8));
    c.train.anchors_per_step = static_cast<int>(t.get_int("train.anchors_per_step", 64));
    c.train.grad_check = t.get_bool("train.grad_check", false);

    c.detect.k = static_cast<int>(t.get_int("detect.k", 10));
    c.detect.bank_capacity = static_cast<int>(t.get_int("detect.bank_capacity", 4096));

    c.split.train = t.get_double("split.train", 0.6);
    c.split.val = t.get_double("split.val", 0.2);
    c.split.test = t.get_double("split.test", 0.2);

    c.seed = static_cast<std::uint64_t>(t.get_int("run.seed", 7));
    c.label_ratio = t.get_double("run.label_ratio", 1.0);
    c.noise_sigma = t.get_double("run.noise_sigma", 0.0);
    c.deterministic_outputs = t.get_bool("run.deterministic_outputs", true);
    c.train.seed = c.seed;

    if (t.has("scenario.steps")) {
        c.has_scenario = true;
        c.scenario.steps = static_cast<int>(t.require_int("scenario.steps"));
        c.scenario.base_load = t.get_double("scenario.base_load", 100.0);
        c.scenario.noise_sigma = t.get_double("scenario.noise_sigma", 0.2);
        c.scenario.seed = static_cast<std::uint64_t>(t.get_int("scenario.seed", static_cast<std::int64_t>(c.seed)));
        c.tiers.gateways = static_cast<int>(t.get_int("scenario.gateways", 2));
        c.tiers.middles = static_cast<int>(t.get_int("scenario.middles", 6));
        c.tiers.backends = static_cast<int>(t.get_int("scenario.backends", 4));
        c.scenario.load.surge_start = static_cast<int>(t.get_int("scenario.surge_start", -1));
        c.scenario.load.surge_len = static_cast<int>(t.get_int("scenario.surge_len", 0));
        c.scenario.load.surge_multiplier = t.get_double("scenario.surge_multiplier", 1.0);
        c.scenario.load.jitter_amplitude = t.get_double("scenario.jitter_amplitude", 0.0);
        c.scenario.load.jitter_period = static_cast<int>(t.get_int("scenario.jitter_period", 20));
        c.scenario.load.jitter_start = static_cast<int>(t.get_int("scenario.jitter_start", -1));

        int explicit_faults = t.array_size("scenario.faults");
        for (int i = 0; i < explicit_faults; ++i) {
            std::string p = "scenario.faults." + std::to_string(i) + ".";
            FaultSpec f;
            f.kind = fault_kind_from_name(t.require_string(p + "kind"));
            f.target = t.require_string(p + "target");
            f.start = static_cast<int>(t.require_int(p + "start"));
            f.duration = static_cast<int>(t.require_int(p + "duration"));
            f.intensity = t.get_double(p + "intensity", 1.0);
            f.propagate = t.get_bool(p + "propagate", true);
            c.scenario.faults.push_back(std::move(f));
        }
        if (t.has("scenario.auto_faults.count")) {
            c.auto_fault.enabled = true;
            c.auto_fault.count = static_cast<int>(t.require_int("scenario.auto_faults.count"));
            c.auto_fault.intensity = t.get_double("scenario.auto_faults.intensity", 2.0);
            c.auto_fault.duration = static_cast<int>(t.get_int("scenario.auto_faults.duration", 30));
            c.auto_fault.propagate = t.get_bool("scenario.auto_faults.propagate", true);
        }
    }
    c.validate();
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    return from_table(TomlTable::parse_file(path));
}

void RunConfig::validate() const {
    if (split.train <= 0.0 || split.val <= 0.0 || split.test <= 0.0)
        throw ConfigError("split fractions must be positive");
    if (std::abs(split.train + split.val + split.test - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");
    if (label_ratio < 0.0 || label_ratio > 1.0) throw ConfigError("label_ratio must be in [0, 1]");
    if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
    objective.validate();
    train.validate();
}

StepRange RunConfig::train_range(int steps) const {
    return {0, static_cast<int>(std::llround(split.train * steps))};
}

StepRange RunConfig::val_range(int steps) const {
    int a = static_cast<int>(std::llround(split.train * steps));
    int b = static_cast<int>(std::llround((split.train + split.val) * steps));
    return {a, b};
}

StepRange RunConfig::test_range(int steps) const {
    int a = static_cast<int>(std::llround((split.train + split.val) * steps));
    return {a, steps};
}

RunConfig default_e2e_config() {
    RunConfig c;
    c.has_scenario = true;
    c.tiers = {2, 6, 4};
    c.scenario.steps = 2000;
    c.scenario.base_load = 100.0;
    c.scenario.noise_sigma = 0.2;
    c.scenario.seed = c.seed;
    c.scenario.load.surge_start = 200;
    c.scenario.load.surge_len = 60;
    c.scenario.load.surge_multiplier = 3.0;
    c.scenario.load.jitter_amplitude = 0.5;
    c.scenario.load.jitter_period = 20;
    c.auto_fault = {true, 8, 2.0, 30, true};
    c.label_ratio = 0.10;
    return c;
}

}  // namespace depanom
