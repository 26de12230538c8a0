#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "depanom/detect.hpp"
#include "depanom/encoder.hpp"
#include "depanom/objective.hpp"
#include "depanom/simgen.hpp"
#include "depanom/train.hpp"

// One config file drives a whole run. The format is a small TOML subset:
// [table] headers, [[table]] array-of-tables, key = value with strings,
// numbers and booleans, # comments.

namespace depanom {

class TomlTable {
public:
    static TomlTable parse_file(const std::string& path);
    static TomlTable parse_string(const std::string& text, const std::string& origin);

    bool has(const std::string& dotted_key) const;
    // array-of-tables length; 0 when absent
    int array_size(const std::string& dotted_key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    std::string require_string(const std::string& key) const;
    double require_double(const std::string& key) const;
    std::int64_t require_int(const std::string& key) const;

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, int> array_sizes_;
    std::string origin_;

    const std::string& raw(const std::string& key) const;
};

struct SplitFractions {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
};

struct AutoFaultSpec {
    bool enabled = false;
    int count = 8;
    double intensity = 2.0;
    int duration = 30;
    bool propagate = true;
};

struct RunConfig {
    std::string edges_path;
    std::string metrics_path;
    std::string out_dir = "out";

    EncoderConfig encoder;
    ObjectiveConfig objective;
    TrainConfig train;
    DetectConfig detect;
    SplitFractions split;

    std::uint64_t seed = 7;
    double label_ratio = 1.0;
    double noise_sigma = 0.0;          // standardized-unit noise added post-standardization
    bool deterministic_outputs = true; // zero out wall-time columns in emitted files

    bool has_scenario = false;
    TierCounts tiers;
    ScenarioConfig scenario;           // faults list = explicit entries; see auto_faults
    AutoFaultSpec auto_fault;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_table(const TomlTable& t);
    void validate() const;

    // Step ranges of the contiguous time split for a panel of `steps`.
    StepRange train_range(int steps) const;
    StepRange val_range(int steps) const;
    StepRange test_range(int steps) const;
};

// Built-in defaults mirroring the standard end-to-end scenario
// (2/6/4 topology, 2000 steps, 8 faults at intensity 2.0, noise 0.2,
// surge 200-260 at 3x, jitter 0.5/20 thereafter, 10% labels).
RunConfig default_e2e_config();

}  // namespace depanom
