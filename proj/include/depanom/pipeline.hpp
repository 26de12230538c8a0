#pragma once

#include <string>
#include <vector>

#include "depanom/config.hpp"
#include "depanom/detect.hpp"
#include "depanom/eval.hpp"
#include "depanom/graph.hpp"
#include "depanom/simgen.hpp"
#include "depanom/telemetry.hpp"
#include "depanom/train.hpp"

// End-to-end wiring: scenario generation, data preparation (standardize,
// optional monitoring noise, label masking), training, scoring and
// evaluation, plus the figure-sweep harness.

namespace depanom {

struct GeneratedData {
    Topology topology;
    EdgeList edges;
    MetricPanel panel;
};

// Expands auto faults against the generated topology and simulates.
GeneratedData generate_scenario(const RunConfig& cfg);

struct PreparedData {
    ServiceGraph graph;
    MetricPanel truth;   // standardized/noised panel with the original labels
    MetricPanel work;    // same features, labels masked to the configured ratio
    StandardizationStats stats;
    StepRange train_r;
    StepRange val_r;
    StepRange test_r;
};

PreparedData prepare(const ServiceGraph& g, const MetricPanel& raw, const RunConfig& cfg);

struct EvalOutputs {
    Eigen::MatrixXd scores;            // full panel
    Eigen::MatrixXi predictions;
    double threshold = 0.0;
    bool threshold_from_fallback = false;  // quantile fallback (single-class val labels)
    EvalReport test_report;            // against the true labels, test split only
};

// Bank construction, scoring, threshold selection on the validation split
// (masked labels; score-quantile fallback when they collapse to one class)
// and test-split metrics against the true labels.
EvalOutputs evaluate(const PreparedData& data, const ModelParams& params, const RunConfig& cfg);

struct PipelineResult {
    ModelParams params;
    TrainHistory history;
    EvalOutputs eval;
};

PipelineResult run_pipeline(const ServiceGraph& g, const MetricPanel& raw, const RunConfig& cfg);

// Loads edge + metrics files named by the config and runs the pipeline.
PipelineResult run_from_files(const RunConfig& cfg, ServiceGraph* graph_out = nullptr,
                              MetricPanel* raw_out = nullptr);

struct SweepKnob {
    std::string name;  // gcn_layers, neighborhood_cap, embed_dim, learning_rate,
                       // label_ratio, noise_sigma, anomaly_intensity
    std::vector<double> grid;
};

// Applies one knob value to a config copy; throws ConfigError for unknown knobs.
RunConfig apply_knob(const RunConfig& base, const std::string& knob, double value);

// Trains + evaluates the pipeline per grid point (cartesian when two knobs
// are given), same data seed everywhere, report order = grid order.
// jobs > 1 fans points out to a worker pool.
std::vector<EvalReport> run_sweep(const RunConfig& base, const std::vector<SweepKnob>& knobs,
                                  int jobs = 1);

void write_history_csv(const std::string& path, const TrainHistory& history, bool zero_seconds);

}  // namespace depanom
