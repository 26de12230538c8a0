#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

// Per-service monitoring time series on a regular grid, plus ground-truth
// labels. Panels are immutable values; every operation returns a new panel.

namespace depanom {

// Canonical feature order. Ingestion accepts any column superset and maps by name.
const std::vector<std::string>& canonical_features();  // cpu, mem, io, net_in, net_out, latency, error_rate

struct StepRange {
    int begin = 0;
    int end = 0;  // exclusive
    int length() const { return end - begin; }
};

struct MetricPanel {
    std::vector<std::string> node_ids;           // matches ServiceGraph order when paired
    std::vector<std::string> feature_names;
    std::vector<Eigen::MatrixXd> frames;         // one [num_nodes x dim] matrix per step
    Eigen::MatrixXi labels;                      // [num_nodes x num_steps], values in {-1, 0, 1}
    std::vector<std::int64_t> timestamps;        // epoch seconds per step, regular grid
    double step_seconds = 60.0;

    int num_nodes() const { return frames.empty() ? static_cast<int>(node_ids.size()) : static_cast<int>(frames[0].rows()); }
    int num_steps() const { return static_cast<int>(frames.size()); }
    int dim() const { return frames.empty() ? 0 : static_cast<int>(frames[0].cols()); }
};

// Returns the panel restricted to [range.begin, range.end).
MetricPanel slice_steps(const MetricPanel& panel, StepRange range);

// Permutes the node axis into `target_order` (must be the same id set).
MetricPanel reorder_nodes(const MetricPanel& panel, const std::vector<std::string>& target_order);

struct LoadSchema {
    std::vector<std::string> feature_columns = canonical_features();
    // Optional fixed node ordering (e.g. from a ServiceGraph). When set, a
    // service absent from it is an error; when empty, nodes are ordered
    // lexicographically over the ids seen in the file.
    std::vector<std::string> node_order;
};

struct LoadResult {
    MetricPanel panel;
    std::int64_t filled_cells = 0;    // carry-forward / leading-mean fills
    std::int64_t rejected_rows = 0;   // rows with non-finite values
};

// Reads a metrics file (CSV, or JSON-lines when the extension is .jsonl /
// .ndjson) and assembles the panel on a regular grid. Missing cells are
// carry-forward filled; leading gaps get the node's per-feature mean.
LoadResult load_panel(const std::string& path, const LoadSchema& schema = {});

struct StandardizationStats {
    Eigen::VectorXd mean;                 // per feature
    Eigen::VectorXd stddev;               // > 0, clamped features hold 1.0
    std::vector<std::uint8_t> clamped;    // 1 where variance was zero
};

// Z-scores every feature with statistics from the training slice only.
// Population standard deviation; zero-variance features clamp to std 1.
std::pair<MetricPanel, StandardizationStats> standardize(const MetricPanel& panel, StepRange train_steps);

// Applies previously computed stats (inference path).
MetricPanel apply_standardization(const MetricPanel& panel, const StandardizationStats& stats);

// Adds i.i.d. N(0, sigma^2) to every feature cell; labels untouched.
MetricPanel inject_noise(const MetricPanel& panel, double sigma, std::uint64_t seed);

// Keeps exactly round(keep_ratio * #labeled) labels, class-stratified so at
// least one anomaly label survives when keep_ratio > 0 and anomalies exist;
// every other label becomes -1.
MetricPanel mask_labels(const MetricPanel& panel, double keep_ratio, std::uint64_t seed);

// Metrics file writer: CSV with the canonical header, full-precision values.
void write_metrics_csv(const std::string& path, const MetricPanel& panel);

}  // namespace depanom
