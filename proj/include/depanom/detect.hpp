#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "depanom/encoder.hpp"
#include "depanom/graph.hpp"
#include "depanom/telemetry.hpp"

// Scoring: node-time embeddings are compared against a bank of presumed-
// normal training embeddings; the anomaly score of a cell is the mean
// cosine distance to its k nearest bank vectors (range [0, 2]).

namespace depanom {

struct DetectConfig {
    int k = 10;
    int bank_capacity = 4096;
};

struct ReferenceBank {
    Eigen::MatrixXd vectors;                       // rows are bank embeddings
    std::vector<std::pair<int, int>> provenance;   // (node, step) per row
    int k = 10;

    int size() const { return static_cast<int>(vectors.rows()); }
};

// Encodes the training steps and keeps cells labeled 0 or -1 (unlabeled is
// presumed normal); label-1 cells never enter the bank. Down-samples
// uniformly to capacity, deterministic per seed.
ReferenceBank build_reference(const ModelParams& params, const ServiceGraph& g,
                              const MetricPanel& panel, StepRange train_steps,
                              const DetectConfig& cfg, int neighborhood_cap, std::uint64_t seed);

// Scores every node-time cell of the panel; higher = more anomalous.
// Returns a [num_nodes x num_steps] matrix.
Eigen::MatrixXd score_panel(const ModelParams& params, const ServiceGraph& g,
                            const MetricPanel& panel, const ReferenceBank& bank,
                            int neighborhood_cap, std::uint64_t seed);

// Same scoring applied to already-encoded frames.
Eigen::MatrixXd score_frames(const std::vector<Eigen::MatrixXd>& frames, const ReferenceBank& bank);

// F1-maximizing threshold over labeled validation cells. Candidates are the
// midpoints between consecutive distinct sorted scores; ties resolve to the
// smallest candidate. Scores are higher-is-anomalous by contract; no
// orientation search is performed.
double select_threshold(const std::vector<double>& scores, const std::vector<int>& labels);

// prediction = 1 iff score > threshold
Eigen::MatrixXi classify(const Eigen::MatrixXd& scores, double threshold);

// Scores file: CSV `service,timestamp,score,prediction,label`.
void write_scores_csv(const std::string& path, const MetricPanel& panel, const Eigen::MatrixXd& scores,
                      const Eigen::MatrixXi& predictions);

}  // namespace depanom
