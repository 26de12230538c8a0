#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "depanom/encoder.hpp"
#include "depanom/graph.hpp"
#include "depanom/telemetry.hpp"

// Contrastive pair construction and the joint objective: an NT-Xent term
// over (anchor, positive, negatives) triples plus a temporal-consistency
// penalty on adjacent embedding frames, combined as contrast + lambda * temporal.

namespace depanom {

enum class PositiveMode { augment, temporal_adjacent };

std::string positive_mode_name(PositiveMode m);
PositiveMode positive_mode_from_name(const std::string& name);

struct ObjectiveConfig {
    double tau = 0.1;                  // softmax temperature
    double lambda = 0.1;               // temporal balance
    int negatives_per_anchor = 16;
    PositiveMode positive_mode = PositiveMode::augment;
    double aug_feature_mask_prob = 0.2;
    double aug_edge_drop_prob = 0.2;

    void validate() const;
};

// (node, step, view) identity of one embedding; view 0 = base, 1 = augmented.
struct Provenance {
    int node = 0;
    int step = 0;
    int view = 0;
    bool operator==(const Provenance&) const = default;
};

struct ContrastBatch {
    Eigen::MatrixXd anchors;                  // one row per anchor
    Eigen::MatrixXd positives;                // matching rows
    std::vector<Eigen::MatrixXd> negatives;   // per anchor: m x d_emb
    std::vector<Provenance> anchor_tags;
    std::vector<Provenance> positive_tags;
    std::vector<std::vector<Provenance>> negative_tags;

    int size() const { return static_cast<int>(anchors.rows()); }
    void validate() const;
};

// cos(a, b), clamped to [-1, 1]; returns 0 when either norm is below 1e-12.
double cosine_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Mean over anchors of -log softmax(sim(anchor, positive) / tau) where the
// softmax runs over the positive plus that anchor's negatives only.
double contrastive_loss(const ContrastBatch& batch, double tau);

// Mean over consecutive frame pairs and nodes of the squared embedding change.
double temporal_loss(const std::vector<Eigen::MatrixXd>& frames);

struct LossBreakdown {
    double total = 0.0;
    double contrast = 0.0;
    double temporal = 0.0;
};

LossBreakdown total_loss(const ContrastBatch& batch, const std::vector<Eigen::MatrixXd>& frames,
                         const ObjectiveConfig& cfg);

// Index-level sampling plan for one window of steps. Steps are window-relative.
struct AnchorPlan {
    int node = 0;
    int step = 0;
    int pos_node = 0;
    int pos_step = 0;
    bool pos_aug = false;
    std::vector<std::pair<int, int>> negatives;  // (node, step), base view
};

struct PairPlan {
    std::vector<AnchorPlan> anchors;  // sorted by (step, node)
};

// Samples anchors, positives and negatives from the label matrix of a
// window (columns = window steps). Cells labeled anomalous never become
// anchors or positives; they are preferred (2x weight) as negatives.
PairPlan plan_pairs(const Eigen::MatrixXi& window_labels, PositiveMode mode, int negatives_per_anchor,
                    int anchors_per_step, std::uint64_t seed);

// Full pair construction: plans indices, re-encodes augmented views where
// needed, and materializes embedding rows with provenance tags.
// `frames[k]` must be the base-view embedding of `panel` step k.
ContrastBatch build_pairs(const std::vector<Eigen::MatrixXd>& frames, const MetricPanel& panel,
                          const ServiceGraph& g, const ObjectiveConfig& cfg,
                          const EncoderConfig& enc, const ModelParams& params, std::uint64_t seed);

// Deterministic per-step seeds for the two view kinds.
std::uint64_t base_view_seed(std::uint64_t step_seed, int step);
std::uint64_t aug_view_seed(std::uint64_t step_seed, int step);

}  // namespace depanom
