#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "depanom/encoder.hpp"
#include "depanom/graph.hpp"
#include "depanom/objective.hpp"
#include "depanom/telemetry.hpp"

// Optimization of the joint objective with hand-derived reverse-mode
// gradients. Sampling (anchors, negatives, neighborhoods, masks) is frozen
// per optimizer step, so each step's loss is a deterministic differentiable
// function of the parameters; the finite-difference oracle in the test
// suite checks the analytic gradients against that function.

namespace depanom {

enum class OptimizerKind { sgd_momentum, adam };

std::string optimizer_name(OptimizerKind k);
OptimizerKind optimizer_from_name(const std::string& name);

struct TrainConfig {
    int epochs = 12;
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::adam;
    int window_length = 8;   // T consecutive steps per optimizer step
    int window_stride = 8;
    int anchors_per_step = 64;
    std::uint64_t seed = 7;
    bool grad_check = false;

    void validate() const;  // learning_rate > 0, epochs >= 1, window_length >= 2
};

struct TrainHistory {
    std::vector<double> total;
    std::vector<double> contrast;
    std::vector<double> temporal;
    std::vector<double> seconds;  // wall time per epoch
};

struct GradientSet {
    std::vector<Eigen::MatrixXd> embed_w;
    std::vector<Eigen::VectorXd> embed_b;
    std::vector<Eigen::MatrixXd> gcn_w;

    static GradientSet zeros_like(const ModelParams& p);
};

// Flat views over the parameter blocks in a fixed order:
// embed_w[0], embed_b[0], embed_w[1], embed_b[1], gcn_w[0..L).
struct BlockRef {
    std::string name;
    double* data;
    Eigen::Index size;
};
std::vector<BlockRef> param_blocks(ModelParams& p);
std::vector<BlockRef> grad_blocks(GradientSet& g);

// Everything frozen for one optimizer step.
struct StepPlan {
    int window_start = 0;
    int window_length = 0;
    std::vector<ViewPlan> base_plans;  // per window step
    std::vector<ViewPlan> aug_plans;   // per window step; empty in temporal mode
    std::vector<std::uint8_t> aug_needed;
    PairPlan pairs;                    // steps are window-relative
};

StepPlan make_step_plan(const MetricPanel& panel, const ServiceGraph& g, const EncoderConfig& enc,
                        const ObjectiveConfig& obj, int window_start, int window_length,
                        int anchors_per_step, std::uint64_t step_seed);

// Objective value of the frozen step as a function of params.
LossBreakdown step_loss(const ModelParams& params, const ServiceGraph& g, const MetricPanel& panel,
                        const StepPlan& plan, const ObjectiveConfig& obj);

// Analytic gradients of step_loss with respect to every parameter block.
// Throws NumericalError naming the block if a gradient turns non-finite.
std::pair<LossBreakdown, GradientSet> grad(const ModelParams& params, const ServiceGraph& g,
                                           const MetricPanel& panel, const StepPlan& plan,
                                           const ObjectiveConfig& obj);

struct OptimizerState {
    GradientSet m;  // momentum / first moment
    GradientSet v;  // second moment (adam)
    long step = 0;

    static OptimizerState zeros_like(const ModelParams& p) {
        return {GradientSet::zeros_like(p), GradientSet::zeros_like(p), 0};
    }
};

// One in-place parameter update. sgd_momentum uses beta 0.9; adam uses the
// standard bias-corrected moments (0.9, 0.999, eps 1e-8).
void optimizer_step(ModelParams& params, GradientSet& grads, OptimizerState& state,
                    OptimizerKind kind, double learning_rate);

struct FdCheckReport {
    double max_rel_error = 0.0;
    std::string worst_block;
};

// Central finite differences (step h) against the analytic gradients.
// coords_per_block = 0 checks every coordinate.
FdCheckReport finite_diff_check(const ModelParams& params, const ServiceGraph& g,
                                const MetricPanel& panel, const StepPlan& plan,
                                const ObjectiveConfig& obj, double h, int coords_per_block,
                                std::uint64_t pick_seed);

// Runs the optimizer over sliding windows of the (already standardized)
// panel. Bit-reproducible for a fixed (config, seed, input).
std::pair<ModelParams, TrainHistory> train_model(const MetricPanel& panel, const ServiceGraph& g,
                                                 const EncoderConfig& enc, const ObjectiveConfig& obj,
                                                 const TrainConfig& cfg);

}  // namespace depanom
