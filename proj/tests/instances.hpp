#pragma once

// Small randomized instances shared by the gradient-oracle tests and the
// acceptance suite.

#include <string>
#include <vector>

#include "depanom/encoder.hpp"
#include "depanom/graph.hpp"
#include "depanom/objective.hpp"
#include "depanom/rng.hpp"
#include "depanom/telemetry.hpp"
#include "depanom/train.hpp"

namespace depanom::testing {

struct TinyInstance {
    ServiceGraph graph;
    MetricPanel panel;
    EncoderConfig enc;
    ObjectiveConfig obj;
    ModelParams params;
    StepPlan plan;
};

// 5 nodes, d_emb 4, 2 gcn layers, one 4-step window; labels mix 0/1/-1.
inline TinyInstance make_tiny_instance(std::uint64_t seed, PositiveMode mode, double lambda) {
    SplitMix64 rng(seed_combine(seed, 0x7E57ull));
    const int n = 5;
    const int steps = 4;

    EdgeList edges;
    for (int i = 0; i + 1 < n; ++i)
        edges.emplace_back("n" + std::to_string(i), "n" + std::to_string(i + 1));
    for (int e = 0; e < 3; ++e) {
        int a = static_cast<int>(rng.uniform_int(n));
        int b = static_cast<int>(rng.uniform_int(n));
        edges.emplace_back("n" + std::to_string(a), "n" + std::to_string(b));
    }

    TinyInstance inst;
    inst.graph = build_graph(edges);

    inst.panel.node_ids = inst.graph.node_ids();
    inst.panel.feature_names = {"f0", "f1", "f2"};
    inst.panel.labels = Eigen::MatrixXi::Zero(n, steps);
    for (int t = 0; t < steps; ++t) {
        inst.panel.timestamps.push_back(60 * t);
        Eigen::MatrixXd frame(n, 3);
        for (int i = 0; i < n; ++i)
            for (int f = 0; f < 3; ++f) frame(i, f) = rng.gauss();
        inst.panel.frames.push_back(frame);
    }
    // one anomalous cell and one unlabeled cell
    inst.panel.labels(static_cast<int>(rng.uniform_int(n)), static_cast<int>(rng.uniform_int(steps))) = 1;
    inst.panel.labels(static_cast<int>(rng.uniform_int(n)), static_cast<int>(rng.uniform_int(steps))) = -1;

    inst.enc.dims = {3, 6, 4, 2};
    inst.enc.activation = Activation::relu;
    inst.enc.neighborhood_cap = 10;

    inst.obj.tau = 0.1;
    inst.obj.lambda = lambda;
    inst.obj.negatives_per_anchor = 4;
    inst.obj.positive_mode = mode;
    inst.obj.aug_feature_mask_prob = 0.2;
    inst.obj.aug_edge_drop_prob = 0.2;

    inst.params = init_params(inst.enc.dims, inst.enc.activation, seed_combine(seed, 0x9A7ull));
    inst.plan = make_step_plan(inst.panel, inst.graph, inst.enc, inst.obj, 0, steps, 8,
                               seed_combine(seed, 0x57EBull));
    return inst;
}

}  // namespace depanom::testing
