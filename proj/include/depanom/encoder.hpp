#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "depanom/graph.hpp"

// Node-time embeddings: a per-node MLP into the latent space followed by
// stacked degree-normalized graph-convolution layers over sampled
// neighborhoods. All arithmetic is 64-bit; forward passes are pure
// functions and may run concurrently across time steps.

namespace depanom {

enum class Activation { relu, identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct ModelDims {
    int d_in = 7;
    int d_hid = 32;
    int d_emb = 64;
    int layers = 2;  // 0 is the no-graph-convolution ablation
};

struct ModelParams {
    std::vector<Eigen::MatrixXd> embed_w;  // d_in x d_hid, d_hid x d_emb
    std::vector<Eigen::VectorXd> embed_b;  // d_hid, d_emb
    std::vector<Eigen::MatrixXd> gcn_w;    // layers of d_emb x d_emb
    ModelDims dims;
    Activation activation = Activation::relu;

    void validate() const;  // shape consistency, finite entries, 0 <= layers <= 8
};

struct EncoderConfig {
    ModelDims dims;
    Activation activation = Activation::relu;
    int neighborhood_cap = 10;
};

// Glorot-uniform weights (|w| <= sqrt(6 / (fan_in + fan_out))), zero biases,
// bit-deterministic per seed.
ModelParams init_params(const ModelDims& dims, Activation activation, std::uint64_t seed);

// h = act(x W1 + b1) W2 + b2; no activation on the output layer.
Eigen::VectorXd embed(const Eigen::VectorXd& x, const ModelParams& params);
Eigen::MatrixXd embed_rows(const Eigen::MatrixXd& X, const ModelParams& params);

// One sampling/augmentation realization of the encoder's stochastic parts.
// Frozen plans make every forward pass a deterministic function of (X, params).
struct ViewPlan {
    // neighborhoods[l][i]: sorted sampled neighbor indices of node i at layer l
    std::vector<std::vector<std::vector<int>>> neighborhoods;
    // n x d_in multiplicative {0,1} mask; empty means no feature masking
    Eigen::ArrayXXd feature_mask;
};

ViewPlan plan_base_view(const ServiceGraph& g, int layers, int cap, std::uint64_t seed);

// Augmentation view: per-cell feature masking plus edge dropout (non-self
// adjacency entries dropped with drop_prob before the per-layer sampling).
ViewPlan plan_aug_view(const ServiceGraph& g, int layers, int cap, int d_in,
                       double feature_mask_prob, double edge_drop_prob, std::uint64_t seed);

// Neighborhood aggregation Sum_j h_j / c_ij. Terms are accumulated in a
// value-canonical order so node relabeling cannot perturb the sums.
Eigen::MatrixXd aggregate_neighbors(const Eigen::MatrixXd& H, const ServiceGraph& g,
                                    const std::vector<std::vector<int>>& neighborhoods);

// z_i = act(Sum_{j in sampled N(i)} (1/c_ij) h_j W)
Eigen::MatrixXd gcn_layer(const Eigen::MatrixXd& H, const ServiceGraph& g, const Eigen::MatrixXd& W,
                          const std::vector<std::vector<int>>& neighborhoods, Activation act);

// Intermediate values of one encoder pass, kept for backpropagation.
struct FrameCache {
    Eigen::MatrixXd X;                // input after masking
    Eigen::MatrixXd U;                // embed hidden pre-activation
    Eigen::MatrixXd Hh;               // act(U)
    std::vector<Eigen::MatrixXd> Z;   // Z[0] = embed output, ..., Z[layers]
    std::vector<Eigen::MatrixXd> A;   // A[l] = aggregate(Z[l])
    std::vector<Eigen::MatrixXd> P;   // P[l] = A[l] * W[l]
};

// Full encoder under a fixed plan. Hidden graph-conv layers use the model
// activation, the final layer is always identity so embeddings keep both
// signs for the cosine geometry. Pass a cache to keep intermediates.
Eigen::MatrixXd forward_with_plan(const Eigen::MatrixXd& X, const ServiceGraph& g,
                                  const ModelParams& params, const ViewPlan& plan,
                                  FrameCache* cache = nullptr);

// Convenience wrapper: fresh per-layer neighborhood sampling keyed by seed.
Eigen::MatrixXd forward(const Eigen::MatrixXd& X, const ServiceGraph& g, const ModelParams& params,
                        int neighborhood_cap, std::uint64_t seed);

// Encodes every step of a panel (base views, seeds derived per step).
std::vector<Eigen::MatrixXd> encode_panel(const std::vector<Eigen::MatrixXd>& frames,
                                          const ServiceGraph& g, const ModelParams& params,
                                          int neighborhood_cap, std::uint64_t seed);

// Checkpoint I/O. Doubles are serialized as hex-float strings, so the
// write/read round trip is bit-exact.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace depanom
