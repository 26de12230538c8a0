#include "depanom/objective.hpp"

#include <algorithm>
#include <cmath>

#include "depanom/errors.hpp"
#include "depanom/rng.hpp"

namespace depanom {

std::string positive_mode_name(PositiveMode m) {
    return m == PositiveMode::augment ? "augment" : "temporal_adjacent";
}

PositiveMode positive_mode_from_name(const std::string& name) {
    if (name == "augment") return PositiveMode::augment;
    if (name == "temporal_adjacent") return PositiveMode::temporal_adjacent;
    throw ConfigError("unknown positive_mode '" + name + "'");
}

void ObjectiveConfig::validate() const {
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (negatives_per_anchor < 1) throw ConfigError("negatives_per_anchor must be >= 1");
    if (aug_feature_mask_prob < 0.0 || aug_feature_mask_prob >= 1.0 ||
        aug_edge_drop_prob < 0.0 || aug_edge_drop_prob >= 1.0)
        throw ConfigError("augmentation probabilities must lie in [0, 1)");
}

void ContrastBatch::validate() const {
    const int k = size();
    if (positives.rows() != k || static_cast<int>(negatives.size()) != k ||
        static_cast<int>(anchor_tags.size()) != k || static_cast<int>(positive_tags.size()) != k ||
        static_cast<int>(negative_tags.size()) != k)
        throw ConfigError("contrast batch: inconsistent field sizes");
    const Eigen::Index d = anchors.cols();
    for (int a = 0; a < k; ++a) {
        const auto& negs = negatives[static_cast<std::size_t>(a)];
        if (negs.rows() < 1) throw ConfigError("contrast batch: anchor without negatives");
        if (negs.cols() != d || positives.cols() != d)
            throw ConfigError("contrast batch: embedding dimension mismatch");
        for (const auto& tag : negative_tags[static_cast<std::size_t>(a)])
            if (tag == positive_tags[static_cast<std::size_t>(a)])
                throw ConfigError("contrast batch: positive also appears as a negative");
    }
}

double cosine_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double na = a.norm();
    double nb = b.norm();
    if (na < 1e-12 || nb < 1e-12) return 0.0;
    double s = a.dot(b) / (na * nb);
    return std::clamp(s, -1.0, 1.0);
}

double contrastive_loss(const ContrastBatch& batch, double tau) {
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    batch.validate();
    const int k = batch.size();
    if (k == 0) throw ConfigError("contrast batch is empty");

    double acc = 0.0;
    std::vector<double> logits;
    for (int a = 0; a < k; ++a) {
        const Eigen::VectorXd anchor = batch.anchors.row(a).transpose();
        const auto& negs = batch.negatives[static_cast<std::size_t>(a)];
        logits.clear();
        logits.push_back(cosine_sim(anchor, batch.positives.row(a).transpose()) / tau);
        for (Eigen::Index j = 0; j < negs.rows(); ++j)
            logits.push_back(cosine_sim(anchor, negs.row(j).transpose()) / tau);
        double m = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double l : logits) sum += std::exp(l - m);
        // -log softmax(positive), arranged so the shift cancels exactly
        acc += std::log(sum) + (m - logits[0]);
    }
    return acc / static_cast<double>(k);
}

double temporal_loss(const std::vector<Eigen::MatrixXd>& frames) {
    if (frames.empty()) throw ConfigError("temporal_loss needs at least one frame");
    if (frames.size() == 1) return 0.0;
    const Eigen::Index n = frames[0].rows();
    const Eigen::Index d = frames[0].cols();
    double acc = 0.0;
    for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
        if (frames[t + 1].rows() != n || frames[t + 1].cols() != d)
            throw ConfigError("temporal_loss: frame shape mismatch at step " + std::to_string(t + 1));
        acc += (frames[t] - frames[t + 1]).squaredNorm();
    }
    return acc / (static_cast<double>(frames.size() - 1) * static_cast<double>(n));
}

LossBreakdown total_loss(const ContrastBatch& batch, const std::vector<Eigen::MatrixXd>& frames,
                         const ObjectiveConfig& cfg) {
    cfg.validate();
    LossBreakdown out;
    out.contrast = contrastive_loss(batch, cfg.tau);
    out.temporal = temporal_loss(frames);
    out.total = out.contrast + cfg.lambda * out.temporal;
    return out;
}

PairPlan plan_pairs(const Eigen::MatrixXi& window_labels, PositiveMode mode, int negatives_per_anchor,
                    int anchors_per_step, std::uint64_t seed) {
    const int n = static_cast<int>(window_labels.rows());
    const int steps = static_cast<int>(window_labels.cols());
    if (n < 2) throw ConfigError("insufficient negatives");
    if (anchors_per_step < 1) throw ConfigError("anchors_per_step must be >= 1");

    const int last_anchor_step = (mode == PositiveMode::temporal_adjacent) ? steps - 1 : steps;

    PairPlan plan;
    std::vector<int> eligible;
    for (int t = 0; t < last_anchor_step; ++t) {
        eligible.clear();
        for (int i = 0; i < n; ++i) {
            if (window_labels(i, t) == 1) continue;
            if (mode == PositiveMode::temporal_adjacent && window_labels(i, t + 1) == 1) continue;
            eligible.push_back(i);
        }
        if (eligible.empty()) continue;

        if (static_cast<int>(eligible.size()) > anchors_per_step) {
            SplitMix64 rng(seed_combine(seed_combine(seed, 0xA2C4ull), static_cast<std::uint64_t>(t)));
            for (int k = 0; k < anchors_per_step; ++k) {
                std::size_t r = static_cast<std::size_t>(k) +
                                static_cast<std::size_t>(rng.uniform_int(eligible.size() - static_cast<std::size_t>(k)));
                std::swap(eligible[static_cast<std::size_t>(k)], eligible[r]);
            }
            eligible.resize(static_cast<std::size_t>(anchors_per_step));
            std::sort(eligible.begin(), eligible.end());
        }

        for (int i : eligible) {
            AnchorPlan a;
            a.node = i;
            a.step = t;
            if (mode == PositiveMode::temporal_adjacent) {
                a.pos_node = i;
                a.pos_step = t + 1;
                a.pos_aug = false;
            } else {
                a.pos_node = i;
                a.pos_step = t;
                a.pos_aug = true;
            }

            // weighted draw with replacement over other nodes at step t;
            // anomaly-labeled cells count twice
            SplitMix64 rng(seed_combine(seed_combine(seed_combine(seed, 0x9E6Aull),
                                                     static_cast<std::uint64_t>(t)),
                                        static_cast<std::uint64_t>(i)));
            double total_w = 0.0;
            for (int j = 0; j < n; ++j)
                if (j != i) total_w += (window_labels(j, t) == 1) ? 2.0 : 1.0;
            a.negatives.reserve(static_cast<std::size_t>(negatives_per_anchor));
            for (int k = 0; k < negatives_per_anchor; ++k) {
                double u = rng.uniform01() * total_w;
                double acc = 0.0;
                int chosen = -1;
                for (int j = 0; j < n; ++j) {
                    if (j == i) continue;
                    acc += (window_labels(j, t) == 1) ? 2.0 : 1.0;
                    if (u < acc) {
                        chosen = j;
                        break;
                    }
                }
                if (chosen < 0) chosen = (i == n - 1) ? n - 2 : n - 1;  // u == total_w edge
                a.negatives.emplace_back(chosen, t);
            }
            plan.anchors.push_back(std::move(a));
        }
    }
    return plan;
}

std::uint64_t base_view_seed(std::uint64_t step_seed, int step) {
    return seed_combine(seed_combine(step_seed, 0xB0ull), static_cast<std::uint64_t>(step));
}

std::uint64_t aug_view_seed(std::uint64_t step_seed, int step) {
    return seed_combine(seed_combine(step_seed, 0xA1ull), static_cast<std::uint64_t>(step));
}

ContrastBatch build_pairs(const std::vector<Eigen::MatrixXd>& frames, const MetricPanel& panel,
                          const ServiceGraph& g, const ObjectiveConfig& cfg,
                          const EncoderConfig& enc, const ModelParams& params, std::uint64_t seed) {
    cfg.validate();
    if (frames.size() != static_cast<std::size_t>(panel.num_steps()))
        throw ConfigError("build_pairs: frame count does not match panel steps");
    if (panel.num_nodes() < 2) throw ConfigError("insufficient negatives");

    PairPlan plan = plan_pairs(panel.labels, cfg.positive_mode, cfg.negatives_per_anchor,
                               panel.num_nodes(), seed);

    // Augmented views are shared by all anchors of a step.
    std::vector<Eigen::MatrixXd> aug(frames.size());
    if (cfg.positive_mode == PositiveMode::augment) {
        std::vector<bool> needed(frames.size(), false);
        for (const auto& a : plan.anchors) needed[static_cast<std::size_t>(a.pos_step)] = true;
        for (std::size_t t = 0; t < frames.size(); ++t) {
            if (!needed[t]) continue;
            ViewPlan vp = plan_aug_view(g, params.dims.layers, enc.neighborhood_cap, params.dims.d_in,
                                        cfg.aug_feature_mask_prob, cfg.aug_edge_drop_prob,
                                        aug_view_seed(seed, static_cast<int>(t)));
            aug[t] = forward_with_plan(panel.frames[t], g, params, vp);
        }
    }

    const int k = static_cast<int>(plan.anchors.size());
    const Eigen::Index d = params.dims.d_emb;
    ContrastBatch batch;
    batch.anchors.resize(k, d);
    batch.positives.resize(k, d);
    batch.negatives.resize(static_cast<std::size_t>(k));
    batch.anchor_tags.resize(static_cast<std::size_t>(k));
    batch.positive_tags.resize(static_cast<std::size_t>(k));
    batch.negative_tags.resize(static_cast<std::size_t>(k));

    for (int a = 0; a < k; ++a) {
        const auto& ap = plan.anchors[static_cast<std::size_t>(a)];
        batch.anchors.row(a) = frames[static_cast<std::size_t>(ap.step)].row(ap.node);
        batch.anchor_tags[static_cast<std::size_t>(a)] = {ap.node, ap.step, 0};
        const Eigen::MatrixXd& pos_frame =
            ap.pos_aug ? aug[static_cast<std::size_t>(ap.pos_step)] : frames[static_cast<std::size_t>(ap.pos_step)];
        batch.positives.row(a) = pos_frame.row(ap.pos_node);
        batch.positive_tags[static_cast<std::size_t>(a)] = {ap.pos_node, ap.pos_step, ap.pos_aug ? 1 : 0};

        Eigen::MatrixXd negs(static_cast<Eigen::Index>(ap.negatives.size()), d);
        auto& tags = batch.negative_tags[static_cast<std::size_t>(a)];
        for (std::size_t m = 0; m < ap.negatives.size(); ++m) {
            auto [node, step] = ap.negatives[m];
            negs.row(static_cast<Eigen::Index>(m)) = frames[static_cast<std::size_t>(step)].row(node);
            tags.push_back({node, step, 0});
        }
        batch.negatives[static_cast<std::size_t>(a)] = std::move(negs);
    }
    batch.validate();
    return batch;
}

}  // namespace depanom
