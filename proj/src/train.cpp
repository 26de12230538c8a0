#include "depanom/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "depanom/errors.hpp"
#include "depanom/rng.hpp"

namespace depanom {

std::string optimizer_name(OptimizerKind k) {
    return k == OptimizerKind::adam ? "adam" : "sgd_momentum";
}

OptimizerKind optimizer_from_name(const std::string& name) {
    if (name == "adam") return OptimizerKind::adam;
    if (name == "sgd_momentum") return OptimizerKind::sgd_momentum;
    throw ConfigError("unknown optimizer '" + name + "'");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (window_length < 2) throw ConfigError("window_length must be >= 2");
    if (window_stride < 1) throw ConfigError("window_stride must be >= 1");
    if (anchors_per_step < 1) throw ConfigError("anchors_per_step must be >= 1");
}

GradientSet GradientSet::zeros_like(const ModelParams& p) {
    GradientSet g;
    for (const auto& w : p.embed_w) g.embed_w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : p.embed_b) g.embed_b.push_back(Eigen::VectorXd::Zero(b.size()));
    for (const auto& w : p.gcn_w) g.gcn_w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    return g;
}

namespace {

template <typename Params>
std::vector<BlockRef> blocks_impl(Params& p) {
    std::vector<BlockRef> out;
    out.push_back({"embed_w[0]", p.embed_w[0].data(), p.embed_w[0].size()});
    out.push_back({"embed_b[0]", p.embed_b[0].data(), p.embed_b[0].size()});
    out.push_back({"embed_w[1]", p.embed_w[1].data(), p.embed_w[1].size()});
    out.push_back({"embed_b[1]", p.embed_b[1].data(), p.embed_b[1].size()});
    for (std::size_t l = 0; l < p.gcn_w.size(); ++l)
        out.push_back({"gcn_w[" + std::to_string(l) + "]", p.gcn_w[l].data(), p.gcn_w[l].size()});
    return out;
}

}  // namespace

std::vector<BlockRef> param_blocks(ModelParams& p) { return blocks_impl(p); }
std::vector<BlockRef> grad_blocks(GradientSet& g) { return blocks_impl(g); }

StepPlan make_step_plan(const MetricPanel& panel, const ServiceGraph& g, const EncoderConfig& enc,
                        const ObjectiveConfig& obj, int window_start, int window_length,
                        int anchors_per_step, std::uint64_t step_seed) {
    if (window_start < 0 || window_start + window_length > panel.num_steps())
        throw ConfigError("training window outside panel");
    StepPlan plan;
    plan.window_start = window_start;
    plan.window_length = window_length;

    for (int k = 0; k < window_length; ++k)
        plan.base_plans.push_back(
            plan_base_view(g, enc.dims.layers, enc.neighborhood_cap, base_view_seed(step_seed, k)));

    Eigen::MatrixXi window_labels = panel.labels.middleCols(window_start, window_length);
    plan.pairs = plan_pairs(window_labels, obj.positive_mode, obj.negatives_per_anchor,
                            anchors_per_step, seed_combine(step_seed, 0x5E1Full));

    plan.aug_needed.assign(static_cast<std::size_t>(window_length), 0);
    if (obj.positive_mode == PositiveMode::augment) {
        for (const auto& a : plan.pairs.anchors)
            plan.aug_needed[static_cast<std::size_t>(a.pos_step)] = 1;
        plan.aug_plans.resize(static_cast<std::size_t>(window_length));
        for (int k = 0; k < window_length; ++k) {
            if (!plan.aug_needed[static_cast<std::size_t>(k)]) continue;
            plan.aug_plans[static_cast<std::size_t>(k)] =
                plan_aug_view(g, enc.dims.layers, enc.neighborhood_cap, enc.dims.d_in,
                              obj.aug_feature_mask_prob, obj.aug_edge_drop_prob,
                              aug_view_seed(step_seed, k));
        }
    }
    return plan;
}

namespace {

struct StepForward {
    std::vector<FrameCache> base;              // per window step
    std::vector<FrameCache> aug;               // only where plan.aug_needed
    std::vector<Eigen::MatrixXd> base_frames;  // final embeddings (= base[k].Z.back())
};

struct SimTerms {
    double sim = 0.0;
    bool degenerate = false;  // a norm fell below 1e-12; gradient is zero there
    Eigen::VectorXd d_anchor;
    Eigen::VectorXd d_other;
};

SimTerms cosine_with_grad(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    SimTerms out;
    double na = a.norm();
    double nb = b.norm();
    if (na < 1e-12 || nb < 1e-12) {
        out.degenerate = true;
        return out;
    }
    double s = a.dot(b) / (na * nb);
    out.sim = std::clamp(s, -1.0, 1.0);
    out.d_anchor = b / (na * nb) - (s / (na * na)) * a;
    out.d_other = a / (na * nb) - (s / (nb * nb)) * b;
    return out;
}

void run_forward(const ModelParams& params, const ServiceGraph& g, const MetricPanel& panel,
                 const StepPlan& plan, StepForward& fwd) {
    const int T = plan.window_length;
    fwd.base.resize(static_cast<std::size_t>(T));
    fwd.aug.resize(static_cast<std::size_t>(T));
    fwd.base_frames.resize(static_cast<std::size_t>(T));
    for (int k = 0; k < T; ++k) {
        const Eigen::MatrixXd& x = panel.frames[static_cast<std::size_t>(plan.window_start + k)];
        fwd.base_frames[static_cast<std::size_t>(k)] =
            forward_with_plan(x, g, params, plan.base_plans[static_cast<std::size_t>(k)],
                              &fwd.base[static_cast<std::size_t>(k)]);
        if (!plan.aug_needed.empty() && plan.aug_needed[static_cast<std::size_t>(k)])
            forward_with_plan(x, g, params, plan.aug_plans[static_cast<std::size_t>(k)],
                              &fwd.aug[static_cast<std::size_t>(k)]);
    }
}

// Contrastive loss over the frozen pairs; when dZ buffers are given, also
// accumulates d(loss)/d(embedding) into them.
double contrast_term(const StepPlan& plan, const StepForward& fwd, double tau,
                     std::vector<Eigen::MatrixXd>* dZ_base, std::vector<Eigen::MatrixXd>* dZ_aug) {
    const auto& anchors = plan.pairs.anchors;
    if (anchors.empty()) return 0.0;
    const double inv_count = 1.0 / static_cast<double>(anchors.size());

    auto frame_row = [&](int step, int node, bool aug_view) -> Eigen::VectorXd {
        const FrameCache& c = aug_view ? fwd.aug[static_cast<std::size_t>(step)]
                                       : fwd.base[static_cast<std::size_t>(step)];
        return c.Z.back().row(node).transpose();
    };

    double acc = 0.0;
    std::vector<SimTerms> terms;
    std::vector<double> logits;
    for (const auto& a : anchors) {
        Eigen::VectorXd za = frame_row(a.step, a.node, false);
        terms.clear();
        logits.clear();
        terms.push_back(cosine_with_grad(za, frame_row(a.pos_step, a.pos_node, a.pos_aug)));
        for (const auto& [node, step] : a.negatives)
            terms.push_back(cosine_with_grad(za, frame_row(step, node, false)));
        for (const auto& t : terms) logits.push_back(t.sim / tau);

        double m = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double l : logits) sum += std::exp(l - m);
        acc += std::log(sum) + (m - logits[0]);

        if (!dZ_base) continue;
        // d loss / d sim_j = (softmax_j - [j == 0]) / tau, averaged over anchors
        Eigen::VectorXd dza = Eigen::VectorXd::Zero(za.size());
        for (std::size_t j = 0; j < terms.size(); ++j) {
            double p = std::exp(logits[j] - m) / sum;
            double dsim = (p - (j == 0 ? 1.0 : 0.0)) / tau * inv_count;
            if (terms[j].degenerate || dsim == 0.0) continue;
            dza += dsim * terms[j].d_anchor;
            if (j == 0) {
                auto& sink = a.pos_aug ? (*dZ_aug)[static_cast<std::size_t>(a.pos_step)]
                                       : (*dZ_base)[static_cast<std::size_t>(a.pos_step)];
                sink.row(a.pos_node) += dsim * terms[j].d_other.transpose();
            } else {
                const auto& [node, step] = a.negatives[j - 1];
                (*dZ_base)[static_cast<std::size_t>(step)].row(node) += dsim * terms[j].d_other.transpose();
            }
        }
        (*dZ_base)[static_cast<std::size_t>(a.step)].row(a.node) += dza.transpose();
    }
    return acc * inv_count;
}

// Temporal consistency on direction-normalized embeddings (the squared
// chord distance 2 - 2 cos). The contrastive term lives in cosine space, so
// penalizing raw Euclidean drift would mostly reward norm shrinkage, which
// cosine scoring never sees.
double temporal_term(const StepForward& fwd, std::vector<Eigen::MatrixXd>* dZ_base, double lambda) {
    const auto& frames = fwd.base_frames;
    if (frames.size() < 2) return 0.0;
    const Eigen::Index n = frames[0].rows();
    const Eigen::Index d = frames[0].cols();
    const double scale = 1.0 / (static_cast<double>(frames.size() - 1) * static_cast<double>(n));

    std::vector<Eigen::MatrixXd> unit(frames.size());
    std::vector<Eigen::VectorXd> norms(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
        unit[t] = frames[t];
        norms[t] = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double nm = frames[t].row(i).norm();
            norms[t][i] = nm;
            if (nm < 1e-12)
                unit[t].row(i).setZero();
            else
                unit[t].row(i) /= nm;
        }
    }

    std::vector<Eigen::MatrixXd> dUnit;
    if (dZ_base) dUnit.assign(frames.size(), Eigen::MatrixXd::Zero(n, d));

    double acc = 0.0;
    for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
        Eigen::MatrixXd diff = unit[t] - unit[t + 1];
        acc += diff.squaredNorm();
        if (dZ_base) {
            dUnit[t] += (2.0 * scale * lambda) * diff;
            dUnit[t + 1] -= (2.0 * scale * lambda) * diff;
        }
    }
    if (dZ_base) {
        // back through y = z / |z|: dz = (dy - (dy . y) y) / |z|
        for (std::size_t t = 0; t < frames.size(); ++t)
            for (Eigen::Index i = 0; i < n; ++i) {
                if (norms[t][i] < 1e-12) continue;
                Eigen::RowVectorXd dy = dUnit[t].row(i);
                Eigen::RowVectorXd y = unit[t].row(i);
                (*dZ_base)[t].row(i) += (dy - dy.dot(y) * y) / norms[t][i];
            }
    }
    return acc * scale;
}

// Reverse pass of one encoder application.
void backward_frame(const FrameCache& cache, const ServiceGraph& g, const ModelParams& params,
                    const ViewPlan& plan, const Eigen::MatrixXd& dZ_top, GradientSet& grads) {
    const int layers = params.dims.layers;
    Eigen::MatrixXd dZ = dZ_top;

    for (int l = layers - 1; l >= 0; --l) {
        Activation act = (l + 1 < layers) ? params.activation : Activation::identity;
        Eigen::MatrixXd dP = dZ;
        if (act == Activation::relu)
            dP.array() *= (cache.P[static_cast<std::size_t>(l)].array() > 0.0).cast<double>();
        grads.gcn_w[static_cast<std::size_t>(l)].noalias() +=
            cache.A[static_cast<std::size_t>(l)].transpose() * dP;
        Eigen::MatrixXd dA = dP * params.gcn_w[static_cast<std::size_t>(l)].transpose();

        // transpose of the neighborhood aggregation
        Eigen::MatrixXd dZ_prev = Eigen::MatrixXd::Zero(dZ.rows(), dZ.cols());
        const auto& nbs = plan.neighborhoods[static_cast<std::size_t>(l)];
        for (int i = 0; i < static_cast<int>(nbs.size()); ++i)
            for (int j : nbs[static_cast<std::size_t>(i)])
                dZ_prev.row(j) += dA.row(i) / g.norm_coeff(i, j);
        dZ = std::move(dZ_prev);
    }

    // embedding MLP
    grads.embed_w[1].noalias() += cache.Hh.transpose() * dZ;
    grads.embed_b[1] += dZ.colwise().sum().transpose();
    Eigen::MatrixXd dHh = dZ * params.embed_w[1].transpose();
    Eigen::MatrixXd dU = std::move(dHh);
    if (params.activation == Activation::relu)
        dU.array() *= (cache.U.array() > 0.0).cast<double>();
    grads.embed_w[0].noalias() += cache.X.transpose() * dU;
    grads.embed_b[0] += dU.colwise().sum().transpose();
}

}  // namespace

LossBreakdown step_loss(const ModelParams& params, const ServiceGraph& g, const MetricPanel& panel,
                        const StepPlan& plan, const ObjectiveConfig& obj) {
    StepForward fwd;
    run_forward(params, g, panel, plan, fwd);
    LossBreakdown out;
    out.contrast = contrast_term(plan, fwd, obj.tau, nullptr, nullptr);
    out.temporal = temporal_term(fwd, nullptr, 0.0);
    out.total = out.contrast + obj.lambda * out.temporal;
    return out;
}

std::pair<LossBreakdown, GradientSet> grad(const ModelParams& params, const ServiceGraph& g,
                                           const MetricPanel& panel, const StepPlan& plan,
                                           const ObjectiveConfig& obj) {
    StepForward fwd;
    run_forward(params, g, panel, plan, fwd);

    const int T = plan.window_length;
    const Eigen::Index n = fwd.base_frames[0].rows();
    const Eigen::Index d = fwd.base_frames[0].cols();
    std::vector<Eigen::MatrixXd> dZ_base(static_cast<std::size_t>(T), Eigen::MatrixXd::Zero(n, d));
    std::vector<Eigen::MatrixXd> dZ_aug(static_cast<std::size_t>(T), Eigen::MatrixXd::Zero(n, d));

    LossBreakdown loss;
    loss.contrast = contrast_term(plan, fwd, obj.tau, &dZ_base, &dZ_aug);
    loss.temporal = temporal_term(fwd, &dZ_base, obj.lambda);
    loss.total = loss.contrast + obj.lambda * loss.temporal;
    if (!std::isfinite(loss.total)) throw NumericalError("step loss is non-finite");

    GradientSet grads = GradientSet::zeros_like(params);
    for (int k = 0; k < T; ++k) {
        if (dZ_base[static_cast<std::size_t>(k)].cwiseAbs().maxCoeff() != 0.0)
            backward_frame(fwd.base[static_cast<std::size_t>(k)], g, params,
                           plan.base_plans[static_cast<std::size_t>(k)],
                           dZ_base[static_cast<std::size_t>(k)], grads);
        if (!plan.aug_needed.empty() && plan.aug_needed[static_cast<std::size_t>(k)] &&
            dZ_aug[static_cast<std::size_t>(k)].cwiseAbs().maxCoeff() != 0.0)
            backward_frame(fwd.aug[static_cast<std::size_t>(k)], g, params,
                           plan.aug_plans[static_cast<std::size_t>(k)],
                           dZ_aug[static_cast<std::size_t>(k)], grads);
    }

    for (const auto& block : grad_blocks(grads)) {
        for (Eigen::Index i = 0; i < block.size; ++i)
            if (!std::isfinite(block.data[i]))
                throw NumericalError("non-finite gradient in block " + block.name);
    }
    return {loss, std::move(grads)};
}

FdCheckReport finite_diff_check(const ModelParams& params, const ServiceGraph& g,
                                const MetricPanel& panel, const StepPlan& plan,
                                const ObjectiveConfig& obj, double h, int coords_per_block,
                                std::uint64_t pick_seed) {
    ModelParams work = params;
    auto [loss, analytic] = grad(work, g, panel, plan, obj);
    (void)loss;

    auto pblocks = param_blocks(work);
    auto gblocks = grad_blocks(analytic);

    FdCheckReport report;
    SplitMix64 rng(seed_combine(pick_seed, 0xFDull));
    for (std::size_t b = 0; b < pblocks.size(); ++b) {
        std::vector<Eigen::Index> coords;
        if (coords_per_block <= 0 || coords_per_block >= pblocks[b].size) {
            coords.resize(static_cast<std::size_t>(pblocks[b].size));
            for (Eigen::Index i = 0; i < pblocks[b].size; ++i) coords[static_cast<std::size_t>(i)] = i;
        } else {
            for (int k = 0; k < coords_per_block; ++k)
                coords.push_back(static_cast<Eigen::Index>(
                    rng.uniform_int(static_cast<std::uint64_t>(pblocks[b].size))));
        }

        double max_abs_diff = 0.0;
        double max_abs_grad = 0.0;
        for (Eigen::Index i : coords) {
            double saved = pblocks[b].data[i];
            pblocks[b].data[i] = saved + h;
            double plus = step_loss(work, g, panel, plan, obj).total;
            pblocks[b].data[i] = saved - h;
            double minus = step_loss(work, g, panel, plan, obj).total;
            pblocks[b].data[i] = saved;
            double fd = (plus - minus) / (2.0 * h);
            double ga = gblocks[b].data[i];
            max_abs_diff = std::max(max_abs_diff, std::abs(fd - ga));
            max_abs_grad = std::max({max_abs_grad, std::abs(fd), std::abs(ga)});
        }
        double rel = max_abs_diff / std::max(max_abs_grad, 1e-6);
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_block = pblocks[b].name;
        }
    }
    return report;
}

void optimizer_step(ModelParams& params, GradientSet& grads, OptimizerState& state,
                    OptimizerKind kind, double learning_rate) {
    auto p = param_blocks(params);
    auto g = grad_blocks(grads);
    auto m = grad_blocks(state.m);
    if (kind == OptimizerKind::sgd_momentum) {
        for (std::size_t b = 0; b < p.size(); ++b)
            for (Eigen::Index i = 0; i < p[b].size; ++i) {
                m[b].data[i] = 0.9 * m[b].data[i] + g[b].data[i];
                double step = learning_rate * m[b].data[i];
                if (step != 0.0) p[b].data[i] -= step;
            }
        return;
    }
    auto v = grad_blocks(state.v);
    ++state.step;
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t b = 0; b < p.size(); ++b)
        for (Eigen::Index i = 0; i < p[b].size; ++i) {
            m[b].data[i] = beta1 * m[b].data[i] + (1.0 - beta1) * g[b].data[i];
            v[b].data[i] = beta2 * v[b].data[i] + (1.0 - beta2) * g[b].data[i] * g[b].data[i];
            double mhat = m[b].data[i] / bc1;
            double vhat = v[b].data[i] / bc2;
            double step = learning_rate * mhat / (std::sqrt(vhat) + eps);
            if (step != 0.0) p[b].data[i] -= step;
        }
}

std::pair<ModelParams, TrainHistory> train_model(const MetricPanel& panel, const ServiceGraph& g,
                                                 const EncoderConfig& enc, const ObjectiveConfig& obj,
                                                 const TrainConfig& cfg) {
    cfg.validate();
    obj.validate();
    if (panel.node_ids != g.node_ids())
        throw ConfigError("train_model: panel node order does not match graph");
    if (panel.num_steps() < cfg.window_length)
        throw ConfigError("train_model: panel shorter than one training window");

    ModelParams params = init_params(enc.dims, enc.activation, cfg.seed);
    OptimizerState state = OptimizerState::zeros_like(params);

    std::vector<int> window_starts;
    for (int w = 0; w + cfg.window_length <= panel.num_steps(); w += cfg.window_stride)
        window_starts.push_back(w);

    TrainHistory history;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        double sum_total = 0.0, sum_contrast = 0.0, sum_temporal = 0.0;
        for (std::size_t k = 0; k < window_starts.size(); ++k) {
            std::uint64_t step_seed = seed_combine(
                seed_combine(cfg.seed, static_cast<std::uint64_t>(epoch)), static_cast<std::uint64_t>(k));
            StepPlan plan = make_step_plan(panel, g, enc, obj, window_starts[k], cfg.window_length,
                                           cfg.anchors_per_step, step_seed);
            LossBreakdown loss;
            GradientSet grads;
            try {
                std::tie(loss, grads) = grad(params, g, panel, plan, obj);
            } catch (const NumericalError& e) {
                throw NumericalError("epoch " + std::to_string(epoch) + " window " + std::to_string(k) +
                                     ": " + e.what());
            }
            if (cfg.grad_check && epoch == 0 && k == 0) {
                FdCheckReport report = finite_diff_check(params, g, panel, plan, obj, 1e-5, 8,
                                                         seed_combine(cfg.seed, 0xC4ECull));
                if (report.max_rel_error >= 1e-4)
                    throw NumericalError("gradient check failed: relative error " +
                                         std::to_string(report.max_rel_error) + " in block " +
                                         report.worst_block);
            }
            optimizer_step(params, grads, state, cfg.optimizer, cfg.learning_rate);
            sum_total += loss.total;
            sum_contrast += loss.contrast;
            sum_temporal += loss.temporal;
        }
        double inv = 1.0 / static_cast<double>(window_starts.size());
        history.total.push_back(sum_total * inv);
        history.contrast.push_back(sum_contrast * inv);
        history.temporal.push_back(sum_temporal * inv);
        history.seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return {std::move(params), std::move(history)};
}

}  // namespace depanom
