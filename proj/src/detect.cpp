#include "depanom/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "depanom/errors.hpp"
#include "depanom/io_util.hpp"
#include "depanom/rng.hpp"

namespace depanom {

ReferenceBank build_reference(const ModelParams& params, const ServiceGraph& g,
                              const MetricPanel& panel, StepRange train_steps,
                              const DetectConfig& cfg, int neighborhood_cap, std::uint64_t seed) {
    if (cfg.k < 1) throw ConfigError("detect k must be >= 1");
    if (cfg.bank_capacity < 1) throw ConfigError("bank capacity must be >= 1");
    if (train_steps.begin < 0 || train_steps.end > panel.num_steps() || train_steps.length() <= 0)
        throw ConfigError("build_reference: training slice outside panel");

    MetricPanel train = slice_steps(panel, train_steps);
    std::vector<Eigen::MatrixXd> frames =
        encode_panel(train.frames, g, params, neighborhood_cap, seed_combine(seed, 0x1BA4Full));

    std::vector<std::pair<int, int>> cells;
    for (int t = 0; t < train.num_steps(); ++t)
        for (int i = 0; i < train.num_nodes(); ++i)
            if (train.labels(i, t) != 1) cells.emplace_back(i, train_steps.begin + t);
    if (cells.empty()) throw ConfigError("no normal reference");

    if (static_cast<int>(cells.size()) > cfg.bank_capacity) {
        SplitMix64 rng(seed_combine(seed, 0xD045ull));
        for (int k = 0; k < cfg.bank_capacity; ++k) {
            std::size_t r = static_cast<std::size_t>(k) +
                            static_cast<std::size_t>(rng.uniform_int(cells.size() - static_cast<std::size_t>(k)));
            std::swap(cells[static_cast<std::size_t>(k)], cells[r]);
        }
        cells.resize(static_cast<std::size_t>(cfg.bank_capacity));
        std::sort(cells.begin(), cells.end(),
                  [](const auto& a, const auto& b) { return a.second != b.second ? a.second < b.second : a.first < b.first; });
    }

    ReferenceBank bank;
    bank.k = std::min(cfg.k, static_cast<int>(cells.size()));
    bank.provenance = cells;
    bank.vectors.resize(static_cast<Eigen::Index>(cells.size()), params.dims.d_emb);
    for (std::size_t r = 0; r < cells.size(); ++r) {
        auto [node, step] = cells[r];
        bank.vectors.row(static_cast<Eigen::Index>(r)) =
            frames[static_cast<std::size_t>(step - train_steps.begin)].row(node);
    }
    return bank;
}

namespace {

// Row-normalize with the cosine convention: near-zero rows become zero
// vectors, so their similarity with everything is 0 (distance 1).
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        double n = out.row(i).norm();
        if (n < 1e-12)
            out.row(i).setZero();
        else
            out.row(i) /= n;
    }
    return out;
}

}  // namespace

Eigen::MatrixXd score_frames(const std::vector<Eigen::MatrixXd>& frames, const ReferenceBank& bank) {
    if (bank.size() == 0) throw ConfigError("reference bank is empty");
    if (bank.k < 1 || bank.k > bank.size())
        throw ConfigError("detect k must lie in [1, bank size]");

    const int steps = static_cast<int>(frames.size());
    const int n = steps > 0 ? static_cast<int>(frames[0].rows()) : 0;
    Eigen::MatrixXd scores(n, steps);
    Eigen::MatrixXd bank_n = normalize_rows(bank.vectors).transpose();  // d x B

    std::vector<double> sims(static_cast<std::size_t>(bank.size()));
    for (int t = 0; t < steps; ++t) {
        Eigen::MatrixXd q = normalize_rows(frames[static_cast<std::size_t>(t)]);
        Eigen::MatrixXd sim = q * bank_n;  // n x B, cosine similarities
        for (int i = 0; i < n; ++i) {
            for (int b = 0; b < bank.size(); ++b)
                sims[static_cast<std::size_t>(b)] = sim(i, b);
            std::nth_element(sims.begin(), sims.begin() + (bank.k - 1), sims.end(),
                             std::greater<double>());
            double acc = 0.0;
            for (int b = 0; b < bank.k; ++b) acc += 1.0 - std::clamp(sims[static_cast<std::size_t>(b)], -1.0, 1.0);
            scores(i, t) = acc / static_cast<double>(bank.k);
        }
    }
    return scores;
}

Eigen::MatrixXd score_panel(const ModelParams& params, const ServiceGraph& g,
                            const MetricPanel& panel, const ReferenceBank& bank,
                            int neighborhood_cap, std::uint64_t seed) {
    std::vector<Eigen::MatrixXd> frames =
        encode_panel(panel.frames, g, params, neighborhood_cap, seed_combine(seed, 0x5C04Eull));
    return score_frames(frames, bank);
}

double select_threshold(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ConfigError("select_threshold: size mismatch");
    long pos = 0, neg = 0;
    for (int l : labels) {
        if (l == 1) ++pos;
        else if (l == 0) ++neg;
        else throw ConfigError("select_threshold: labels must be 0 or 1");
    }
    if (pos == 0 || neg == 0) throw ConfigError("validation labels contain a single class");

    std::vector<double> distinct = scores;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) throw ConfigError("no separating candidate");

    // Sort cells by score once; sweeping candidates from below keeps the
    // first (smallest) maximizer thanks to the strict > comparison.
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double best_f1 = -1.0;
    double best_thr = 0.0;
    std::size_t cursor = 0;
    long tp = pos, fp = neg;  // everything predicted positive below the lowest candidate
    for (std::size_t c = 0; c + 1 < distinct.size(); ++c) {
        double thr = distinct[c] + 0.5 * (distinct[c + 1] - distinct[c]);
        while (cursor < order.size() && scores[order[cursor]] <= thr) {
            if (labels[order[cursor]] == 1) --tp;
            else --fp;
            ++cursor;
        }
        double precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        double recall = static_cast<double>(tp) / static_cast<double>(pos);
        double f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        if (f1 > best_f1) {
            best_f1 = f1;
            best_thr = thr;
        }
    }
    return best_thr;
}

Eigen::MatrixXi classify(const Eigen::MatrixXd& scores, double threshold) {
    return (scores.array() > threshold).cast<int>();
}

void write_scores_csv(const std::string& path, const MetricPanel& panel, const Eigen::MatrixXd& scores,
                      const Eigen::MatrixXi& predictions) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write scores file: " + path);
    out << "service,timestamp,score,prediction,label\n";
    for (int t = 0; t < panel.num_steps(); ++t)
        for (int i = 0; i < panel.num_nodes(); ++i) {
            out << panel.node_ids[static_cast<std::size_t>(i)] << ','
                << panel.timestamps[static_cast<std::size_t>(t)] << ',' << format_double(scores(i, t))
                << ',' << predictions(i, t) << ',';
            if (panel.labels(i, t) >= 0) out << panel.labels(i, t);
            out << '\n';
        }
}

}  // namespace depanom
