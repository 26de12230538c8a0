#include "depanom/eval.hpp"

#include <algorithm>
#include <fstream>

#include "depanom/errors.hpp"
#include "depanom/io_util.hpp"

namespace depanom {

PrfResult prf(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) throw ConfigError("prf: size mismatch");
    PrfResult r;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        bool pred = predictions[i] == 1;
        bool truth = labels[i] == 1;
        if (pred && truth) ++r.counts.tp;
        else if (pred && !truth) ++r.counts.fp;
        else if (!pred && truth) ++r.counts.fn;
        else ++r.counts.tn;
    }
    long pp = r.counts.tp + r.counts.fp;
    long ap = r.counts.tp + r.counts.fn;
    r.precision = pp > 0 ? static_cast<double>(r.counts.tp) / static_cast<double>(pp) : 0.0;
    r.recall = ap > 0 ? static_cast<double>(r.counts.tp) / static_cast<double>(ap) : 0.0;
    r.f1 = (r.precision + r.recall) > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

PrfResult prf(const Eigen::MatrixXi& predictions, const Eigen::MatrixXi& labels) {
    if (predictions.rows() != labels.rows() || predictions.cols() != labels.cols())
        throw ConfigError("prf: shape mismatch");
    std::vector<int> p, l;
    p.reserve(static_cast<std::size_t>(labels.size()));
    l.reserve(static_cast<std::size_t>(labels.size()));
    for (Eigen::Index t = 0; t < labels.cols(); ++t)
        for (Eigen::Index i = 0; i < labels.rows(); ++i) {
            p.push_back(predictions(i, t));
            l.push_back(labels(i, t));
        }
    return prf(p, l);
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ConfigError("auc: size mismatch");
    std::vector<std::size_t> order;
    long pos = 0, neg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) continue;
        order.push_back(i);
        if (labels[i] == 1) ++pos;
        else ++neg;
    }
    if (pos == 0 || neg == 0) throw ConfigError("auc needs both classes among labeled cells");

    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // average ranks over tie groups; rank sums of halves stay exact in doubles
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
        i = j + 1;
    }
    double u = pos_rank_sum - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double auc(const Eigen::MatrixXd& scores, const Eigen::MatrixXi& labels) {
    std::vector<double> s;
    std::vector<int> l;
    for (Eigen::Index t = 0; t < labels.cols(); ++t)
        for (Eigen::Index i = 0; i < labels.rows(); ++i) {
            s.push_back(scores(i, t));
            l.push_back(labels(i, t));
        }
    return auc(s, l);
}

void write_report_csv(const std::string& path, const std::vector<EvalReport>& reports) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write report file: " + path);
    out << "knob1,knob2,precision,recall,f1,auc,tp,fp,tn,fn\n";
    for (const auto& r : reports) {
        std::string knob1, knob2;
        auto it = r.sweep_coords.begin();
        if (it != r.sweep_coords.end()) {
            knob1 = it->first + "=" + format_double(it->second);
            ++it;
            if (it != r.sweep_coords.end()) knob2 = it->first + "=" + format_double(it->second);
        }
        out << knob1 << ',' << knob2 << ',' << format_double(r.precision) << ','
            << format_double(r.recall) << ',' << format_double(r.f1) << ',' << format_double(r.auc)
            << ',' << r.counts.tp << ',' << r.counts.fp << ',' << r.counts.tn << ',' << r.counts.fn
            << '\n';
    }
}

std::vector<RollingPoint> rolling_eval(const Eigen::MatrixXd& scores, const Eigen::MatrixXi& labels,
                                       double threshold, int window_steps) {
    if (window_steps < 1) throw ConfigError("rolling window must be >= 1 steps");
    const int steps = static_cast<int>(labels.cols());
    std::vector<RollingPoint> out;
    for (int start = 0; start + window_steps <= steps; ++start) {
        RollingPoint point;
        point.window_start = start;
        Eigen::MatrixXd s = scores.middleCols(start, window_steps);
        Eigen::MatrixXi l = labels.middleCols(start, window_steps);
        Eigen::MatrixXi preds = (s.array() > threshold).cast<int>();
        point.prf = prf(preds, l);
        bool pos = false, neg = false;
        for (Eigen::Index t = 0; t < l.cols() && !(pos && neg); ++t)
            for (Eigen::Index i = 0; i < l.rows(); ++i) {
                if (l(i, t) == 1) pos = true;
                if (l(i, t) == 0) neg = true;
            }
        if (pos && neg) {
            point.auc = auc(s, l);
            point.auc_defined = true;
        }
        out.push_back(point);
    }
    return out;
}

void write_rolling_csv(const std::string& path, const std::vector<RollingPoint>& points) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write rolling file: " + path);
    out << "window_start,precision,recall,f1,auc\n";
    for (const auto& p : points) {
        out << p.window_start << ',' << format_double(p.prf.precision) << ','
            << format_double(p.prf.recall) << ',' << format_double(p.prf.f1) << ',';
        if (p.auc_defined) out << format_double(p.auc);
        out << '\n';
    }
}

}  // namespace depanom
