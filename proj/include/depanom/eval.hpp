#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

// Detection metrics over labeled node-time cells (label -1 cells are always
// excluded) and the time-resolved rolling variant.

namespace depanom {

struct Counts {
    long tp = 0;
    long fp = 0;
    long tn = 0;
    long fn = 0;
};

struct PrfResult {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    Counts counts;
};

// precision = tp/(tp+fp) (0 when nothing predicted positive),
// recall = tp/(tp+fn) (0 when no positive labels), f1 harmonic mean.
PrfResult prf(const Eigen::MatrixXi& predictions, const Eigen::MatrixXi& labels);
PrfResult prf(const std::vector<int>& predictions, const std::vector<int>& labels);

// Rank-based (Mann-Whitney) AUC with ties at half credit. Throws when the
// labeled cells contain a single class.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);
double auc(const Eigen::MatrixXd& scores, const Eigen::MatrixXi& labels);

struct EvalReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    Counts counts;
    std::map<std::string, double> sweep_coords;  // swept knob -> value
};

void write_report_csv(const std::string& path, const std::vector<EvalReport>& reports);

struct RollingPoint {
    int window_start = 0;
    PrfResult prf;
    double auc = 0.0;
    bool auc_defined = false;  // false when the window lacks both classes
};

// Metrics recomputed over sliding windows with the global threshold.
std::vector<RollingPoint> rolling_eval(const Eigen::MatrixXd& scores, const Eigen::MatrixXi& labels,
                                       double threshold, int window_steps);

void write_rolling_csv(const std::string& path, const std::vector<RollingPoint>& points);

}  // namespace depanom
