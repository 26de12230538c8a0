#include "depanom/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>

#include "depanom/errors.hpp"
#include "depanom/io_util.hpp"
#include "depanom/rng.hpp"

namespace depanom {

const std::vector<std::string>& canonical_features() {
    static const std::vector<std::string> names = {"cpu",    "mem",     "io",        "net_in",
                                                   "net_out", "latency", "error_rate"};
    return names;
}

MetricPanel slice_steps(const MetricPanel& panel, StepRange range) {
    if (range.begin < 0 || range.end > panel.num_steps() || range.begin >= range.end)
        throw ConfigError("step range [" + std::to_string(range.begin) + ", " + std::to_string(range.end) +
                          ") outside panel with " + std::to_string(panel.num_steps()) + " steps");
    MetricPanel out;
    out.node_ids = panel.node_ids;
    out.feature_names = panel.feature_names;
    out.step_seconds = panel.step_seconds;
    out.frames.assign(panel.frames.begin() + range.begin, panel.frames.begin() + range.end);
    out.labels = panel.labels.middleCols(range.begin, range.length());
    out.timestamps.assign(panel.timestamps.begin() + range.begin, panel.timestamps.begin() + range.end);
    return out;
}

MetricPanel reorder_nodes(const MetricPanel& panel, const std::vector<std::string>& target_order) {
    if (target_order == panel.node_ids) return panel;
    if (target_order.size() != panel.node_ids.size())
        throw ConfigError("reorder_nodes: node sets differ in size");
    std::vector<int> source(target_order.size(), -1);
    for (std::size_t k = 0; k < target_order.size(); ++k) {
        auto it = std::find(panel.node_ids.begin(), panel.node_ids.end(), target_order[k]);
        if (it == panel.node_ids.end())
            throw ConfigError("reorder_nodes: unknown node id '" + target_order[k] + "'");
        source[k] = static_cast<int>(it - panel.node_ids.begin());
    }
    MetricPanel out = panel;
    out.node_ids = target_order;
    for (int t = 0; t < panel.num_steps(); ++t) {
        auto& frame = out.frames[static_cast<std::size_t>(t)];
        for (std::size_t k = 0; k < source.size(); ++k) {
            frame.row(static_cast<Eigen::Index>(k)) =
                panel.frames[static_cast<std::size_t>(t)].row(source[k]);
            out.labels(static_cast<Eigen::Index>(k), t) = panel.labels(source[k], t);
        }
    }
    return out;
}

namespace {

struct RawRow {
    std::int64_t timestamp = 0;
    std::string service;
    Eigen::VectorXd values;
    int label = -1;    // -1 unlabeled
    bool usable = true;  // false: non-finite values; keeps its grid slot, leaves a gap
};

int parse_label_field(const std::string& field, const std::string& context) {
    if (field.empty()) return -1;
    if (field == "0") return 0;
    if (field == "1") return 1;
    throw ConfigError(context + ": label must be 0, 1 or empty, got '" + field + "'");
}

std::vector<RawRow> read_rows_csv(const std::string& path, const LoadSchema& schema) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open metrics file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("metrics file is empty: " + path);
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

    auto header = split_csv_line(line);
    auto col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw ConfigError(path + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    std::size_t ts_col = col("timestamp");
    std::size_t svc_col = col("service");
    std::size_t label_col = col("label");
    std::vector<std::size_t> feat_cols;
    for (const auto& f : schema.feature_columns) feat_cols.push_back(col(f));

    std::vector<RawRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw ConfigError(path + " line " + std::to_string(lineno) + ": expected " +
                              std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        const std::string ctx = path + " line " + std::to_string(lineno);
        RawRow row;
        row.timestamp = parse_int_field(fields[ts_col], ctx);
        row.service = fields[svc_col];
        row.label = parse_label_field(fields[label_col], ctx);
        row.values.resize(static_cast<Eigen::Index>(feat_cols.size()));
        for (std::size_t k = 0; k < feat_cols.size(); ++k) {
            double v = parse_double_field(fields[feat_cols[k]], ctx);
            if (!std::isfinite(v)) row.usable = false;
            row.values[static_cast<Eigen::Index>(k)] = v;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<RawRow> read_rows_jsonl(const std::string& path, const LoadSchema& schema) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open metrics file: " + path);
    std::vector<RawRow> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const std::string ctx = path + " line " + std::to_string(lineno);
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(ctx + ": invalid JSON (" + std::string(e.what()) + ")");
        }
        RawRow row;
        if (!obj.contains("timestamp") || !obj.contains("service"))
            throw ConfigError(ctx + ": object needs 'timestamp' and 'service'");
        row.timestamp = obj["timestamp"].get<std::int64_t>();
        row.service = obj["service"].get<std::string>();
        if (obj.contains("label") && !obj["label"].is_null()) {
            int lb = obj["label"].get<int>();
            if (lb != 0 && lb != 1) throw ConfigError(ctx + ": label must be 0 or 1");
            row.label = lb;
        }
        row.values.resize(static_cast<Eigen::Index>(schema.feature_columns.size()));
        for (std::size_t k = 0; k < schema.feature_columns.size(); ++k) {
            const auto& name = schema.feature_columns[k];
            if (!obj.contains(name)) throw ConfigError(ctx + ": missing field '" + name + "'");
            double v = obj[name].is_null() ? std::nan("") : obj[name].get<double>();
            if (!std::isfinite(v)) row.usable = false;
            row.values[static_cast<Eigen::Index>(k)] = v;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

LoadResult load_panel(const std::string& path, const LoadSchema& schema) {
    LoadResult result;
    std::vector<RawRow> rows;
    if (has_suffix(path, ".jsonl") || has_suffix(path, ".ndjson"))
        rows = read_rows_jsonl(path, schema);
    else
        rows = read_rows_csv(path, schema);
    for (const auto& r : rows)
        if (!r.usable) ++result.rejected_rows;
    bool any_usable = false;
    for (const auto& r : rows) any_usable = any_usable || r.usable;
    if (!any_usable) throw ConfigError(path + ": no usable rows");

    // Node ordering: explicit schema order, else lexicographic over ids seen.
    std::vector<std::string> nodes;
    if (!schema.node_order.empty()) {
        nodes = schema.node_order;
        std::set<std::string> known(nodes.begin(), nodes.end());
        for (const auto& r : rows)
            if (!known.count(r.service))
                throw ConfigError(path + ": unknown service id '" + r.service + "'");
    } else {
        std::set<std::string> ids;
        for (const auto& r : rows) ids.insert(r.service);
        nodes.assign(ids.begin(), ids.end());
    }
    std::map<std::string, int> node_index;
    for (std::size_t i = 0; i < nodes.size(); ++i) node_index[nodes[i]] = static_cast<int>(i);

    // Monotonicity per node, grid inference over all timestamps.
    std::map<std::string, std::int64_t> last_ts;
    std::set<std::int64_t> ts_set;
    for (const auto& r : rows) {
        auto it = last_ts.find(r.service);
        if (it != last_ts.end() && r.timestamp <= it->second)
            throw ConfigError(path + ": non-monotonic timestamps for service '" + r.service + "'");
        last_ts[r.service] = r.timestamp;
        ts_set.insert(r.timestamp);
    }
    std::vector<std::int64_t> ts(ts_set.begin(), ts_set.end());
    std::int64_t step = 0;
    for (std::size_t i = 1; i < ts.size(); ++i) {
        std::int64_t d = ts[i] - ts[i - 1];
        if (step == 0 || d < step) step = d;
    }
    if (step == 0) step = 60;  // single distinct timestamp
    const std::int64_t t0 = ts.front();
    const std::int64_t t_last = ts.back();
    if ((t_last - t0) % step != 0)
        throw ConfigError(path + ": timestamps do not lie on a regular grid");
    const int num_steps = static_cast<int>((t_last - t0) / step) + 1;
    const int n = static_cast<int>(nodes.size());
    const int d = static_cast<int>(schema.feature_columns.size());

    MetricPanel panel;
    panel.node_ids = nodes;
    panel.feature_names = schema.feature_columns;
    panel.step_seconds = static_cast<double>(step);
    panel.timestamps.resize(static_cast<std::size_t>(num_steps));
    for (int t = 0; t < num_steps; ++t)
        panel.timestamps[static_cast<std::size_t>(t)] = t0 + step * t;
    panel.frames.assign(static_cast<std::size_t>(num_steps), Eigen::MatrixXd::Zero(n, d));
    panel.labels = Eigen::MatrixXi::Constant(n, num_steps, -1);

    Eigen::MatrixXi present = Eigen::MatrixXi::Zero(n, num_steps);
    for (const auto& r : rows) {
        std::int64_t off = r.timestamp - t0;
        if (off % step != 0)
            throw ConfigError(path + ": timestamp " + std::to_string(r.timestamp) + " off the regular grid");
        if (!r.usable) continue;  // rejected rows keep their grid slot as a gap
        int t = static_cast<int>(off / step);
        int i = node_index[r.service];
        panel.frames[static_cast<std::size_t>(t)].row(i) = r.values.transpose();
        panel.labels(i, t) = r.label;
        present(i, t) = 1;
    }

    // Gap filling: carry-forward, leading gaps take the node's feature means.
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
        int count = 0;
        for (int t = 0; t < num_steps; ++t) {
            if (present(i, t)) {
                mean += panel.frames[static_cast<std::size_t>(t)].row(i).transpose();
                ++count;
            }
        }
        if (count == 0)
            throw ConfigError(path + ": no usable samples for service '" + nodes[static_cast<std::size_t>(i)] + "'");
        mean /= static_cast<double>(count);

        int last_present = -1;
        for (int t = 0; t < num_steps; ++t) {
            if (present(i, t)) {
                last_present = t;
                continue;
            }
            if (last_present >= 0)
                panel.frames[static_cast<std::size_t>(t)].row(i) =
                    panel.frames[static_cast<std::size_t>(last_present)].row(i);
            else
                panel.frames[static_cast<std::size_t>(t)].row(i) = mean.transpose();
            ++result.filled_cells;
        }
    }

    result.panel = std::move(panel);
    return result;
}

std::pair<MetricPanel, StandardizationStats> standardize(const MetricPanel& panel, StepRange train_steps) {
    if (train_steps.begin < 0 || train_steps.end > panel.num_steps() || train_steps.length() <= 0)
        throw ConfigError("standardize: training slice empty or outside panel");

    const int n = panel.num_nodes();
    const int d = panel.dim();
    const double cells = static_cast<double>(n) * static_cast<double>(train_steps.length());

    StandardizationStats stats;
    stats.mean = Eigen::VectorXd::Zero(d);
    stats.stddev = Eigen::VectorXd::Ones(d);
    stats.clamped.assign(static_cast<std::size_t>(d), 0);

    for (int t = train_steps.begin; t < train_steps.end; ++t)
        stats.mean += panel.frames[static_cast<std::size_t>(t)].colwise().sum().transpose();
    stats.mean /= cells;

    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (int t = train_steps.begin; t < train_steps.end; ++t) {
        Eigen::MatrixXd centered =
            panel.frames[static_cast<std::size_t>(t)].rowwise() - stats.mean.transpose();
        var += centered.array().square().colwise().sum().matrix().transpose();
    }
    var /= cells;  // population variance

    for (int f = 0; f < d; ++f) {
        double s = std::sqrt(var[f]);
        if (s > 0.0) {
            stats.stddev[f] = s;
        } else {
            stats.stddev[f] = 1.0;
            stats.clamped[static_cast<std::size_t>(f)] = 1;
        }
    }
    return {apply_standardization(panel, stats), stats};
}

MetricPanel apply_standardization(const MetricPanel& panel, const StandardizationStats& stats) {
    if (stats.mean.size() != panel.dim())
        throw ConfigError("standardization stats dimension mismatch");
    MetricPanel out = panel;
    for (auto& frame : out.frames) {
        frame.rowwise() -= stats.mean.transpose();
        frame.array().rowwise() /= stats.stddev.transpose().array();
    }
    return out;
}

MetricPanel inject_noise(const MetricPanel& panel, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
    if (sigma == 0.0) return panel;
    MetricPanel out = panel;
    SplitMix64 rng(seed_combine(seed, 0x6E6F6973ull));
    for (auto& frame : out.frames)
        for (Eigen::Index i = 0; i < frame.rows(); ++i)
            for (Eigen::Index f = 0; f < frame.cols(); ++f)
                frame(i, f) += sigma * rng.gauss();
    return out;
}

MetricPanel mask_labels(const MetricPanel& panel, double keep_ratio, std::uint64_t seed) {
    if (keep_ratio < 0.0 || keep_ratio > 1.0) throw ConfigError("keep_ratio must be in [0, 1]");
    if (keep_ratio == 1.0) return panel;

    const int n = panel.num_nodes();
    const int steps = panel.num_steps();
    std::vector<std::pair<int, int>> normal_cells, anomaly_cells;
    for (int i = 0; i < n; ++i)
        for (int t = 0; t < steps; ++t) {
            if (panel.labels(i, t) == 0) normal_cells.emplace_back(i, t);
            else if (panel.labels(i, t) == 1) anomaly_cells.emplace_back(i, t);
        }

    const std::int64_t labeled = static_cast<std::int64_t>(normal_cells.size() + anomaly_cells.size());
    std::int64_t keep_total = std::llround(keep_ratio * static_cast<double>(labeled));
    keep_total = std::min(keep_total, labeled);

    std::int64_t keep_anom = 0;
    if (keep_total > 0 && !anomaly_cells.empty()) {
        keep_anom = std::llround(keep_ratio * static_cast<double>(anomaly_cells.size()));
        keep_anom = std::max<std::int64_t>(keep_anom, 1);
        keep_anom = std::min<std::int64_t>({keep_anom, static_cast<std::int64_t>(anomaly_cells.size()), keep_total});
    }
    std::int64_t keep_norm = keep_total - keep_anom;
    if (keep_norm > static_cast<std::int64_t>(normal_cells.size())) {
        std::int64_t excess = keep_norm - static_cast<std::int64_t>(normal_cells.size());
        keep_norm -= excess;
        keep_anom = std::min<std::int64_t>(keep_anom + excess, static_cast<std::int64_t>(anomaly_cells.size()));
    }

    auto pick = [](std::vector<std::pair<int, int>>& cells, std::int64_t k, SplitMix64& rng) {
        for (std::int64_t j = 0; j < k; ++j) {
            std::size_t r = static_cast<std::size_t>(j) +
                            static_cast<std::size_t>(rng.uniform_int(cells.size() - static_cast<std::size_t>(j)));
            std::swap(cells[static_cast<std::size_t>(j)], cells[r]);
        }
        cells.resize(static_cast<std::size_t>(k));
    };
    SplitMix64 rng(seed_combine(seed, 0x6D61736Bull));
    pick(anomaly_cells, keep_anom, rng);
    pick(normal_cells, keep_norm, rng);

    MetricPanel out = panel;
    out.labels.setConstant(-1);
    for (const auto& [i, t] : anomaly_cells) out.labels(i, t) = 1;
    for (const auto& [i, t] : normal_cells) out.labels(i, t) = 0;
    return out;
}

void write_metrics_csv(const std::string& path, const MetricPanel& panel) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write metrics file: " + path);
    out << "timestamp,service";
    for (const auto& f : panel.feature_names) out << ',' << f;
    out << ",label\n";
    for (int t = 0; t < panel.num_steps(); ++t) {
        for (int i = 0; i < panel.num_nodes(); ++i) {
            out << panel.timestamps[static_cast<std::size_t>(t)] << ',' << panel.node_ids[static_cast<std::size_t>(i)];
            for (int f = 0; f < panel.dim(); ++f)
                out << ',' << format_double(panel.frames[static_cast<std::size_t>(t)](i, f));
            int lb = panel.labels(i, t);
            out << ',';
            if (lb >= 0) out << lb;
            out << '\n';
        }
    }
}

}  // namespace depanom
