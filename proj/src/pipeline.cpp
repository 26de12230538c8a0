#include "depanom/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "depanom/errors.hpp"
#include "depanom/io_util.hpp"
#include "depanom/rng.hpp"

namespace depanom {

GeneratedData generate_scenario(const RunConfig& cfg) {
    if (!cfg.has_scenario) throw ConfigError("config has no [scenario] section");
    GeneratedData out;
    auto [topo, edges] = generate_topology(cfg.tiers, cfg.scenario.seed);
    out.topology = std::move(topo);
    out.edges = std::move(edges);

    ScenarioConfig scenario = cfg.scenario;
    if (cfg.auto_fault.enabled) {
        auto extra = auto_faults(out.topology, cfg.auto_fault.count, cfg.auto_fault.intensity,
                                 cfg.auto_fault.duration, cfg.auto_fault.propagate, scenario.steps,
                                 scenario.seed);
        scenario.faults.insert(scenario.faults.end(), extra.begin(), extra.end());
    }
    out.panel = simulate(out.topology, scenario);
    return out;
}

PreparedData prepare(const ServiceGraph& g, const MetricPanel& raw_in, const RunConfig& cfg) {
    // align the node axis with the graph's lexicographic order when needed
    MetricPanel raw = raw_in.node_ids == g.node_ids() ? raw_in : reorder_nodes(raw_in, g.node_ids());
    const int steps = raw.num_steps();
    PreparedData data;
    data.graph = g;
    data.train_r = cfg.train_range(steps);
    data.val_r = cfg.val_range(steps);
    data.test_r = cfg.test_range(steps);
    if (data.train_r.length() < cfg.train.window_length)
        throw ConfigError("training split shorter than one optimizer window");
    if (data.val_r.length() < 1 || data.test_r.length() < 1)
        throw ConfigError("validation/test splits are empty");

    auto [standardized, stats] = standardize(raw, data.train_r);
    data.stats = std::move(stats);
    if (cfg.noise_sigma > 0.0)
        standardized = inject_noise(standardized, cfg.noise_sigma, seed_combine(cfg.seed, 0x4E01ull));
    data.truth = standardized;
    data.work = mask_labels(standardized, cfg.label_ratio, seed_combine(cfg.seed, 0x3A5Cull));
    return data;
}

namespace {

double quantile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    if (values.empty()) throw ConfigError("quantile of empty set");
    double pos = q * static_cast<double>(values.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, values.size() - 1);
    double frac = pos - std::floor(pos);
    return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace

EvalOutputs evaluate(const PreparedData& data, const ModelParams& params, const RunConfig& cfg) {
    EvalOutputs out;
    ReferenceBank bank = build_reference(params, data.graph, data.work, data.train_r, cfg.detect,
                                         cfg.encoder.neighborhood_cap, seed_combine(cfg.seed, 0xBA4Cull));
    out.scores = score_panel(params, data.graph, data.work, bank, cfg.encoder.neighborhood_cap,
                             seed_combine(cfg.seed, 0x5C04Eull));

    // threshold from the validation split, using only surviving (masked) labels
    std::vector<double> val_scores;
    std::vector<int> val_labels;
    bool has_pos = false, has_neg = false;
    for (int t = data.val_r.begin; t < data.val_r.end; ++t)
        for (int i = 0; i < data.work.num_nodes(); ++i) {
            int l = data.work.labels(i, t);
            if (l < 0) continue;
            val_scores.push_back(out.scores(i, t));
            val_labels.push_back(l);
            if (l == 1) has_pos = true;
            if (l == 0) has_neg = true;
        }

    if (has_pos && has_neg) {
        out.threshold = select_threshold(val_scores, val_labels);
    } else {
        // single-class (or empty) validation labels: fall back to a score
        // quantile matching the labeled anomaly share seen anywhere
        long labeled = 0, anomalous = 0;
        for (int t = 0; t < data.work.num_steps(); ++t)
            for (int i = 0; i < data.work.num_nodes(); ++i) {
                if (data.work.labels(i, t) >= 0) ++labeled;
                if (data.work.labels(i, t) == 1) ++anomalous;
            }
        double share = labeled > 0 ? static_cast<double>(anomalous) / static_cast<double>(labeled) : 0.0;
        share = std::clamp(share, 0.01, 0.5);
        std::vector<double> all_val;
        for (int t = data.val_r.begin; t < data.val_r.end; ++t)
            for (int i = 0; i < data.work.num_nodes(); ++i) all_val.push_back(out.scores(i, t));
        out.threshold = quantile(std::move(all_val), 1.0 - share);
        out.threshold_from_fallback = true;
    }

    out.predictions = classify(out.scores, out.threshold);

    Eigen::MatrixXi test_preds = out.predictions.middleCols(data.test_r.begin, data.test_r.length());
    Eigen::MatrixXi test_labels = data.truth.labels.middleCols(data.test_r.begin, data.test_r.length());
    Eigen::MatrixXd test_scores = out.scores.middleCols(data.test_r.begin, data.test_r.length());
    PrfResult p = prf(test_preds, test_labels);
    out.test_report.precision = p.precision;
    out.test_report.recall = p.recall;
    out.test_report.f1 = p.f1;
    out.test_report.counts = p.counts;
    out.test_report.auc = auc(test_scores, test_labels);
    return out;
}

PipelineResult run_pipeline(const ServiceGraph& g, const MetricPanel& raw, const RunConfig& cfg) {
    PreparedData data = prepare(g, raw, cfg);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    MetricPanel train_slice = slice_steps(data.work, data.train_r);
    PipelineResult result;
    std::tie(result.params, result.history) =
        train_model(train_slice, data.graph, cfg.encoder, cfg.objective, tc);
    result.eval = evaluate(data, result.params, cfg);
    return result;
}

PipelineResult run_from_files(const RunConfig& cfg, ServiceGraph* graph_out, MetricPanel* raw_out) {
    if (cfg.edges_path.empty() || cfg.metrics_path.empty())
        throw ConfigError("config needs paths.edges and paths.metrics");
    ServiceGraph g = build_graph(read_edge_csv(cfg.edges_path));
    LoadSchema schema;
    schema.node_order = g.node_ids();
    LoadResult loaded = load_panel(cfg.metrics_path, schema);
    if (graph_out) *graph_out = g;
    if (raw_out) *raw_out = loaded.panel;
    return run_pipeline(g, loaded.panel, cfg);
}

RunConfig apply_knob(const RunConfig& base, const std::string& knob, double value) {
    RunConfig c = base;
    if (knob == "gcn_layers") {
        c.encoder.dims.layers = static_cast<int>(std::llround(value));
    } else if (knob == "neighborhood_cap") {
        c.encoder.neighborhood_cap = static_cast<int>(std::llround(value));
    } else if (knob == "embed_dim") {
        c.encoder.dims.d_emb = static_cast<int>(std::llround(value));
    } else if (knob == "learning_rate") {
        c.train.learning_rate = value;
    } else if (knob == "label_ratio") {
        c.label_ratio = value;
    } else if (knob == "noise_sigma") {
        c.noise_sigma = value;
    } else if (knob == "anomaly_intensity") {
        if (!c.has_scenario)
            throw ConfigError("knob anomaly_intensity requires a [scenario] section");
        c.auto_fault.intensity = value;
        for (auto& f : c.scenario.faults) f.intensity = value;
    } else {
        throw ConfigError("unknown sweep knob '" + knob + "'");
    }
    return c;
}

namespace {

EvalReport sweep_point(const RunConfig& cfg, const std::map<std::string, double>& coords) {
    PipelineResult result;
    if (cfg.has_scenario) {
        GeneratedData gen = generate_scenario(cfg);
        ServiceGraph g = build_graph(gen.edges);
        result = run_pipeline(g, gen.panel, cfg);
    } else {
        result = run_from_files(cfg);
    }
    EvalReport report = result.eval.test_report;
    report.sweep_coords = coords;
    return report;
}

}  // namespace

std::vector<EvalReport> run_sweep(const RunConfig& base, const std::vector<SweepKnob>& knobs,
                                  int jobs) {
    if (knobs.empty() || knobs.size() > 2) throw ConfigError("run_sweep takes one or two knobs");
    for (const auto& k : knobs)
        if (k.grid.empty()) throw ConfigError("sweep grid for '" + k.name + "' is empty");

    struct Point {
        RunConfig cfg;
        std::map<std::string, double> coords;
    };
    std::vector<Point> points;
    for (double v1 : knobs[0].grid) {
        RunConfig c1 = apply_knob(base, knobs[0].name, v1);
        if (knobs.size() == 1) {
            points.push_back({c1, {{knobs[0].name, v1}}});
            continue;
        }
        for (double v2 : knobs[1].grid)
            points.push_back({apply_knob(c1, knobs[1].name, v2),
                              {{knobs[0].name, v1}, {knobs[1].name, v2}}});
    }

    std::vector<EvalReport> reports(points.size());
    if (jobs <= 1) {
        for (std::size_t i = 0; i < points.size(); ++i)
            reports[i] = sweep_point(points[i].cfg, points[i].coords);
        return reports;
    }

    std::atomic<std::size_t> cursor{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        for (;;) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= points.size()) return;
            try {
                reports[i] = sweep_point(points[i].cfg, points[i].coords);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    int workers = std::min<int>(jobs, static_cast<int>(points.size()));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return reports;
}

void write_history_csv(const std::string& path, const TrainHistory& history, bool zero_seconds) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write history file: " + path);
    out << "epoch,total,contrast,temporal,seconds\n";
    for (std::size_t e = 0; e < history.total.size(); ++e) {
        double secs = zero_seconds ? 0.0 : history.seconds[e];
        out << e << ',' << format_double(history.total[e]) << ',' << format_double(history.contrast[e])
            << ',' << format_double(history.temporal[e]) << ',' << format_double_fixed(secs, 3) << '\n';
    }
}

}  // namespace depanom
