// depanom: generate synthetic service telemetry, train the contrastive
// dependency model, score anomalies, and run hyperparameter sweeps.
//
// Subcommands: gen, train, eval, sweep, e2e. Every command is deterministic
// given its config and seed. Exit codes: 0 success, 1 usage/config error,
// 2 numerical failure.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "depanom/config.hpp"
#include "depanom/errors.hpp"
#include "depanom/io_util.hpp"
#include "depanom/pipeline.hpp"

namespace fs = std::filesystem;
using namespace depanom;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::int64_t> seed;
    int jobs = 1;
};

RunConfig load_config(const CommonArgs& args, bool allow_default) {
    RunConfig cfg;
    if (!args.config_path.empty()) {
        cfg = RunConfig::from_file(args.config_path);
    } else if (allow_default) {
        cfg = default_e2e_config();
    } else {
        throw ConfigError("--config is required");
    }
    if (args.seed) {
        cfg.seed = static_cast<std::uint64_t>(*args.seed);
        cfg.scenario.seed = cfg.seed;
        cfg.train.seed = cfg.seed;
    }
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    return cfg;
}

fs::path ensure_out_dir(const RunConfig& cfg) {
    fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw ConfigError("cannot create output directory: " + cfg.out_dir);
    return dir;
}

// gen writes the data files and rewires the config paths at them
void run_gen(RunConfig& cfg, const fs::path& dir) {
    GeneratedData gen = generate_scenario(cfg);
    fs::path edges = dir / "edges.csv";
    fs::path metrics = dir / "metrics.csv";
    write_edge_csv(edges.string(), gen.edges);
    write_metrics_csv(metrics.string(), gen.panel);
    cfg.edges_path = edges.string();
    cfg.metrics_path = metrics.string();

    double label_sum = 0.0;
    const auto& labels = gen.panel.labels;
    for (int t = 0; t < gen.panel.num_steps(); ++t)
        for (int i = 0; i < gen.panel.num_nodes(); ++i) label_sum += labels(i, t);
    double rate = label_sum / static_cast<double>(labels.size());
    std::cout << "gen: nodes=" << gen.panel.num_nodes() << " steps=" << gen.panel.num_steps()
              << " anomaly_rate=" << format_double(rate) << "\n";
    std::cout << "gen: wrote " << edges.string() << " and " << metrics.string() << "\n";
}

void print_report(const EvalOutputs& ev, const RunConfig& cfg, const PreparedData& data) {
    std::cout << "threshold=" << format_double(ev.threshold) << " selected on val steps ["
              << data.val_r.begin << ", " << data.val_r.end << ")"
              << (ev.threshold_from_fallback ? " via quantile fallback (single-class val labels)" : "")
              << "\n";
    std::cout << "test precision=" << format_double(ev.test_report.precision)
              << " recall=" << format_double(ev.test_report.recall)
              << " f1=" << format_double(ev.test_report.f1)
              << " auc=" << format_double(ev.test_report.auc) << "\n";
    (void)cfg;
}

void write_eval_artifacts(const fs::path& dir, const PreparedData& data, const EvalOutputs& ev,
                          int rolling_window) {
    write_scores_csv((dir / "scores.csv").string(), data.truth, ev.scores, ev.predictions);
    std::vector<EvalReport> reports{ev.test_report};
    write_report_csv((dir / "report.csv").string(), reports);
    if (rolling_window > 0) {
        Eigen::MatrixXd s = ev.scores.middleCols(data.test_r.begin, data.test_r.length());
        Eigen::MatrixXi l = data.truth.labels.middleCols(data.test_r.begin, data.test_r.length());
        write_rolling_csv((dir / "rolling.csv").string(),
                          rolling_eval(s, l, ev.threshold, rolling_window));
    }
}

int dispatch(const std::string& command, CommonArgs& args, const std::string& checkpoint_path,
             int rolling_window, const std::string& knob1, const std::string& grid1,
             const std::string& knob2, const std::string& grid2) {
    if (command == "gen") {
        RunConfig cfg = load_config(args, true);
        fs::path dir = ensure_out_dir(cfg);
        run_gen(cfg, dir);
        return 0;
    }

    if (command == "train") {
        RunConfig cfg = load_config(args, false);
        fs::path dir = ensure_out_dir(cfg);
        ServiceGraph g;
        MetricPanel raw;
        PipelineResult result = run_from_files(cfg, &g, &raw);
        save_checkpoint((dir / "checkpoint.json").string(), result.params);
        write_history_csv((dir / "history.csv").string(), result.history, cfg.deterministic_outputs);
        std::cout << "train: epochs=" << result.history.total.size()
                  << " final_loss=" << format_double(result.history.total.back()) << "\n";
        std::cout << "train: wrote " << (dir / "checkpoint.json").string() << "\n";
        return 0;
    }

    if (command == "eval") {
        RunConfig cfg = load_config(args, false);
        fs::path dir = ensure_out_dir(cfg);
        ServiceGraph g = build_graph(read_edge_csv(cfg.edges_path));
        LoadSchema schema;
        schema.node_order = g.node_ids();
        MetricPanel raw = load_panel(cfg.metrics_path, schema).panel;
        PreparedData data = prepare(g, raw, cfg);
        std::string ckpt = checkpoint_path.empty() ? (dir / "checkpoint.json").string() : checkpoint_path;
        ModelParams params = load_checkpoint(ckpt);
        EvalOutputs ev = evaluate(data, params, cfg);
        write_eval_artifacts(dir, data, ev, rolling_window);
        print_report(ev, cfg, data);
        return 0;
    }

    if (command == "sweep") {
        RunConfig cfg = load_config(args, true);
        fs::path dir = ensure_out_dir(cfg);
        std::vector<SweepKnob> knobs;
        auto parse_grid = [](const std::string& text) {
            std::vector<double> grid;
            for (const auto& field : split_csv_line(text))
                grid.push_back(parse_double_field(field, "--grid"));
            return grid;
        };
        if (knob1.empty() || grid1.empty()) throw ConfigError("sweep needs --knob and --grid");
        knobs.push_back({knob1, parse_grid(grid1)});
        if (!knob2.empty()) {
            if (grid2.empty()) throw ConfigError("--knob2 needs --grid2");
            knobs.push_back({knob2, parse_grid(grid2)});
        }
        std::vector<EvalReport> reports = run_sweep(cfg, knobs, args.jobs);
        write_report_csv((dir / "sweep.csv").string(), reports);
        for (const auto& r : reports) {
            std::cout << "sweep:";
            for (const auto& [k, v] : r.sweep_coords) std::cout << ' ' << k << '=' << format_double(v);
            std::cout << " f1=" << format_double(r.f1) << " auc=" << format_double(r.auc) << "\n";
        }
        std::cout << "sweep: wrote " << (dir / "sweep.csv").string() << "\n";
        return 0;
    }

    if (command == "e2e") {
        RunConfig cfg = load_config(args, true);
        fs::path dir = ensure_out_dir(cfg);
        run_gen(cfg, dir);
        ServiceGraph g;
        MetricPanel raw;
        PipelineResult result = run_from_files(cfg, &g, &raw);
        save_checkpoint((dir / "checkpoint.json").string(), result.params);
        write_history_csv((dir / "history.csv").string(), result.history, cfg.deterministic_outputs);
        PreparedData data = prepare(g, raw, cfg);
        write_eval_artifacts(dir, data, result.eval, rolling_window);
        print_report(result.eval, cfg, data);
        return 0;
    }

    throw ConfigError("unknown command '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dependency-graph anomaly detection over service telemetry"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string checkpoint_path;
    int rolling_window = 0;
    std::string knob1, grid1, knob2, grid2;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", args.config_path, "run config file (TOML)");
        cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
        cmd->add_option("--seed", args.seed, "seed override");
    };

    auto* gen = app.add_subcommand("gen", "generate synthetic edges + metrics files");
    add_common(gen);
    auto* train = app.add_subcommand("train", "train the model, write checkpoint + history");
    add_common(train);
    auto* eval = app.add_subcommand("eval", "score a panel with a checkpoint, write scores + report");
    add_common(eval);
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint path (default <out>/checkpoint.json)");
    eval->add_option("--rolling", rolling_window, "also write rolling metrics with this window");
    auto* sweep = app.add_subcommand("sweep", "train + evaluate over a knob grid");
    add_common(sweep);
    sweep->add_option("--knob", knob1, "knob name")->required();
    sweep->add_option("--grid", grid1, "comma-separated values")->required();
    sweep->add_option("--knob2", knob2, "second knob (cartesian)");
    sweep->add_option("--grid2", grid2, "second grid");
    sweep->add_option("--jobs", args.jobs, "parallel grid workers");
    auto* e2e = app.add_subcommand("e2e", "gen + train + eval in one run");
    add_common(e2e);
    e2e->add_option("--rolling", rolling_window, "also write rolling metrics with this window");

    CLI11_PARSE(app, argc, argv);

    try {
        std::string command = app.get_subcommands().front()->get_name();
        return dispatch(command, args, checkpoint_path, rolling_window, knob1, grid1, knob2, grid2);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
