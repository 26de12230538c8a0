// CLI behavior checks: runs the built binary via std::system against a small
// scenario. Usage: cli_tests <path-to-depanom-binary>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void expect(bool ok, const std::string& what) {
    std::cout << (ok ? "  ok: " : "  FAILED: ") << what << "\n";
    if (!ok) ++failures;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run(const std::string& cmd) {
    int rc = std::system(cmd.c_str());
    return rc < 0 ? rc : WEXITSTATUS(rc);
}

const char* kSmallConfig = R"(
[model]
d_hid = 8
d_emb = 16
gcn_layers = 2
neighborhood_cap = 6

[objective]
negatives_per_anchor = 8

[train]
epochs = 3
window_length = 6
window_stride = 6

[detect]
k = 5
bank_capacity = 512

[run]
seed = 7
label_ratio = 0.2

[scenario]
steps = 200
gateways = 1
middles = 2
backends = 2
noise_sigma = 0.2

[scenario.auto_faults]
count = 3
intensity = 2.0
duration = 12
)";

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: cli_tests <depanom-binary>\n";
        return 2;
    }
    std::string cli = argv[1];
    fs::path work = fs::temp_directory_path() / "depanom_cli_tests";
    fs::remove_all(work);
    fs::create_directories(work);
    fs::path cfg_path = work / "run.toml";
    {
        std::ofstream out(cfg_path);
        out << kSmallConfig;
        out << "\n[paths]\nedges = \"" << (work / "out/edges.csv").string() << "\"\nmetrics = \""
            << (work / "out/metrics.csv").string() << "\"\nout_dir = \"" << (work / "out").string()
            << "\"\n";
    }

    std::cout << "gen writes both data files\n";
    int rc = run(cli + " gen --config " + cfg_path.string() + " > " + (work / "gen.log").string());
    expect(rc == 0, "gen exits 0");
    expect(fs::exists(work / "out/edges.csv"), "edges.csv exists");
    expect(fs::exists(work / "out/metrics.csv"), "metrics.csv exists");

    std::cout << "gen is byte-deterministic\n";
    rc = run(cli + " gen --config " + cfg_path.string() + " --out " + (work / "out2").string() +
             " > /dev/null");
    expect(rc == 0, "second gen exits 0");
    expect(slurp(work / "out/metrics.csv") == slurp(work / "out2/metrics.csv"),
           "metrics.csv byte-identical");
    expect(slurp(work / "out/edges.csv") == slurp(work / "out2/edges.csv"), "edges.csv byte-identical");

    std::cout << "train + eval produce artifacts and a report\n";
    rc = run(cli + " train --config " + cfg_path.string() + " > " + (work / "train.log").string());
    expect(rc == 0, "train exits 0");
    expect(fs::exists(work / "out/checkpoint.json"), "checkpoint written");
    expect(fs::exists(work / "out/history.csv"), "history written");
    rc = run(cli + " eval --config " + cfg_path.string() + " --rolling 40 > " +
             (work / "eval.log").string());
    expect(rc == 0, "eval exits 0");
    expect(fs::exists(work / "out/scores.csv"), "scores written");
    expect(fs::exists(work / "out/report.csv"), "report written");
    expect(fs::exists(work / "out/rolling.csv"), "rolling written");
    std::string eval_log = slurp(work / "eval.log");
    expect(eval_log.find("threshold=") != std::string::npos, "eval prints the threshold audit line");
    expect(eval_log.find("selected on val steps [120, 160)") != std::string::npos,
           "threshold audit names the val split");

    std::cout << "e2e prints metrics that match the report file\n";
    rc = run(cli + " e2e --config " + cfg_path.string() + " --out " + (work / "e2e").string() + " > " +
             (work / "e2e.log").string());
    expect(rc == 0, "e2e exits 0");
    std::string log = slurp(work / "e2e.log");
    auto pos = log.find("auc=");
    expect(pos != std::string::npos, "e2e prints auc");
    std::string printed_auc = log.substr(pos + 4, log.find('\n', pos) - pos - 4);
    std::string report = slurp(work / "e2e/report.csv");
    expect(report.find(printed_auc) != std::string::npos, "printed auc appears in report.csv");

    std::cout << "usage and missing-file errors exit 1\n";
    rc = run(cli + " eval --config " + (work / "nope.toml").string() + " 2> /dev/null");
    expect(rc == 1, "missing config exits 1");
    fs::remove(work / "out/metrics.csv");
    rc = run(cli + " train --config " + cfg_path.string() + " 2> /dev/null");
    expect(rc == 1, "missing metrics file exits 1");
    rc = run(cli + " bogus 2> /dev/null");
    expect(rc != 0, "unknown subcommand fails");

    std::cout << "sweep over a single-point grid writes one row\n";
    rc = run(cli + " sweep --config " + cfg_path.string() + " --knob label_ratio --grid 0.2 --out " +
             (work / "sweep").string() + " > /dev/null");
    expect(rc == 0, "sweep exits 0");
    std::string sweep_csv = slurp(work / "sweep/sweep.csv");
    expect(sweep_csv.find("label_ratio=0.2") != std::string::npos, "sweep row carries coordinates");
    int lines = 0;
    for (char c : sweep_csv)
        if (c == '\n') ++lines;
    expect(lines == 2, "header plus exactly one row");

    std::cout << (failures == 0 ? "all cli checks passed\n" : "cli checks FAILED\n");
    return failures == 0 ? 0 : 1;
}
