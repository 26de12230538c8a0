#include <cstdlib>
#include "depanom/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "depanom/errors.hpp"
#include "depanom/rng.hpp"

namespace depanom {

namespace {

constexpr int kNumFeatures = 7;
// order: cpu, mem, io, net_in, net_out, latency, error_rate
constexpr double kBaseMean[kNumFeatures] = {40.0, 55.0, 20.0, 30.0, 25.0, 80.0, 0.5};
constexpr double kScale[kNumFeatures] = {4.0, 2.0, 3.0, 3.0, 3.0, 6.0, 0.15};
// healthy services absorb load in cpu/io/network; latency and error_rate
// stay nearly load-free so fault symptoms occupy their own subspace
constexpr double kLoadGain[kNumFeatures] = {6.0, 1.5, 2.0, 8.0, 7.0, 1.0, 0.02};
constexpr double kArCoeff = 0.8;
constexpr double kPropagationFloor = 0.1;
// propagated effects surface on latency and error_rate at the caller;
// cascades stay plainly visible one hop up and marginal two hops up
constexpr double kPropWeight[kNumFeatures] = {0.0, 0.0, 0.0, 0.0, 0.0, 6.0, 4.0};

const double* kind_weights(FaultKind kind) {
    // per-kind feature deviation weights, in units of intensity * scale
    static constexpr double cpu_sat[kNumFeatures] = {2.5, 0.5, 1.2, 0.0, 0.0, 1.5, 0.3};
    static constexpr double lat_spike[kNumFeatures] = {0.0, 0.0, 0.8, 0.0, 0.0, 2.5, 0.8};
    static constexpr double err_burst[kNumFeatures] = {0.0, 0.0, 0.0, 0.0, 0.8, 1.2, 2.5};
    switch (kind) {
        case FaultKind::cpu_saturation: return cpu_sat;
        case FaultKind::latency_spike: return lat_spike;
        default: return err_burst;
    }
}

std::string tier_node_id(int tier, int index) {
    static const char* prefix[3] = {"gw", "mid", "be"};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%02d", prefix[tier], index);
    return buf;
}

}  // namespace

int Topology::tier_of(int node) const {
    if (node < tiers.gateways) return 0;
    if (node < tiers.gateways + tiers.middles) return 1;
    return 2;
}

std::string fault_kind_name(FaultKind k) {
    switch (k) {
        case FaultKind::cpu_saturation: return "cpu_saturation";
        case FaultKind::latency_spike: return "latency_spike";
        default: return "error_burst";
    }
}

FaultKind fault_kind_from_name(const std::string& name) {
    if (name == "cpu_saturation") return FaultKind::cpu_saturation;
    if (name == "latency_spike") return FaultKind::latency_spike;
    if (name == "error_burst") return FaultKind::error_burst;
    throw ConfigError("unknown fault kind '" + name + "'");
}

std::pair<Topology, EdgeList> generate_topology(const TierCounts& counts, std::uint64_t seed) {
    if (counts.gateways < 1 || counts.middles < 1 || counts.backends < 1)
        throw ConfigError("every tier needs at least one service");
    if (counts.backends > 3 * counts.middles)
        throw ConfigError("backend coverage impossible: more than 3 backends per middle");

    Topology topo;
    topo.tiers = counts;
    for (int i = 0; i < counts.gateways; ++i) topo.node_ids.push_back(tier_node_id(0, i));
    for (int i = 0; i < counts.middles; ++i) topo.node_ids.push_back(tier_node_id(1, i));
    for (int i = 0; i < counts.backends; ++i) topo.node_ids.push_back(tier_node_id(2, i));

    const int g0 = 0, m0 = counts.gateways, b0 = counts.gateways + counts.middles;
    SplitMix64 rng(seed_combine(seed, 0x7090ull));
    std::set<std::pair<int, int>> edges;

    // every middle gets a gateway caller; every gateway calls someone
    for (int m = 0; m < counts.middles; ++m)
        edges.emplace(g0 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(counts.gateways))),
                      m0 + m);
    for (int g = 0; g < counts.gateways; ++g)
        edges.emplace(g0 + g,
                      m0 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(counts.middles))));

    // backend coverage first (rotated round-robin), then top up each middle
    // to its 1-3 target without exceeding the out-degree bound
    std::vector<std::set<int>> calls(static_cast<std::size_t>(counts.middles));
    int rot = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(counts.middles)));
    for (int b = 0; b < counts.backends; ++b)
        calls[static_cast<std::size_t>((b + rot) % counts.middles)].insert(b0 + b);
    for (int m = 0; m < counts.middles; ++m) {
        int max_calls = std::min(3, counts.backends);
        int target = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_calls)));
        auto& mine = calls[static_cast<std::size_t>(m)];
        while (static_cast<int>(mine.size()) < target)
            mine.insert(b0 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(counts.backends))));
        for (int callee : mine) edges.emplace(m0 + m, callee);
    }

    topo.call_edges.assign(edges.begin(), edges.end());

    EdgeList named;
    for (const auto& [src, dst] : topo.call_edges)
        named.emplace_back(topo.node_ids[static_cast<std::size_t>(src)],
                           topo.node_ids[static_cast<std::size_t>(dst)]);
    std::sort(named.begin(), named.end());
    return {std::move(topo), std::move(named)};
}

void ScenarioConfig::validate(const Topology& topo) const {
    if (steps < 10) throw ConfigError("scenario needs at least 10 steps");
    if (base_load <= 0.0) throw ConfigError("base_load must be > 0");
    if (load.surge_multiplier < 1.0) throw ConfigError("surge multiplier must be >= 1");
    if (load.jitter_amplitude < 0.0) throw ConfigError("jitter amplitude must be >= 0");
    if (load.jitter_period < 1) throw ConfigError("jitter period must be >= 1");
    if (noise_sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
    for (const auto& f : faults) {
        if (f.intensity < 0.0) throw ConfigError("fault intensity must be >= 0");
        if (f.start < 0 || f.duration < 1 || f.start + f.duration > steps)
            throw ConfigError("fault window [" + std::to_string(f.start) + ", " +
                              std::to_string(f.start + f.duration) + ") outside the run");
        bool known = false;
        for (const auto& id : topo.node_ids) known = known || id == f.target;
        if (!known) throw ConfigError("fault target '" + f.target + "' not in topology");
    }
}

std::vector<FaultSpec> auto_faults(const Topology& topo, int count, double intensity, int duration,
                                   bool propagate, int steps, std::uint64_t seed) {
    if (count < 1) throw ConfigError("auto faults: count must be >= 1");
    if (duration < 1 || duration >= steps / count)
        throw ConfigError("auto faults: duration must fit between fault slots");

    SplitMix64 rng(seed_combine(seed, 0xFA417ull));
    const int first_target = topo.tiers.gateways;  // faults land on middles and backends
    const int candidates = topo.tiers.middles + topo.tiers.backends;
    static constexpr FaultKind kCycle[3] = {FaultKind::cpu_saturation, FaultKind::latency_spike,
                                            FaultKind::error_burst};

    // each (kind, target) combination is used at most once while unused ones
    // remain, so late faults are not replays of earlier ones
    std::vector<std::set<int>> used(3);
    std::vector<FaultSpec> faults;
    for (int k = 0; k < count; ++k) {
        FaultSpec f;
        f.kind = kCycle[k % 3];
        auto& taken = used[static_cast<std::size_t>(k % 3)];
        int node = first_target + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(candidates)));
        if (static_cast<int>(taken.size()) < candidates)
            while (taken.count(node))
                node = first_target + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(candidates)));
        taken.insert(node);
        f.target = topo.node_ids[static_cast<std::size_t>(node)];
        double center = (static_cast<double>(k) + 0.5) * static_cast<double>(steps) / static_cast<double>(count);
        f.start = std::clamp(static_cast<int>(center) - duration / 2, 1, steps - duration - 1);
        f.duration = duration;
        f.intensity = intensity;
        f.propagate = propagate;
        faults.push_back(std::move(f));
    }
    return faults;
}

double schedule_factor(const LoadSchedule& sched, int step) {
    double factor = 1.0;
    bool in_surge = sched.surge_start >= 0 && step >= sched.surge_start &&
                    step < sched.surge_start + sched.surge_len;
    if (in_surge) factor = sched.surge_multiplier;
    int jitter_from = sched.jitter_start >= 0
                          ? sched.jitter_start
                          : (sched.surge_start >= 0 ? sched.surge_start + sched.surge_len : 0);
    if (sched.jitter_amplitude > 0.0 && step >= jitter_from && !in_surge)
        factor *= 1.0 + sched.jitter_amplitude *
                            std::sin(6.283185307179586 * static_cast<double>(step - jitter_from) /
                                     static_cast<double>(sched.jitter_period));
    return factor;
}

MetricPanel simulate(const Topology& topo, const ScenarioConfig& scenario, SimTrace* trace) {
    // calibration hooks, removed after tuning
    double kind_mult = getenv("SIM_KIND_MULT") ? atof(getenv("SIM_KIND_MULT")) : 1.0;
    double prop_mult = getenv("SIM_PROP_MULT") ? atof(getenv("SIM_PROP_MULT")) : 1.0;
    double pers_sigma = getenv("SIM_PERS_SIGMA") ? atof(getenv("SIM_PERS_SIGMA")) : 2.0;
    scenario.validate(topo);
    const int n = topo.num_nodes();
    const int steps = scenario.steps;

    // request load propagation; edges only go downstream so node order is
    // already topological
    std::vector<int> outdeg(static_cast<std::size_t>(n), 0);
    for (const auto& [src, dst] : topo.call_edges) ++outdeg[static_cast<std::size_t>(src)];

    auto loads_at = [&](double factor) {
        Eigen::VectorXd load = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < topo.tiers.gateways; ++i) load[i] = scenario.base_load * factor;
        for (const auto& [src, dst] : topo.call_edges)
            load[dst] += load[src] / static_cast<double>(outdeg[static_cast<std::size_t>(src)]);
        return load;
    };
    Eigen::VectorXd steady = loads_at(1.0);

    // per-fault upstream hop distances (BFS over reversed call edges)
    std::vector<std::vector<int>> callers(static_cast<std::size_t>(n));
    for (const auto& [src, dst] : topo.call_edges) callers[static_cast<std::size_t>(dst)].push_back(src);
    auto upstream_hops = [&](int target) {
        std::vector<int> hops(static_cast<std::size_t>(n), -1);
        hops[static_cast<std::size_t>(target)] = 0;
        std::vector<int> frontier{target};
        int h = 0;
        while (!frontier.empty()) {
            ++h;
            std::vector<int> next;
            for (int v : frontier)
                for (int c : callers[static_cast<std::size_t>(v)])
                    if (hops[static_cast<std::size_t>(c)] < 0) {
                        hops[static_cast<std::size_t>(c)] = h;
                        next.push_back(c);
                    }
            frontier = std::move(next);
        }
        return hops;
    };

    // injected deviations and labels
    std::vector<Eigen::MatrixXd> deviation(static_cast<std::size_t>(steps),
                                           Eigen::MatrixXd::Zero(n, kNumFeatures));
    Eigen::MatrixXi labels = Eigen::MatrixXi::Zero(n, steps);
    for (const auto& fault : scenario.faults) {
        int target = -1;
        for (int i = 0; i < n; ++i)
            if (topo.node_ids[static_cast<std::size_t>(i)] == fault.target) target = i;
        const double* weights = kind_weights(fault.kind);

        for (int t = fault.start; t < fault.start + fault.duration; ++t) {
            for (int f = 0; f < kNumFeatures; ++f)
                deviation[static_cast<std::size_t>(t)](target, f) += kind_mult * fault.intensity * weights[f] * kScale[f];
            labels(target, t) = 1;  // target window is labeled even at intensity 0
        }

        if (!fault.propagate) continue;
        std::vector<int> hops = upstream_hops(target);
        for (int i = 0; i < n; ++i) {
            int h = hops[static_cast<std::size_t>(i)];
            if (h < 1) continue;
            double level = fault.intensity * std::pow(0.5, h);
            int from = std::min(fault.start + h, steps);
            int to = std::min(fault.start + fault.duration + h, steps);
            for (int t = from; t < to; ++t) {
                for (int f = 0; f < kNumFeatures; ++f)
                    deviation[static_cast<std::size_t>(t)](i, f) += prop_mult * level * kPropWeight[f] * kScale[f];
                if (level >= kPropagationFloor) labels(i, t) = 1;
            }
        }
    }

    MetricPanel panel;
    panel.node_ids = topo.node_ids;
    panel.feature_names = canonical_features();
    panel.step_seconds = 60.0;
    panel.labels = std::move(labels);
    panel.timestamps.resize(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t)
        panel.timestamps[static_cast<std::size_t>(t)] = 1700000000ll + 60ll * t;
    panel.frames.assign(static_cast<std::size_t>(steps), Eigen::MatrixXd::Zero(n, kNumFeatures));

    if (trace) {
        trace->loads.resize(n, steps);
        trace->deviations = deviation;
    }

    // AR(1) baselines and observation noise use one stream per node, drawn
    // in a fixed (step, feature) order, so fault settings never shift them.
    std::vector<SplitMix64> ar_rng, noise_rng;
    for (int i = 0; i < n; ++i) {
        ar_rng.emplace_back(seed_combine(seed_combine(scenario.seed, 0xA21ull), static_cast<std::uint64_t>(i)));
        noise_rng.emplace_back(seed_combine(seed_combine(scenario.seed, 0x0B5ull), static_cast<std::uint64_t>(i)));
    }

    // persistent per-service resource profiles: offset baselines and
    // individual load responsiveness (services are heterogeneous)
    Eigen::MatrixXd personality(n, kNumFeatures);
    Eigen::VectorXd load_response(n);
    for (int i = 0; i < n; ++i) {
        SplitMix64 prng(seed_combine(seed_combine(scenario.seed, 0x9E45ull), static_cast<std::uint64_t>(i)));
        for (int f = 0; f < kNumFeatures; ++f)
            personality(i, f) = pers_sigma * kScale[f] * prng.gauss();
        load_response[i] = 0.6 + 0.8 * prng.uniform01();
    }

    Eigen::MatrixXd ar_state(n, kNumFeatures);
    const double stationary = 1.0 / std::sqrt(1.0 - kArCoeff * kArCoeff);
    for (int i = 0; i < n; ++i)
        for (int f = 0; f < kNumFeatures; ++f)
            ar_state(i, f) = kScale[f] * stationary * ar_rng[static_cast<std::size_t>(i)].gauss();

    for (int t = 0; t < steps; ++t) {
        Eigen::VectorXd load = loads_at(schedule_factor(scenario.load, t));
        if (trace) trace->loads.col(t) = load;
        auto& frame = panel.frames[static_cast<std::size_t>(t)];
        for (int i = 0; i < n; ++i) {
            double rel = load[i] / steady[i] - 1.0;
            for (int f = 0; f < kNumFeatures; ++f) {
                if (t > 0)
                    ar_state(i, f) = kArCoeff * ar_state(i, f) +
                                     kScale[f] * ar_rng[static_cast<std::size_t>(i)].gauss();
                double value = kBaseMean[f] + personality(i, f) + ar_state(i, f) +
                               kLoadGain[f] * load_response[i] * rel +
                               deviation[static_cast<std::size_t>(t)](i, f);
                if (scenario.noise_sigma > 0.0)
                    value += scenario.noise_sigma * kScale[f] * noise_rng[static_cast<std::size_t>(i)].gauss();
                frame(i, f) = value;
            }
        }
    }
    return panel;
}

}  // namespace depanom
