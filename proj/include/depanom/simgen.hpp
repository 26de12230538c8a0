#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "depanom/graph.hpp"
#include "depanom/telemetry.hpp"

// Deterministic synthetic telemetry: a three-tier topology
// (gateway -> middle -> backend), AR(1) feature baselines driven by
// propagated request load, and fault injection with downstream-to-upstream
// propagation (1-step delay, 0.5 attenuation per hop).

namespace depanom {

struct TierCounts {
    int gateways = 2;
    int middles = 6;
    int backends = 4;
};

struct Topology {
    TierCounts tiers;
    std::vector<std::string> node_ids;             // gw-*, mid-*, be-*
    std::vector<std::pair<int, int>> call_edges;   // caller -> callee, acyclic
    int num_nodes() const { return static_cast<int>(node_ids.size()); }
    int tier_of(int node) const;                   // 0 gateway, 1 middle, 2 backend
};

// Deterministic per seed. Every middle is called by at least one gateway,
// middles call 1-3 backends, every backend has a caller.
std::pair<Topology, EdgeList> generate_topology(const TierCounts& counts, std::uint64_t seed);

enum class FaultKind { cpu_saturation, latency_spike, error_burst };

std::string fault_kind_name(FaultKind k);
FaultKind fault_kind_from_name(const std::string& name);

struct FaultSpec {
    FaultKind kind = FaultKind::latency_spike;
    std::string target;
    int start = 0;
    int duration = 0;
    double intensity = 1.0;  // scales the injected deviation linearly
    bool propagate = true;
};

struct LoadSchedule {
    int surge_start = -1;           // -1 disables the surge
    int surge_len = 0;
    double surge_multiplier = 1.0;  // applies exactly within [start, start+len)
    double jitter_amplitude = 0.0;  // sinusoidal load modulation
    int jitter_period = 20;
    int jitter_start = -1;          // -1: from the end of the surge (or step 0)
};

struct ScenarioConfig {
    int steps = 2000;
    double base_load = 100.0;  // requests/step per gateway
    LoadSchedule load;
    std::vector<FaultSpec> faults;
    double noise_sigma = 0.2;  // observation noise, in per-feature scale units
    std::uint64_t seed = 7;

    void validate(const Topology& topo) const;
};

// Evenly spread faults with seed-chosen targets (middles and backends) and
// round-robin kinds; keeps every contiguous split populated with anomalies.
std::vector<FaultSpec> auto_faults(const Topology& topo, int count, double intensity, int duration,
                                   bool propagate, int steps, std::uint64_t seed);

// Gateway load multiplier at a step.
double schedule_factor(const LoadSchedule& sched, int step);

// Optional inspection of simulator internals for tests.
struct SimTrace {
    Eigen::MatrixXd loads;                     // node x step request load
    std::vector<Eigen::MatrixXd> deviations;   // per step: node x feature injected deviation
};

// Labels are 1 exactly on fault-affected node-steps: the target window
// always, propagated hops only while the attenuated level
// intensity * 0.5^hop stays >= 0.1. Bit-identical per (topology, scenario).
MetricPanel simulate(const Topology& topo, const ScenarioConfig& scenario, SimTrace* trace = nullptr);

}  // namespace depanom
