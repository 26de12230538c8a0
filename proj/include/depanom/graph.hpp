#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

// Service dependency graph: nodes are service instances, edges observed
// call relations. Immutable after construction; safe for concurrent reads.

namespace depanom {

enum class DirectionMode { directed, symmetrize };

using EdgeList = std::vector<std::pair<std::string, std::string>>;

class ServiceGraph {
public:
    ServiceGraph() = default;

    std::size_t size() const { return node_ids_.size(); }
    const std::vector<std::string>& node_ids() const { return node_ids_; }
    const std::string& node_id(int i) const { return node_ids_[static_cast<std::size_t>(i)]; }

    // -1 if the id is unknown.
    int index_of(const std::string& id) const;

    // Sorted ascending, self-loop always present.
    const std::vector<int>& adjacency(int i) const;
    int degree(int i) const;

    // c_ij = sqrt(degree(i) * degree(j)); requires an edge i->j (self-loops count).
    double norm_coeff(int i, int j) const;

    // All non-self directed edges, sorted and deduplicated. Isolated nodes
    // (self-loop only) are emitted as a single self edge so a rebuild from
    // the dump reproduces the graph exactly.
    EdgeList edge_dump() const;

    DirectionMode mode() const { return mode_; }

    friend ServiceGraph build_graph(const EdgeList&, DirectionMode, const std::vector<std::string>&);

private:
    std::vector<std::string> node_ids_;          // lexicographic order
    std::vector<std::vector<int>> adjacency_;    // sorted, self-loop included
    std::vector<int> degree_;
    DirectionMode mode_ = DirectionMode::symmetrize;
};

// Builds the graph from raw (src, dst) id pairs. Duplicates collapse, every
// node gets a self-loop, `symmetrize` inserts both directions. `extra_nodes`
// admits services that appear in telemetry but not in any edge.
// Throws ConfigError("empty graph") when there is nothing to build from.
ServiceGraph build_graph(const EdgeList& edges,
                         DirectionMode mode = DirectionMode::symmetrize,
                         const std::vector<std::string>& extra_nodes = {});

// Deterministic uniform sample without replacement of at most `cap`
// neighbors of `node`; the self-loop always survives. Keyed by
// (seed XOR node) so per-node streams are independent.
std::vector<int> sample_neighborhood(const ServiceGraph& g, int node, int cap, std::uint64_t seed);

// Same sampling contract applied to an explicit candidate list (used for
// augmentation views where edges were dropped first). `list` must be sorted
// and contain `self`.
std::vector<int> sample_from_list(const std::vector<int>& list, int self, int cap, std::uint64_t seed);

// Edge file I/O: CSV with header "src,dst", one edge per line.
EdgeList read_edge_csv(const std::string& path);
void write_edge_csv(const std::string& path, const EdgeList& edges);

}  // namespace depanom
