#include "depanom/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "depanom/errors.hpp"
#include "depanom/rng.hpp"

namespace depanom {

int ServiceGraph::index_of(const std::string& id) const {
    auto it = std::lower_bound(node_ids_.begin(), node_ids_.end(), id);
    if (it == node_ids_.end() || *it != id) return -1;
    return static_cast<int>(it - node_ids_.begin());
}

const std::vector<int>& ServiceGraph::adjacency(int i) const {
    if (i < 0 || static_cast<std::size_t>(i) >= adjacency_.size())
        throw ConfigError("node index out of range: " + std::to_string(i));
    return adjacency_[static_cast<std::size_t>(i)];
}

int ServiceGraph::degree(int i) const {
    if (i < 0 || static_cast<std::size_t>(i) >= degree_.size())
        throw ConfigError("node index out of range: " + std::to_string(i));
    return degree_[static_cast<std::size_t>(i)];
}

double ServiceGraph::norm_coeff(int i, int j) const {
    const auto& nb = adjacency(i);
    if (!std::binary_search(nb.begin(), nb.end(), j))
        throw ConfigError("norm_coeff: no edge " + std::to_string(i) + "->" + std::to_string(j));
    return std::sqrt(static_cast<double>(degree(i)) * static_cast<double>(degree(j)));
}

EdgeList ServiceGraph::edge_dump() const {
    EdgeList out;
    for (std::size_t i = 0; i < adjacency_.size(); ++i) {
        bool isolated = true;
        for (int j : adjacency_[i]) {
            if (j == static_cast<int>(i)) continue;
            isolated = false;
            out.emplace_back(node_ids_[i], node_ids_[static_cast<std::size_t>(j)]);
        }
        if (isolated) out.emplace_back(node_ids_[i], node_ids_[i]);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

ServiceGraph build_graph(const EdgeList& edges, DirectionMode mode,
                         const std::vector<std::string>& extra_nodes) {
    if (edges.empty() && extra_nodes.empty()) throw ConfigError("empty graph");

    std::set<std::string> ids;
    for (const auto& [s, d] : edges) {
        if (s.empty() || d.empty()) throw ConfigError("edge endpoint must be a non-empty string");
        ids.insert(s);
        ids.insert(d);
    }
    for (const auto& id : extra_nodes) {
        if (id.empty()) throw ConfigError("node id must be a non-empty string");
        ids.insert(id);
    }

    ServiceGraph g;
    g.mode_ = mode;
    g.node_ids_.assign(ids.begin(), ids.end());

    const std::size_t n = g.node_ids_.size();
    std::vector<std::set<int>> nb(n);
    for (std::size_t i = 0; i < n; ++i) nb[i].insert(static_cast<int>(i));  // mandatory self-loop
    for (const auto& [s, d] : edges) {
        int si = g.index_of(s);
        int di = g.index_of(d);
        nb[static_cast<std::size_t>(si)].insert(di);
        if (mode == DirectionMode::symmetrize) nb[static_cast<std::size_t>(di)].insert(si);
    }

    g.adjacency_.resize(n);
    g.degree_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        g.adjacency_[i].assign(nb[i].begin(), nb[i].end());
        g.degree_[i] = static_cast<int>(g.adjacency_[i].size());
    }
    return g;
}

std::vector<int> sample_from_list(const std::vector<int>& list, int self, int cap, std::uint64_t seed) {
    if (cap < 1) throw ConfigError("neighborhood cap must be >= 1");
    if (static_cast<int>(list.size()) <= cap) return list;

    std::vector<int> others;
    others.reserve(list.size() - 1);
    for (int j : list)
        if (j != self) others.push_back(j);

    // Partial Fisher-Yates over the non-self entries; self always kept.
    SplitMix64 rng(seed);
    const int want = cap - 1;
    for (int k = 0; k < want; ++k) {
        std::size_t pick = static_cast<std::size_t>(k) +
                           rng.uniform_int(static_cast<std::uint64_t>(others.size() - static_cast<std::size_t>(k)));
        std::swap(others[static_cast<std::size_t>(k)], others[pick]);
    }
    std::vector<int> out(others.begin(), others.begin() + want);
    out.push_back(self);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> sample_neighborhood(const ServiceGraph& g, int node, int cap, std::uint64_t seed) {
    const auto& nb = g.adjacency(node);
    return sample_from_list(nb, node, cap, seed ^ static_cast<std::uint64_t>(node));
}

EdgeList read_edge_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open edge file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("edge file is empty: " + path);
    // tolerate a UTF-8 BOM and CR line endings
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "src,dst") throw ConfigError("edge file header must be 'src,dst', got '" + line + "'");

    EdgeList edges;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ConfigError("edge file line " + std::to_string(lineno) + ": expected 'src,dst'");
        edges.emplace_back(line.substr(0, comma), line.substr(comma + 1));
    }
    return edges;
}

void write_edge_csv(const std::string& path, const EdgeList& edges) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write edge file: " + path);
    out << "src,dst\n";
    for (const auto& [s, d] : edges) out << s << ',' << d << '\n';
}

}  // namespace depanom
