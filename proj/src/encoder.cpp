#include "depanom/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "depanom/errors.hpp"
#include "depanom/rng.hpp"

namespace depanom {

std::string activation_name(Activation a) {
    return a == Activation::relu ? "relu" : "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "identity") return Activation::identity;
    throw ConfigError("unknown activation '" + name + "' (expected relu or identity)");
}

namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& m, Activation act) {
    if (act == Activation::identity) return m;
    return m.cwiseMax(0.0);
}

}  // namespace

void ModelParams::validate() const {
    if (dims.d_in < 1 || dims.d_hid < 1 || dims.d_emb < 1)
        throw ConfigError("model dimensions must be >= 1");
    if (dims.layers < 0 || dims.layers > 8)
        throw ConfigError("gcn layer count must be in [0, 8]");
    if (embed_w.size() != 2 || embed_b.size() != 2)
        throw ConfigError("embedding MLP must have exactly two layers");
    auto expect = [](const Eigen::MatrixXd& m, int r, int c, const std::string& name) {
        if (m.rows() != r || m.cols() != c)
            throw ConfigError("parameter " + name + " has wrong shape");
        if (!m.allFinite()) throw ConfigError("parameter " + name + " has non-finite entries");
    };
    expect(embed_w[0], dims.d_in, dims.d_hid, "embed_w[0]");
    expect(embed_w[1], dims.d_hid, dims.d_emb, "embed_w[1]");
    if (embed_b[0].size() != dims.d_hid || embed_b[1].size() != dims.d_emb)
        throw ConfigError("embedding bias has wrong shape");
    if (!embed_b[0].allFinite() || !embed_b[1].allFinite())
        throw ConfigError("embedding bias has non-finite entries");
    if (static_cast<int>(gcn_w.size()) != dims.layers)
        throw ConfigError("gcn weight count does not match layer count");
    for (std::size_t l = 0; l < gcn_w.size(); ++l)
        expect(gcn_w[l], dims.d_emb, dims.d_emb, "gcn_w[" + std::to_string(l) + "]");
}

ModelParams init_params(const ModelDims& dims, Activation activation, std::uint64_t seed) {
    if (dims.d_in < 1 || dims.d_hid < 1 || dims.d_emb < 1)
        throw ConfigError("model dimensions must be >= 1");
    if (dims.layers < 0 || dims.layers > 8)
        throw ConfigError("gcn layer count must be in [0, 8]");

    SplitMix64 rng(seed_combine(seed, 0x696E6974ull));
    auto glorot = [&rng](int rows, int cols) {
        double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
        Eigen::MatrixXd w(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                w(r, c) = (2.0 * rng.uniform01() - 1.0) * bound;
        return w;
    };

    ModelParams p;
    p.dims = dims;
    p.activation = activation;
    p.embed_w.push_back(glorot(dims.d_in, dims.d_hid));
    p.embed_w.push_back(glorot(dims.d_hid, dims.d_emb));
    p.embed_b.push_back(Eigen::VectorXd::Zero(dims.d_hid));
    p.embed_b.push_back(Eigen::VectorXd::Zero(dims.d_emb));
    for (int l = 0; l < dims.layers; ++l) p.gcn_w.push_back(glorot(dims.d_emb, dims.d_emb));
    return p;
}

Eigen::MatrixXd embed_rows(const Eigen::MatrixXd& X, const ModelParams& params) {
    if (X.cols() != params.dims.d_in)
        throw ConfigError("embed: input has " + std::to_string(X.cols()) + " features, model expects " +
                          std::to_string(params.dims.d_in));
    Eigen::MatrixXd u = (X * params.embed_w[0]).rowwise() + params.embed_b[0].transpose();
    Eigen::MatrixXd h = apply_activation(u, params.activation);
    return (h * params.embed_w[1]).rowwise() + params.embed_b[1].transpose();
}

Eigen::VectorXd embed(const Eigen::VectorXd& x, const ModelParams& params) {
    return embed_rows(x.transpose(), params).row(0).transpose();
}

ViewPlan plan_base_view(const ServiceGraph& g, int layers, int cap, std::uint64_t seed) {
    ViewPlan plan;
    plan.neighborhoods.resize(static_cast<std::size_t>(layers));
    const int n = static_cast<int>(g.size());
    for (int l = 0; l < layers; ++l) {
        auto& level = plan.neighborhoods[static_cast<std::size_t>(l)];
        level.resize(static_cast<std::size_t>(n));
        std::uint64_t layer_seed = seed_combine(seed, 0xBA5Eull + static_cast<std::uint64_t>(l));
        for (int i = 0; i < n; ++i)
            level[static_cast<std::size_t>(i)] = sample_neighborhood(g, i, cap, layer_seed);
    }
    return plan;
}

ViewPlan plan_aug_view(const ServiceGraph& g, int layers, int cap, int d_in,
                       double feature_mask_prob, double edge_drop_prob, std::uint64_t seed) {
    const int n = static_cast<int>(g.size());

    // Edge dropout once per view; per-layer sampling then works on the
    // thinned adjacency.
    std::vector<std::vector<int>> kept(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        SplitMix64 rng(seed_combine(seed, 0xD209ull) ^ static_cast<std::uint64_t>(i));
        for (int j : g.adjacency(i)) {
            if (j == i || !rng.bernoulli(edge_drop_prob)) kept[static_cast<std::size_t>(i)].push_back(j);
        }
    }

    ViewPlan plan;
    plan.neighborhoods.resize(static_cast<std::size_t>(layers));
    for (int l = 0; l < layers; ++l) {
        auto& level = plan.neighborhoods[static_cast<std::size_t>(l)];
        level.resize(static_cast<std::size_t>(n));
        std::uint64_t layer_seed = seed_combine(seed, 0xA06ull + static_cast<std::uint64_t>(l));
        for (int i = 0; i < n; ++i)
            level[static_cast<std::size_t>(i)] =
                sample_from_list(kept[static_cast<std::size_t>(i)], i, cap,
                                 layer_seed ^ static_cast<std::uint64_t>(i));
    }

    plan.feature_mask = Eigen::ArrayXXd::Ones(n, d_in);
    SplitMix64 mask_rng(seed_combine(seed, 0xFEA7ull));
    for (int i = 0; i < n; ++i)
        for (int f = 0; f < d_in; ++f)
            if (mask_rng.bernoulli(feature_mask_prob)) plan.feature_mask(i, f) = 0.0;
    return plan;
}

Eigen::MatrixXd aggregate_neighbors(const Eigen::MatrixXd& H, const ServiceGraph& g,
                                    const std::vector<std::vector<int>>& neighborhoods) {
    const int n = static_cast<int>(g.size());
    if (H.rows() != n) throw ConfigError("aggregate: row count does not match graph size");
    Eigen::MatrixXd out(n, H.cols());

    std::vector<Eigen::VectorXd> terms;
    for (int i = 0; i < n; ++i) {
        const auto& nb = neighborhoods[static_cast<std::size_t>(i)];
        terms.clear();
        terms.reserve(nb.size());
        for (int j : nb) terms.push_back(H.row(j).transpose() / g.norm_coeff(i, j));
        std::sort(terms.begin(), terms.end(), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
            return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
        });
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(H.cols());
        for (const auto& t : terms) acc += t;
        out.row(i) = acc.transpose();
    }
    return out;
}

Eigen::MatrixXd gcn_layer(const Eigen::MatrixXd& H, const ServiceGraph& g, const Eigen::MatrixXd& W,
                          const std::vector<std::vector<int>>& neighborhoods, Activation act) {
    Eigen::MatrixXd z = apply_activation(aggregate_neighbors(H, g, neighborhoods) * W, act);
    if (!all_finite(z)) {
        for (Eigen::Index i = 0; i < z.rows(); ++i)
            if (!z.row(i).allFinite())
                throw NumericalError("gcn_layer: non-finite embedding at node " +
                                     g.node_id(static_cast<int>(i)));
    }
    return z;
}

Eigen::MatrixXd forward_with_plan(const Eigen::MatrixXd& X, const ServiceGraph& g,
                                  const ModelParams& params, const ViewPlan& plan, FrameCache* cache) {
    if (X.rows() != static_cast<Eigen::Index>(g.size()))
        throw ConfigError("forward: frame has " + std::to_string(X.rows()) + " rows, graph has " +
                          std::to_string(g.size()) + " nodes");
    const int layers = params.dims.layers;
    if (static_cast<int>(plan.neighborhoods.size()) != layers)
        throw ConfigError("forward: plan depth does not match model layers");

    Eigen::MatrixXd x = X;
    if (plan.feature_mask.size() > 0) x.array() *= plan.feature_mask;

    Eigen::MatrixXd u = (x * params.embed_w[0]).rowwise() + params.embed_b[0].transpose();
    Eigen::MatrixXd hh = apply_activation(u, params.activation);
    Eigen::MatrixXd h = (hh * params.embed_w[1]).rowwise() + params.embed_b[1].transpose();

    if (cache) {
        cache->X = x;
        cache->U = u;
        cache->Hh = hh;
        cache->Z.clear();
        cache->A.clear();
        cache->P.clear();
        cache->Z.push_back(h);
    }

    Eigen::MatrixXd z = h;
    for (int l = 0; l < layers; ++l) {
        Eigen::MatrixXd a = aggregate_neighbors(z, g, plan.neighborhoods[static_cast<std::size_t>(l)]);
        Eigen::MatrixXd p = a * params.gcn_w[static_cast<std::size_t>(l)];
        // hidden layers use the model activation, the last layer stays linear
        Activation act = (l + 1 < layers) ? params.activation : Activation::identity;
        z = apply_activation(p, act);
        if (!all_finite(z)) {
            for (Eigen::Index i = 0; i < z.rows(); ++i)
                if (!z.row(i).allFinite())
                    throw NumericalError("forward: non-finite embedding at node " +
                                         g.node_id(static_cast<int>(i)) + " in layer " + std::to_string(l));
        }
        if (cache) {
            cache->A.push_back(std::move(a));
            cache->P.push_back(std::move(p));
            cache->Z.push_back(z);
        }
    }
    return z;
}

Eigen::MatrixXd forward(const Eigen::MatrixXd& X, const ServiceGraph& g, const ModelParams& params,
                        int neighborhood_cap, std::uint64_t seed) {
    return forward_with_plan(X, g, params, plan_base_view(g, params.dims.layers, neighborhood_cap, seed));
}

std::vector<Eigen::MatrixXd> encode_panel(const std::vector<Eigen::MatrixXd>& frames,
                                          const ServiceGraph& g, const ModelParams& params,
                                          int neighborhood_cap, std::uint64_t seed) {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t)
        out.push_back(forward(frames[t], g, params, neighborhood_cap,
                              seed_combine(seed, static_cast<std::uint64_t>(t))));
    return out;
}

namespace {

std::string double_to_hex(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

double hex_to_double(const std::string& s) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + s.size()) throw ConfigError("checkpoint: bad hex float '" + s + "'");
    return v;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(double_to_hex(m(r, c)));
    return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(arr)}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw ConfigError("checkpoint: matrix payload size mismatch");
    Eigen::MatrixXd m(rows, cols);
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = hex_to_double(data[static_cast<std::size_t>(k++)]);
    return m;
}

constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
    params.validate();
    nlohmann::json j;
    j["format_version"] = kCheckpointVersion;
    j["dims"] = {{"d_in", params.dims.d_in},
                 {"d_hid", params.dims.d_hid},
                 {"d_emb", params.dims.d_emb},
                 {"layers", params.dims.layers}};
    j["activation"] = activation_name(params.activation);
    j["embed_w"] = nlohmann::json::array();
    j["embed_b"] = nlohmann::json::array();
    for (const auto& w : params.embed_w) j["embed_w"].push_back(matrix_to_json(w));
    for (const auto& b : params.embed_b) j["embed_b"].push_back(matrix_to_json(b));
    j["gcn_w"] = nlohmann::json::array();
    for (const auto& w : params.gcn_w) j["gcn_w"].push_back(matrix_to_json(w));

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write checkpoint: " + path);
    out << j.dump(1) << '\n';
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("checkpoint " + path + ": invalid JSON (" + std::string(e.what()) + ")");
    }
    if (j.at("format_version").get<int>() != kCheckpointVersion)
        throw ConfigError("checkpoint " + path + ": unsupported format version");

    ModelParams p;
    p.dims.d_in = j.at("dims").at("d_in").get<int>();
    p.dims.d_hid = j.at("dims").at("d_hid").get<int>();
    p.dims.d_emb = j.at("dims").at("d_emb").get<int>();
    p.dims.layers = j.at("dims").at("layers").get<int>();
    p.activation = activation_from_name(j.at("activation").get<std::string>());
    for (const auto& w : j.at("embed_w")) p.embed_w.push_back(matrix_from_json(w));
    for (const auto& b : j.at("embed_b")) p.embed_b.push_back(matrix_from_json(b).col(0));
    for (const auto& w : j.at("gcn_w")) p.gcn_w.push_back(matrix_from_json(w));
    p.validate();
    return p;
}

}  // namespace depanom
