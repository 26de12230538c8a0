#include <doctest.h>

#include <cmath>

#include "depanom/detect.hpp"
#include "depanom/errors.hpp"
#include "depanom/eval.hpp"
#include "depanom/rng.hpp"
#include "instances.hpp"
#include "test_util.hpp"

using namespace depanom;

namespace {

ReferenceBank bank_from_rows(const Eigen::MatrixXd& rows, int k) {
    ReferenceBank bank;
    bank.vectors = rows;
    bank.k = k;
    for (int r = 0; r < bank.size(); ++r) bank.provenance.emplace_back(r, 0);
    return bank;
}

struct DetectFixture {
    ServiceGraph g;
    MetricPanel panel;
    ModelParams params;

    DetectFixture(int nodes, int steps, std::uint64_t seed) {
        EdgeList edges;
        for (int i = 0; i + 1 < nodes; ++i)
            edges.emplace_back("s" + std::to_string(i), "s" + std::to_string(i + 1));
        g = build_graph(edges);
        panel.node_ids = g.node_ids();
        panel.feature_names = {"f0", "f1", "f2"};
        panel.labels = Eigen::MatrixXi::Zero(nodes, steps);
        SplitMix64 rng(seed);
        for (int t = 0; t < steps; ++t) {
            panel.timestamps.push_back(60 * t);
            Eigen::MatrixXd frame(nodes, 3);
            for (int i = 0; i < nodes; ++i)
                for (int f = 0; f < 3; ++f) frame(i, f) = rng.gauss();
            panel.frames.push_back(frame);
        }
        params = init_params({3, 6, 4, 1}, Activation::relu, seed);
    }
};

}  // namespace

TEST_CASE("build_reference: under capacity keeps every eligible cell") {
    DetectFixture fx(5, 20, 1);
    ReferenceBank bank = build_reference(fx.params, fx.g, fx.panel, {0, 20}, {10, 4096}, 6, 9);
    CHECK(bank.size() == 100);
    CHECK(bank.k == 10);
}

TEST_CASE("build_reference: down-samples to capacity deterministically") {
    DetectFixture fx(5, 20, 2);
    ReferenceBank a = build_reference(fx.params, fx.g, fx.panel, {0, 20}, {10, 50}, 6, 9);
    ReferenceBank b = build_reference(fx.params, fx.g, fx.panel, {0, 20}, {10, 50}, 6, 9);
    CHECK(a.size() == 50);
    CHECK(a.provenance == b.provenance);
    CHECK(same_mat(a.vectors, b.vectors));
}

TEST_CASE("build_reference: anomalous cells never enter the bank") {
    DetectFixture fx(5, 20, 3);
    for (int t = 0; t < 20; t += 3) fx.panel.labels(t % 5, t) = 1;
    fx.panel.labels(2, 5) = -1;  // unlabeled cells are admitted
    ReferenceBank bank = build_reference(fx.params, fx.g, fx.panel, {0, 20}, {10, 4096}, 6, 9);
    for (auto [node, step] : bank.provenance) CHECK(fx.panel.labels(node, step) != 1);
    bool has_unlabeled = false;
    for (auto [node, step] : bank.provenance) has_unlabeled |= (node == 2 && step == 5);
    CHECK(has_unlabeled);

    for (int t = 0; t < 20; ++t)
        for (int i = 0; i < 5; ++i) fx.panel.labels(i, t) = 1;
    CHECK_THROWS_WITH_AS(build_reference(fx.params, fx.g, fx.panel, {0, 20}, {10, 4096}, 6, 9),
                         "no normal reference", ConfigError);
}

TEST_CASE("score_frames: exact match, antipode, right angle") {
    Eigen::MatrixXd z(1, 2);
    z << 0.6, -0.8;
    Eigen::MatrixXd bank_rows(3, 2);
    bank_rows << 0.6, -0.8, 0.6, -0.8, 0.6, -0.8;
    ReferenceBank bank = bank_from_rows(bank_rows, 3);
    double s = score_frames({z}, bank)(0, 0);
    CHECK(std::abs(s) < 1e-12);  // identical to >= k bank vectors

    ReferenceBank one = bank_from_rows(bank_rows.topRows(1), 1);
    Eigen::MatrixXd anti(1, 2);
    anti << -0.6, 0.8;
    CHECK(score_frames({anti}, one)(0, 0) == doctest::Approx(2.0).epsilon(1e-12));

    Eigen::MatrixXd e1(1, 2), e2(1, 2);
    e1 << 1, 0;
    e2 << 0, 1;
    CHECK(score_frames({e2}, bank_from_rows(e1, 1))(0, 0) == 1.0);  // 1 - cos(90 deg)
}

TEST_CASE("score_frames: adding a bank vector equal to the query never raises its score") {
    SplitMix64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd rows(8, 3);
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 3; ++c) rows(r, c) = rng.gauss();
        Eigen::MatrixXd q(1, 3);
        for (int c = 0; c < 3; ++c) q(0, c) = rng.gauss();

        double before = score_frames({q}, bank_from_rows(rows, 4))(0, 0);
        Eigen::MatrixXd bigger(9, 3);
        bigger << rows, q;
        double after = score_frames({q}, bank_from_rows(bigger, 4))(0, 0);
        CHECK(after <= before + 1e-12);
    }
}

TEST_CASE("select_threshold: separable case returns the smallest maximizing midpoint") {
    std::vector<double> scores{0.1, 0.1, 0.9, 0.9};
    std::vector<int> labels{0, 0, 1, 1};
    CHECK(select_threshold(scores, labels) == 0.5);
}

TEST_CASE("select_threshold: degenerate and single-class inputs") {
    std::vector<double> flat{0.4, 0.4, 0.4};
    CHECK_THROWS_WITH_AS(select_threshold(flat, {0, 1, 0}), "no separating candidate", ConfigError);
    CHECK_THROWS_AS(select_threshold({0.1, 0.2}, {1, 1}), ConfigError);
    CHECK_THROWS_AS(select_threshold({0.1, 0.2}, {0, 0}), ConfigError);
}

TEST_CASE("select_threshold: no orientation search for inverted score distributions") {
    // anomalies scoring LOW stay poorly detected; the threshold is still the
    // F1-best under the higher-is-anomalous contract
    std::vector<double> scores{0.9, 0.8, 0.1, 0.2, 0.5};
    std::vector<int> labels{0, 0, 1, 1, 1};
    double thr = select_threshold(scores, labels);
    std::vector<int> preds;
    for (double s : scores) preds.push_back(s > thr ? 1 : 0);
    PrfResult r = prf(preds, labels);
    CHECK(r.f1 < 1.0);
}

TEST_CASE("select_threshold: achieves the exhaustive best F1") {
    SplitMix64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        int count = 20 + static_cast<int>(rng.uniform_int(180));
        std::vector<double> scores;
        std::vector<int> labels;
        bool pos = false, neg = false;
        for (int i = 0; i < count; ++i) {
            scores.push_back(std::floor(rng.uniform01() * 20.0) / 20.0);  // coarse grid forces ties
            labels.push_back(rng.bernoulli(0.3) ? 1 : 0);
            if (labels.back() == 1) pos = true;
            else neg = true;
        }
        if (!pos || !neg) continue;
        std::vector<double> distinct = scores;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() < 2) continue;

        double chosen = select_threshold(scores, labels);
        auto f1_at = [&](double thr) {
            std::vector<int> preds;
            for (double s : scores) preds.push_back(s > thr ? 1 : 0);
            return prf(preds, labels).f1;
        };
        double best = -1.0;
        for (std::size_t c = 0; c + 1 < distinct.size(); ++c)
            best = std::max(best, f1_at(distinct[c] + 0.5 * (distinct[c + 1] - distinct[c])));
        CHECK(f1_at(chosen) == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("classify boundaries and shape") {
    Eigen::MatrixXd scores(1, 3);
    scores << 0.5, 0.5 + 1e-12, 0.2;
    Eigen::MatrixXi preds = classify(scores, 0.5);
    CHECK(preds(0, 0) == 0);  // score == threshold
    CHECK(preds(0, 1) == 1);
    CHECK(preds(0, 2) == 0);
    Eigen::MatrixXd empty(0, 0);
    CHECK(classify(empty, 0.1).size() == 0);
}

TEST_CASE("scoring is invariant under uniform positive rescaling") {
    SplitMix64 rng(29);
    Eigen::MatrixXd rows(12, 4);
    for (int r = 0; r < 12; ++r)
        for (int c = 0; c < 4; ++c) rows(r, c) = rng.gauss();
    Eigen::MatrixXd q(3, 4);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) q(r, c) = rng.gauss();

    Eigen::MatrixXd base = score_frames({q}, bank_from_rows(rows, 5));
    // powers of two rescale exactly
    for (double c : {2.0, 0.25}) {
        Eigen::MatrixXd scaled = score_frames({Eigen::MatrixXd(c * q)}, bank_from_rows(c * rows, 5));
        CHECK(same_mat(scaled, base));
    }
    Eigen::MatrixXd scaled = score_frames({Eigen::MatrixXd(3.7 * q)}, bank_from_rows(3.7 * rows, 5));
    CHECK(max_abs_diff(scaled, base) < 1e-12);
    // identical scores + identical threshold => identical predictions
    CHECK(same_mat(classify(scaled, 0.37), classify(base, 0.37)));
}
