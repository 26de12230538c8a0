#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "depanom/errors.hpp"
#include "depanom/eval.hpp"
#include "depanom/rng.hpp"

using namespace depanom;

namespace {

// independent oracle: count every (anomaly, normal) pair directly
double brute_force_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    long pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("prf: perfect predictions") {
    std::vector<int> labels{1, 0, 1, 0, 0};
    PrfResult r = prf(labels, labels);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.f1 == 1.0);
    CHECK(r.counts.tp == 2);
    CHECK(r.counts.tn == 3);
}

TEST_CASE("prf: published-style row arithmetic P=0.920 R=0.900 -> F1~0.910") {
    // tp 207, fp 18, fn 23: precision 207/225 = 0.92, recall 207/230 = 0.90
    std::vector<int> preds, labels;
    for (int i = 0; i < 207; ++i) { preds.push_back(1); labels.push_back(1); }
    for (int i = 0; i < 18; ++i) { preds.push_back(1); labels.push_back(0); }
    for (int i = 0; i < 23; ++i) { preds.push_back(0); labels.push_back(1); }
    for (int i = 0; i < 50; ++i) { preds.push_back(0); labels.push_back(0); }
    PrfResult r = prf(preds, labels);
    CHECK(r.precision == doctest::Approx(0.920).epsilon(1e-12));
    CHECK(r.recall == doctest::Approx(0.900).epsilon(1e-12));
    CHECK(r.f1 == doctest::Approx(0.9098901098901099).epsilon(1e-12));
    CHECK(r.f1 == doctest::Approx(0.910).epsilon(1e-3));
}

TEST_CASE("prf: zero conventions and unlabeled exclusion") {
    PrfResult none = prf(std::vector<int>{0, 0, 0}, std::vector<int>{1, 0, 1});
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);

    PrfResult with_unlabeled = prf(std::vector<int>{1, 1, 0, 1}, std::vector<int>{1, -1, 0, -1});
    CHECK(with_unlabeled.counts.tp == 1);
    CHECK(with_unlabeled.counts.fp == 0);
    CHECK(with_unlabeled.counts.tp + with_unlabeled.counts.fp + with_unlabeled.counts.tn +
              with_unlabeled.counts.fn ==
          2);
}

TEST_CASE("prf: invariant under simultaneous permutation") {
    SplitMix64 rng(3);
    std::vector<int> preds, labels;
    for (int i = 0; i < 200; ++i) {
        preds.push_back(rng.bernoulli(0.4) ? 1 : 0);
        labels.push_back(rng.bernoulli(0.3) ? 1 : (rng.bernoulli(0.1) ? -1 : 0));
    }
    PrfResult a = prf(preds, labels);
    std::vector<std::size_t> order(preds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_int(i + 1)]);
    std::vector<int> p2, l2;
    for (std::size_t i : order) {
        p2.push_back(preds[i]);
        l2.push_back(labels[i]);
    }
    PrfResult b = prf(p2, l2);
    CHECK(a.precision == b.precision);
    CHECK(a.recall == b.recall);
    CHECK(a.f1 == b.f1);
}

TEST_CASE("auc: trivial values") {
    using dv = std::vector<double>;
    using iv = std::vector<int>;
    CHECK(auc(dv{0.9, 0.8, 0.1, 0.2}, iv{1, 1, 0, 0}) == 1.0);
    CHECK(auc(dv{0.5, 0.5, 0.5, 0.5}, iv{1, 0, 1, 0}) == 0.5);
    CHECK(auc(dv{0.9, 0.4, 0.5, 0.1}, iv{1, 1, 0, 0}) == 0.75);  // 3 of 4 pairs
    CHECK_THROWS_AS(auc(dv{0.1, 0.2}, iv{1, 1}), ConfigError);
}

TEST_CASE("auc: rank computation equals brute-force pair counting exactly") {
    SplitMix64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        int count = 10 + static_cast<int>(rng.uniform_int(190));
        std::vector<double> scores;
        std::vector<int> labels;
        bool pos = false, neg = false;
        for (int i = 0; i < count; ++i) {
            // coarse grid makes ties common
            scores.push_back(std::floor(rng.uniform01() * 12.0) / 12.0);
            int l = rng.bernoulli(0.25) ? 1 : 0;
            if (rng.bernoulli(0.1)) l = -1;
            labels.push_back(l);
            if (l == 1) pos = true;
            if (l == 0) neg = true;
        }
        if (!pos || !neg) continue;
        std::vector<double> s2;
        std::vector<int> l2;
        for (std::size_t i = 0; i < scores.size(); ++i)
            if (labels[i] >= 0) {
                s2.push_back(scores[i]);
                l2.push_back(labels[i]);
            }
        CHECK(auc(scores, labels) == brute_force_auc(s2, l2));
    }
}

TEST_CASE("auc: invariant under strictly increasing transforms") {
    SplitMix64 rng(8);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 150; ++i) {
        scores.push_back(std::floor(rng.uniform01() * 10.0) / 10.0);
        labels.push_back(rng.bernoulli(0.3) ? 1 : 0);
    }
    labels[0] = 1;
    labels[1] = 0;
    std::vector<double> transformed;
    for (double s : scores) transformed.push_back(std::exp(s));
    CHECK(auc(scores, labels) == auc(transformed, labels));
}

TEST_CASE("rolling_eval: stationary series give a constant line") {
    Eigen::MatrixXd scores(2, 8);
    Eigen::MatrixXi labels(2, 8);
    for (int t = 0; t < 8; ++t) {
        scores(0, t) = 0.9;
        scores(1, t) = 0.1;
        labels(0, t) = 1;
        labels(1, t) = 0;
    }
    auto points = rolling_eval(scores, labels, 0.5, 4);
    REQUIRE(points.size() == 5);
    for (const auto& p : points) {
        CHECK(p.prf.f1 == 1.0);
        REQUIRE(p.auc_defined);
        CHECK(p.auc == 1.0);
    }
}

TEST_CASE("rolling_eval: full-range window equals the global report") {
    SplitMix64 rng(9);
    Eigen::MatrixXd scores(3, 12);
    Eigen::MatrixXi labels(3, 12);
    for (int t = 0; t < 12; ++t)
        for (int i = 0; i < 3; ++i) {
            scores(i, t) = rng.uniform01();
            labels(i, t) = rng.bernoulli(0.3) ? 1 : 0;
        }
    labels(0, 0) = 1;
    labels(1, 0) = 0;
    auto points = rolling_eval(scores, labels, 0.5, 12);
    REQUIRE(points.size() == 1);
    Eigen::MatrixXi preds = (scores.array() > 0.5).cast<int>();
    PrfResult global = prf(preds, labels);
    CHECK(points[0].prf.f1 == global.f1);
    CHECK(points[0].auc == auc(scores, labels));
}

TEST_CASE("rolling_eval: single-class window marks auc undefined, prf still computed") {
    Eigen::MatrixXd scores(1, 6);
    Eigen::MatrixXi labels(1, 6);
    for (int t = 0; t < 6; ++t) {
        scores(0, t) = 0.9;  // everything flagged
        labels(0, t) = t < 3 ? 0 : 1;
    }
    auto points = rolling_eval(scores, labels, 0.5, 3);
    REQUIRE(points.size() == 4);
    CHECK_FALSE(points[0].auc_defined);  // normals only
    CHECK(points[0].prf.recall == 0.0);  // no positive labels: recall-0 convention
    CHECK(points[0].prf.precision == 0.0);
    CHECK(points[1].auc_defined);
}
