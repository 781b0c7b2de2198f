#include "oracles.hpp"

#include "plskm/core.hpp"
#include "plskm/datagen.hpp"
#include "plskm/error.hpp"
#include "plskm/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace plskm;

namespace {

// Mean silhouette width of `points` under `labels`, by explicit loops.
double silhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels, int k) {
    const int n = static_cast<int>(points.rows());
    double total = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<double> sum(k, 0.0);
        std::vector<int> count(k, 0);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            sum[labels[j]] += (points.row(i) - points.row(j)).norm();
            ++count[labels[j]];
        }
        const double a = sum[labels[i]] / std::max(1, count[labels[i]]);
        double b = std::numeric_limits<double>::infinity();
        for (int g = 0; g < k; ++g)
            if (g != labels[i] && count[g] > 0) b = std::min(b, sum[g] / count[g]);
        total += (b - a) / std::max(a, b);
    }
    return total / n;
}

}  // namespace

TEST_CASE("segment counts") {
    CHECK(segment_counts(100, standard_proportions(3, ProportionScheme::Balanced)) == std::vector<int>{33, 33, 34});
    CHECK(segment_counts(300, standard_proportions(4, ProportionScheme::Unbalanced2)) == std::vector<int>{30, 90, 90, 90});
    CHECK(segment_counts(150, standard_proportions(3, ProportionScheme::Unbalanced1)) == std::vector<int>{99, 26, 25});
    CHECK(segment_counts(10, {0.5, 0.25, 0.25}) == std::vector<int>{5, 3, 2});
    CHECK_THROWS_AS(segment_counts(10, {0.5, 0.4}), DataError);
}

TEST_CASE("generated labels follow the rounded counts") {
    for (int context = 1; context <= 4; ++context)
        for (int c : {1, 5, 18}) {
            const auto cell = standard_cell(context, c);
            const auto sim = generate_dataset(cell.config, 17);
            CHECK(sim.truth.counts() == segment_counts(cell.config.n, cell.config.proportions));
            CHECK(sim.x.rows() == cell.config.n);
            CHECK(sim.x.cols() == sim.spec.num_mvs());
        }
}

TEST_CASE("cluster centres") {
    const Eigen::MatrixXd tri = cluster_centers(3, 2, 5.0);
    CHECK((tri.row(0) - tri.row(1)).norm() == doctest::Approx(5.0));
    CHECK((tri.row(1) - tri.row(2)).norm() == doctest::Approx(5.0));
    CHECK((tri.row(0) - tri.row(2)).norm() == doctest::Approx(5.0));
    CHECK(tri.colwise().sum().norm() < 1e-12);

    const Eigen::MatrixXd line = cluster_centers(4, 1, 2.0);
    for (int c = 1; c < 4; ++c) CHECK(line(c, 0) - line(c - 1, 0) == doctest::Approx(2.0));

    const Eigen::MatrixXd square = cluster_centers(4, 2, 3.0);
    for (int c = 0; c < 4; ++c) CHECK((square.row(c) - square.row((c + 1) % 4)).norm() == doctest::Approx(3.0));

    CHECK(cluster_centers(3, 2, 0.0).norm() == 0.0);
}

TEST_CASE("noiseless data is the exact structural reconstruction") {
    for (auto model : {PathModelKind::Model1, PathModelKind::Model2}) {
        SimConfig cfg;
        cfg.model = model;
        cfg.sigma = 0.0;
        const auto sim = generate_dataset(cfg, 23);
        const int h = sim.spec.num_exogenous(), l = sim.spec.num_endogenous();
        const Eigen::MatrixXd xi = sim.latent.leftCols(h);
        const Eigen::MatrixXd eta = xi * sim.gamma.transpose() *
                                    (Eigen::MatrixXd::Identity(l, l) - sim.beta.transpose()).inverse();
        CHECK((sim.latent.rightCols(l) - eta).cwiseAbs().maxCoeff() < 1e-12);
        const Eigen::MatrixXd rebuilt = xi * sim.loadings.leftCols(h).transpose() + eta * sim.loadings.rightCols(l).transpose();
        CHECK((sim.x - rebuilt).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(sim.x);
        CHECK(lu.rank() <= sim.spec.num_lvs());
        for (int j = 0; j < sim.loadings.rows(); ++j)
            for (int p = 0; p < sim.loadings.cols(); ++p)
                CHECK(sim.loadings(j, p) == (sim.spec.measurement(j, p) ? 0.85 : 0.0));
    }
}

TEST_CASE("generation is a pure function of config and seed") {
    SimConfig cfg;
    const auto a = generate_dataset(cfg, 5), b = generate_dataset(cfg, 5), c = generate_dataset(cfg, 6);
    CHECK(a.x == b.x);
    CHECK(a.truth == b.truth);
    CHECK(a.x != c.x);
}

TEST_CASE("low error gives well separated groups") {
    SimConfig cfg;
    cfg.sigma = 0.30;
    const auto sim = generate_dataset(cfg, 29);
    const Eigen::MatrixXd scores = data_scores(standardize(sim.x).values, unit_design_loadings(sim.spec));
    CHECK(silhouette(scores, sim.truth.labels, 3) > 0.5);
}

TEST_CASE("no separation leaves nothing to find") {
    SimConfig cfg;
    cfg.separation = 0.0;
    const auto sim = generate_dataset(cfg, 31);
    const auto fit = fit_multistart(sim.spec, standardize(sim.x), 3, {});
    CHECK(std::abs(adjusted_rand_index(fit.state.membership.labels, sim.truth.labels)) < 0.1);
}

TEST_CASE("intro dataset") {
    const auto sim = generate_intro_dataset({}, 37);
    CHECK(sim.x.rows() == 100);
    CHECK(sim.x.cols() == 15);
    CHECK(sim.truth.counts() == std::vector<int>{30, 30, 40});
    CHECK(sim.column_names.front() == "s1");
    CHECK(sim.column_names.back() == "z6");
    CHECK(sim.spec.num_lvs() == 3);
    CHECK(sim.spec.num_mvs() == 15);
    for (int p = 0; p < 3; ++p) CHECK(sim.spec.block(p).size() == 5);
    for (int j = 9; j < 15; ++j) CHECK(sim.loadings.row(j).norm() == 0.0);

    const auto x = standardize(sim.x);
    const auto fit = fit_multistart(sim.spec, x, 3, {});
    CHECK(adjusted_rand_index(fit.state.membership.labels, sim.truth.labels) > 0.9);
}

TEST_CASE("synthetic customer satisfaction data") {
    const auto sim = generate_ecsi_synthetic(2024);
    CHECK(sim.x.rows() == 250);
    CHECK(sim.x.cols() == 24);
    auto counts = sim.truth.counts();
    std::sort(counts.begin(), counts.end());
    CHECK(counts == std::vector<int>{46, 92, 112});
    int missing = 0;
    for (int i = 0; i < 250; ++i)
        for (int j = 0; j < 24; ++j) {
            if (std::isnan(sim.x(i, j))) {
                ++missing;
                continue;
            }
            CHECK(sim.x(i, j) >= 1.0);
            CHECK(sim.x(i, j) <= 10.0);
            CHECK(sim.x(i, j) == std::round(sim.x(i, j)));
        }
    CHECK(missing > 0);
    CHECK(missing < 250 * 24 / 20);
}

TEST_CASE("standard cells") {
    const auto c = standard_cell(3, 14);
    CHECK(c.label == "c3-case14");
    CHECK(c.config.k == 4);
    CHECK(c.config.model == PathModelKind::Model1);
    CHECK(c.config.n == 300);
    CHECK(c.config.proportions == standard_proportions(4, ProportionScheme::Unbalanced1));
    CHECK(c.config.sigma == doctest::Approx(0.4));
    CHECK(standard_cell(2, 1).config.model == PathModelKind::Model2);
    CHECK_THROWS(standard_cell(5, 1));
    CHECK_THROWS(standard_cell(1, 19));
}

TEST_CASE("grid files") {
    const auto g = parse_grid(R"(# demo
replicates = 2
[[cell]]
context = 1
case = 2

[[cell]]
label = "custom"
model = "model2"
n = 60
k = 3
proportions = [0.5, 0.25, 0.25]
sigma = 0.4
)");
    CHECK(g.replicates == 2);
    REQUIRE(g.cells.size() == 2);
    CHECK(g.cells[0].label == "c1-case2");
    CHECK(g.cells[1].config.model == PathModelKind::Model2);
    CHECK(g.cells[1].config.proportions == std::vector<double>{0.5, 0.25, 0.25});
    CHECK_THROWS(parse_grid("[[cell]]\ncolour = 3\n"));

    const auto j = parse_grid(R"({"replicates": 1, "cells": [{"context": 4, "case": 9}]})");
    CHECK(j.cells.at(0).config.k == 4);
}

TEST_CASE("experiment grid") {
    GridOptions opt;
    opt.replicates = 1;
    opt.fit.n_starts = 3;
    auto cell = standard_cell(1, 1);
    cell.config.n = 60;
    GridCell broken = cell;
    broken.label = "broken";
    broken.config.k = 200;
    const auto r = run_experiment_grid({cell, broken}, opt);
    REQUIRE(r.cells.size() == 2);
    CHECK(r.cells[0].completed == 1);
    CHECK(r.cells[1].failed == 1);
    CHECK(r.cells[0].means.count("pls-sem-km/ari") == 1);
    CHECK(r.cells[0].means.count("tandem/r2star") == 1);
    const auto again = run_experiment_grid({cell}, opt);
    CHECK(again.cells[0].means == r.cells[0].means);
}
