#include "oracles.hpp"

#include "plskm/core.hpp"
#include "plskm/datagen.hpp"
#include "plskm/error.hpp"
#include "plskm/kmeans.hpp"
#include "plskm/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace plskm;

namespace {

PathModelSpec one_mv_blocks() {
    return build_spec({{"A", LvKind::Exogenous}, {"B", LvKind::Endogenous}}, {{"a", "A"}, {"b", "B"}}, {{"A", "B"}});
}

Membership labels(std::vector<int> l, int k) { return Membership{std::move(l), k}; }

DataMatrix noiseless(PathModelKind model, int k, std::uint64_t seed) {
    SimConfig cfg;
    cfg.model = model;
    cfg.k = k;
    cfg.sigma = 0.0;
    cfg.proportions = standard_proportions(k, ProportionScheme::Balanced);
    const auto sim = generate_dataset(cfg, seed);
    return standardize(sim.x, sim.column_names);
}

}  // namespace

TEST_CASE("standardize") {
    Eigen::MatrixXd raw(2, 1);
    raw << 1, 3;
    const auto z = standardize(raw);
    CHECK(z.values(0, 0) == doctest::Approx(-std::sqrt(0.5)).epsilon(1e-12));
    CHECK(z.values(1, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(z.means(0) == 2.0);

    const Eigen::MatrixXd m = oracle::random_matrix(10, 3, 7);
    const auto once = standardize(m);
    CHECK((standardize(once.values).values - once.values).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((once.values - oracle::zscore(m)).cwiseAbs().maxCoeff() < 1e-12);

    CHECK_THROWS_AS(standardize(Eigen::MatrixXd::Ones(4, 2)), DataError);
    CHECK_THROWS_AS(standardize(Eigen::MatrixXd::Ones(1, 2)), DataError);
}

TEST_CASE("init_state") {
    const auto x = standardize(oracle::random_matrix(8, 2, 1));
    const auto s = init_state(one_mv_blocks(), x, 2, 5);
    CHECK(s.loadings.isApprox(Eigen::MatrixXd::Identity(2, 2)));

    const auto spec = simulation_spec(PathModelKind::Model1);
    const auto x9 = standardize(oracle::random_matrix(20, 9, 2));
    const auto s9 = init_state(spec, x9, 3, 11);
    for (int j = 0; j < 9; ++j)
        for (int p = 0; p < 3; ++p)
            CHECK(s9.loadings(j, p) == doctest::Approx(spec.measurement(j, p) / std::sqrt(3.0)));
    CHECK(s9.membership.all_nonempty());
    CHECK(init_state(spec, x9, 3, 11).membership == s9.membership);
    CHECK_THROWS(init_state(spec, x9, 21, 1));
}

TEST_CASE("random_membership covers every cluster") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto u = random_membership(6, 5, seed);
        CHECK(u.all_nonempty());
    }
    CHECK(random_membership(30, 4, 3) == random_membership(30, 4, 3));
}

TEST_CASE("compute_centroids") {
    const Eigen::MatrixXd x = oracle::random_matrix(2, 3, 3);
    CHECK(compute_centroids(labels({0, 1}, 2), x).isApprox(x));

    const auto z = standardize(oracle::random_matrix(9, 3, 4)).values;
    CHECK(compute_centroids(labels(std::vector<int>(9, 0), 1), z).cwiseAbs().maxCoeff() < 1e-12);

    const Eigen::MatrixXd r = oracle::random_matrix(6, 3, 5);
    const std::vector<int> l{0, 1, 1, 0, 2, 1};
    CHECK((compute_centroids(labels(l, 3), r) - oracle::cluster_means(r, l, 3)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(compute_centroids(labels({0, 0, 0, 0, 2, 0}, 3), r), DataError);
}

TEST_CASE("compute_scores") {
    const Eigen::MatrixXd x = oracle::random_matrix(6, 3, 6);
    const std::vector<int> l{0, 1, 0, 1, 1, 0};
    const Eigen::MatrixXd c = oracle::cluster_means(x, l, 2);
    Eigen::MatrixXd lam(3, 2);
    lam << 0.6, 0, 0.8, 0, 0, 1;
    const Eigen::MatrixXd y = compute_scores(labels(l, 2), c, lam);
    for (int i = 0; i < 6; ++i)
        for (int p = 0; p < 2; ++p) {
            double v = 0;
            for (int j = 0; j < 3; ++j) v += c(l[i], j) * lam(j, p);
            CHECK(y(i, p) == doctest::Approx(v).epsilon(1e-12));
        }
    const Eigen::MatrixXd y1 = compute_scores(labels(std::vector<int>(6, 0), 1), c.topRows(1), lam);
    for (int i = 1; i < 6; ++i) CHECK(y1.row(i) == y1.row(0));
}

TEST_CASE("inner_approximation") {
    Eigen::MatrixXd y(4, 2);
    y << 1, 2, -1, 0, 2, 3, -2, -1;
    BinaryMatrix d(2, 2);
    d << 0, 1, 1, 0;
    const Eigen::MatrixXd yw = inner_approximation(y, d);
    // population covariance of the two columns
    const double m1 = 0.0, m2 = 1.0;
    double cov = 0;
    for (int i = 0; i < 4; ++i) cov += (y(i, 0) - m1) * (y(i, 1) - m2);
    cov /= 4;
    CHECK((yw.col(0) - cov * y.col(1)).norm() < 1e-12);
    CHECK((yw.col(1) - cov * y.col(0)).norm() < 1e-12);

    CHECK(inner_approximation(y, BinaryMatrix::Zero(2, 2)).norm() == 0.0);

    Eigen::MatrixXd orth(4, 2);
    orth << 1, 1, -1, 1, 1, -1, -1, -1;
    CHECK(inner_approximation(orth, d).norm() < 1e-12);
    CHECK_THROWS_AS(inner_approximation(Eigen::MatrixXd::Ones(4, 2), d), NumericalError);
}

TEST_CASE("outer_update") {
    const auto spec = one_mv_blocks();
    const Eigen::MatrixXd x = oracle::random_matrix(6, 2, 8);
    const std::vector<int> l{0, 1, 2, 0, 1, 2};
    const Eigen::MatrixXd c = oracle::cluster_means(x, l, 3);
    const Eigen::MatrixXd yw = oracle::random_matrix(6, 2, 9);
    CHECK(outer_update(c, labels(l, 3), yw, spec.measurement).isApprox(Eigen::MatrixXd::Identity(2, 2)));

    SUBCASE("pseudo-inverse agrees with the explicit inverse at full rank") {
        const auto s = simulation_spec(PathModelKind::Model1);
        const Eigen::MatrixXd xx = oracle::random_matrix(12, 9, 10);
        std::vector<int> lab(12);
        for (int i = 0; i < 12; ++i) lab[i] = i % 4;
        const Eigen::MatrixXd cc = oracle::cluster_means(xx, lab, 4);
        const Eigen::MatrixXd w = oracle::random_matrix(12, 3, 11);
        const Eigen::MatrixXd u = oracle::indicator(lab, 4);
        Eigen::MatrixXd raw = cc.transpose() * u.transpose() * w * (w.transpose() * w).inverse();
        raw = raw.cwiseProduct(s.measurement_design());
        for (int p = 0; p < 3; ++p) {
            raw.col(p).normalize();
            if (raw.col(p).sum() < 0) raw.col(p) *= -1;
        }
        const Eigen::MatrixXd got = outer_update(cc, labels(lab, 4), w, s.measurement);
        CHECK((got - raw).cwiseAbs().maxCoeff() < 1e-10);
        for (int j = 0; j < 9; ++j)
            for (int p = 0; p < 3; ++p)
                if (s.measurement(j, p) == 0) CHECK(got(j, p) == 0.0);
        CHECK((got.transpose() * got - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("outer loadings recover equal generating loadings on noiseless data") {
    const auto x = noiseless(PathModelKind::Model1, 3, 21);
    const auto spec = simulation_spec(PathModelKind::Model1);
    FitOptions opt;
    opt.n_starts = 10;
    const auto fit = fit_multistart(spec, x, 3, opt);
    for (int p = 0; p < 3; ++p)
        for (int j : spec.block(p)) CHECK(fit.state.loadings(j, p) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-6));
}

TEST_CASE("assign_memberships") {
    const Eigen::MatrixXd lam = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd c(2, 2);
    c << 1, 0, -1, 0;

    Eigen::MatrixXd exact(3, 2);
    exact << -1, 0, 1, 0, -1, 0;
    CHECK(assign_memberships(exact, c, lam).labels == std::vector<int>{1, 0, 1});

    Eigen::MatrixXd tie(2, 2);
    tie << 0, 5, -1, 0;
    CHECK(assign_memberships(tie, c, lam).labels[0] == 0);

    SUBCASE("row-wise argmin matches exhaustive search") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const Eigen::MatrixXd x = oracle::random_matrix(6, 3, 100 + seed);
            const Eigen::MatrixXd cc = oracle::random_matrix(2, 3, 200 + seed);
            Eigen::MatrixXd l = Eigen::MatrixXd::Zero(3, 2);
            l(0, 0) = 0.6;
            l(1, 0) = 0.8;
            l(2, 1) = 1.0;
            int repairs = 0;
            const auto u = assign_memberships(x, cc, l, &repairs);
            if (repairs > 0) continue;
            CHECK(objective(x, u, cc, l) == doctest::Approx(oracle::brute_force_assignment(x, cc, l, 2)).epsilon(1e-12));
        }
    }

    SUBCASE("repair keeps every cluster occupied") {
        const Eigen::MatrixXd x = oracle::random_matrix(8, 2, 12);
        Eigen::MatrixXd far(3, 2);
        far << 0, 0, 100, 100, -100, 100;
        int repairs = 0;
        const auto u = assign_memberships(x, far, lam, &repairs);
        CHECK(u.all_nonempty());
        CHECK(u.k == 3);
        CHECK(repairs == 2);
    }
}

TEST_CASE("objective") {
    const Eigen::MatrixXd c = oracle::random_matrix(2, 2, 13);
    Eigen::MatrixXd lam(2, 1);
    lam << 0.6, 0.8;
    const std::vector<int> l{0, 1, 1, 0};
    const Eigen::MatrixXd fitted = oracle::indicator(l, 2) * c * lam * lam.transpose();
    CHECK(objective(fitted, labels(l, 2), c, lam) < 1e-24);

    const Eigen::MatrixXd x = oracle::random_matrix(4, 2, 14);
    CHECK(objective(x, labels(l, 2), Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 1)) ==
          doctest::Approx(x.squaredNorm()));
    CHECK(objective(x, labels(l, 2), c, lam) == doctest::Approx(oracle::residual_ss(x, l, c, lam)).epsilon(1e-12));
}

TEST_CASE("conditional descent and orthonormal loadings at every sweep") {
    SimConfig cfg;
    cfg.sigma = 0.5;
    const auto sim = generate_dataset(cfg, 31);
    const auto x = standardize(sim.x);
    int sweeps = 0;
    FitOptions opt;
    opt.observer = [&](const IterationEvent& e) {
        ++sweeps;
        CHECK(e.objective_after_assignment <= e.objective_before_assignment + 1e-9);
        CHECK(e.objective_after_centroids <= e.objective_after_assignment + 1e-9);
        const Eigen::MatrixXd& l = *e.loadings;
        CHECK((l.transpose() * l - Eigen::MatrixXd::Identity(l.cols(), l.cols())).cwiseAbs().maxCoeff() < 1e-10);
        for (int j = 0; j < l.rows(); ++j)
            for (int p = 0; p < l.cols(); ++p)
                if (sim.spec.measurement(j, p) == 0) CHECK(l(j, p) == 0.0);
        CHECK(e.membership->all_nonempty());
    };
    fit_once(sim.spec, x, 3, opt, 4);
    CHECK(sweeps > 0);
}

TEST_CASE("noiseless data: zero objective and exact recovery") {
    for (auto model : {PathModelKind::Model1, PathModelKind::Model2}) {
        SimConfig cfg;
        cfg.model = model;
        cfg.sigma = 0.0;
        const auto sim = generate_dataset(cfg, 41);
        const auto x = standardize(sim.x);
        FitOptions opt;
        const auto fit = fit_multistart(sim.spec, x, 3, opt);
        CHECK(fit.objective_value < 1e-8);
        CHECK(adjusted_rand_index(fit.state.membership.labels, sim.truth.labels) == doctest::Approx(1.0));
    }
}

TEST_CASE("iteration budget") {
    SimConfig cfg;
    cfg.sigma = 0.5;
    const auto sim = generate_dataset(cfg, 51);
    const auto x = standardize(sim.x);
    FitOptions opt;
    opt.max_iterations = 1;
    const auto fit = fit_once(sim.spec, x, 3, opt, 3);
    CHECK_FALSE(fit.converged);
    CHECK(fit.n_iterations == 1);
    opt.max_iterations = 0;
    CHECK_THROWS(opt.validate());
}

TEST_CASE("multistart") {
    SimConfig cfg;
    cfg.sigma = 0.4;
    const auto sim = generate_dataset(cfg, 61);
    const auto x = standardize(sim.x);
    FitOptions opt;
    opt.seed = 77;
    opt.n_starts = 1;
    const auto single = fit_multistart(sim.spec, x, 3, opt);
    const auto once = fit_once(sim.spec, x, 3, opt, 77);
    CHECK(single.objective_value == once.objective_value);
    CHECK(single.state.membership == once.state.membership);

    opt.n_starts = 8;
    const auto serial = fit_multistart(sim.spec, x, 3, opt);
    REQUIRE(serial.runs.size() == 8);
    double best = serial.runs[0].objective;
    for (const auto& r : serial.runs) best = std::min(best, r.objective);
    CHECK(serial.objective_value == best);

    opt.threads = 4;
    const auto threaded = fit_multistart(sim.spec, x, 3, opt);
    CHECK(threaded.objective_value == serial.objective_value);
    CHECK(threaded.state.membership == serial.state.membership);
    CHECK(threaded.state.loadings == serial.state.loadings);
}

TEST_CASE("fit_once is deterministic") {
    SimConfig cfg;
    const auto sim = generate_dataset(cfg, 71);
    const auto x = standardize(sim.x);
    const auto a = fit_once(sim.spec, x, 3, {}, 9);
    const auto b = fit_once(sim.spec, x, 3, {}, 9);
    CHECK(a.state.loadings == b.state.loadings);
    CHECK(a.state.membership == b.state.membership);
    CHECK(a.state.objective_trace == b.state.objective_trace);
}

TEST_CASE("permutation equivariance") {
    SimConfig cfg;
    const auto sim = generate_dataset(cfg, 81);
    const auto x = standardize(sim.x);
    FitOptions opt;
    const auto fit = fit_multistart(sim.spec, x, 3, opt);

    std::vector<int> perm(x.rows());
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    Eigen::MatrixXd px(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i) px.row(i) = x.values.row(perm[i]);
    const auto pfit = fit_multistart(sim.spec, standardize(px), 3, opt);
    std::vector<int> mapped(x.rows());
    for (int i = 0; i < x.rows(); ++i) mapped[i] = fit.state.membership.labels[perm[i]];
    CHECK(adjusted_rand_index(mapped, pfit.state.membership.labels) == doctest::Approx(1.0));

    const auto direct = assign_memberships(x.values, fit.state.centroids, fit.state.loadings);
    const auto permuted = assign_memberships(px, fit.state.centroids, fit.state.loadings);
    for (int i = 0; i < x.rows(); ++i) CHECK(permuted.labels[i] == direct.labels[perm[i]]);
}

TEST_CASE("path coefficients") {
    SUBCASE("single path equals the score correlation") {
        const auto spec = one_mv_blocks();
        const Eigen::MatrixXd x = oracle::zscore(oracle::random_matrix(20, 2, 91));
        const auto paths = estimate_path_coefficients(x, Eigen::MatrixXd::Identity(2, 2), spec);
        CHECK(paths.gamma(0, 0) == doctest::Approx(oracle::pearson(x.col(0), x.col(1))).epsilon(1e-10));
    }
    SUBCASE("collinear predictors") {
        const auto spec = simulation_spec(PathModelKind::Model1);
        Eigen::MatrixXd x = oracle::random_matrix(20, 9, 92);
        x.col(3) = x.col(0);
        x.col(4) = x.col(1);
        x.col(5) = x.col(2);
        CHECK_THROWS_AS(estimate_path_coefficients(oracle::zscore(x), unit_design_loadings(spec), spec), NumericalError);
    }
    SUBCASE("non-edges are zero") {
        SimConfig cfg;
        cfg.model = PathModelKind::Model2;
        const auto sim = generate_dataset(cfg, 93);
        const auto fit = fit_multistart(sim.spec, standardize(sim.x), 3, {});
        const int xi = sim.spec.lv_index("xi1"), e1 = sim.spec.lv_index("eta1"), e2 = sim.spec.lv_index("eta2");
        const int h = sim.spec.num_exogenous();
        CHECK(fit.paths.gamma(e2 - h, xi) == 0.0);
        CHECK(fit.paths.beta(e1 - h, e2 - h) == 0.0);
        CHECK(fit.paths.beta(e2 - h, e1 - h) != 0.0);
    }
}

TEST_CASE("plain PLS") {
    SimConfig cfg;
    cfg.sigma = 0.0;
    const auto sim = generate_dataset(cfg, 101);
    const auto x = standardize(sim.x);
    const auto pls = fit_plain_pls(sim.spec, x, {});
    CHECK(pls.state.membership.k == x.rows());
    const auto report = fit_report(sim.spec, x.values, pls);
    CHECK(report.gof == doctest::Approx(1.0).epsilon(1e-8));

    SimConfig noisy;
    const auto sim2 = generate_dataset(noisy, 102);
    const auto x2 = standardize(sim2.x);
    const auto a = fit_plain_pls(sim2.spec, x2, {});
    Eigen::MatrixXd rev = x2.values.colwise().reverse();
    const auto b = fit_plain_pls(sim2.spec, standardize(rev), {});
    CHECK((a.state.loadings - b.state.loadings).cwiseAbs().maxCoeff() < 1e-8);
    for (int p = 0; p < a.state.loadings.cols(); ++p) CHECK(a.state.loadings.col(p).sum() > 0);
}

TEST_CASE("tandem baseline") {
    SimConfig cfg;
    cfg.sigma = 0.1;
    const auto sim = generate_dataset(cfg, 111);
    const auto x = standardize(sim.x);
    const auto t = tandem_baseline(sim.spec, x, 3, {});
    CHECK(adjusted_rand_index(t.membership.labels, sim.truth.labels) == doctest::Approx(1.0));
    const auto one = tandem_baseline(sim.spec, x, 1, {});
    CHECK(std::all_of(one.membership.labels.begin(), one.membership.labels.end(), [](int v) { return v == 0; }));
}

TEST_CASE("kmeans") {
    Eigen::MatrixXd pts(6, 1);
    pts << 0, 0.1, 0.2, 10, 10.1, 10.2;
    KMeansOptions opt;
    const auto r = kmeans(pts, 2, opt);
    CHECK(r.membership.labels[0] == r.membership.labels[2]);
    CHECK(r.membership.labels[0] != r.membership.labels[3]);
    CHECK(r.within_ss == doctest::Approx(4 * 0.01));
    const double t = (pts.rowwise() - pts.colwise().mean()).squaredNorm();
    CHECK(within_dispersion(pts, r.membership) + between_dispersion(pts, r.membership) == doctest::Approx(t));
}
