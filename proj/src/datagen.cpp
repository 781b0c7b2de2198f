#include "plskm/datagen.hpp"

#include "plskm/error.hpp"
#include "plskm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace plskm {

std::string to_string(PathModelKind m) { return m == PathModelKind::Model1 ? "model1" : "model2"; }

std::string to_string(ProportionScheme s) {
    switch (s) {
        case ProportionScheme::Balanced: return "balanced";
        case ProportionScheme::Unbalanced1: return "unbalanced1";
        case ProportionScheme::Unbalanced2: return "unbalanced2";
    }
    return "unknown";
}

PathModelSpec simulation_spec(PathModelKind m) {
    std::vector<LvDeclaration> lvs;
    std::vector<PathEdge> paths;
    if (m == PathModelKind::Model1) {
        lvs = {{"xi1", LvKind::Exogenous}, {"xi2", LvKind::Exogenous}, {"eta1", LvKind::Endogenous}};
        paths = {{"xi1", "eta1"}, {"xi2", "eta1"}};
    } else {
        lvs = {{"xi1", LvKind::Exogenous}, {"eta1", LvKind::Endogenous}, {"eta2", LvKind::Endogenous}};
        paths = {{"xi1", "eta1"}, {"eta1", "eta2"}};
    }
    std::vector<MvAssignment> mvs;
    for (std::size_t p = 0; p < lvs.size(); ++p)
        for (int j = 0; j < 3; ++j) mvs.push_back({"x" + std::to_string(3 * p + j + 1), lvs[p].name});
    return build_spec(lvs, mvs, paths);
}

PathModelSpec intro_spec() {
    const std::vector<LvDeclaration> lvs{{"xi1", LvKind::Exogenous}, {"xi2", LvKind::Exogenous}, {"eta1", LvKind::Endogenous}};
    std::vector<MvAssignment> mvs;
    for (int p = 0; p < 3; ++p)
        for (int j = 0; j < 3; ++j) mvs.push_back({"s" + std::to_string(3 * p + j + 1), lvs[p].name});
    for (int p = 0; p < 3; ++p)
        for (int j = 0; j < 2; ++j) mvs.push_back({"z" + std::to_string(2 * p + j + 1), lvs[p].name});
    return build_spec(lvs, mvs, {{"xi1", "eta1"}, {"xi2", "eta1"}});
}

PathModelSpec ecsi_spec() {
    const std::vector<LvDeclaration> lvs{
        {"Image", LvKind::Exogenous},         {"Expectations", LvKind::Endogenous}, {"PercQuality", LvKind::Endogenous},
        {"PercValue", LvKind::Endogenous},    {"Satisfaction", LvKind::Endogenous}, {"Complaints", LvKind::Endogenous},
        {"Loyalty", LvKind::Endogenous}};
    const int block_end[] = {5, 8, 15, 17, 20, 21, 24};
    std::vector<MvAssignment> mvs;
    int p = 0;
    for (int j = 1; j <= 24; ++j) {
        if (j > block_end[p]) ++p;
        mvs.push_back({"x" + std::to_string(j), lvs[p].name});
    }
    const std::vector<PathEdge> paths{
        {"Image", "Expectations"},       {"Image", "Satisfaction"},       {"Image", "Loyalty"},
        {"Expectations", "PercQuality"}, {"Expectations", "PercValue"},   {"Expectations", "Satisfaction"},
        {"PercQuality", "PercValue"},    {"PercQuality", "Satisfaction"}, {"PercValue", "Satisfaction"},
        {"Satisfaction", "Complaints"},  {"Satisfaction", "Loyalty"},     {"Complaints", "Loyalty"}};
    return build_spec(lvs, mvs, paths);
}

std::vector<double> standard_proportions(int k, ProportionScheme scheme) {
    if (k == 3) {
        switch (scheme) {
            case ProportionScheme::Balanced: return {0.33, 0.33, 0.34};
            case ProportionScheme::Unbalanced1: return {0.66, 0.17, 0.17};
            case ProportionScheme::Unbalanced2: return {0.15, 0.42, 0.43};
        }
    }
    if (k == 4) {
        switch (scheme) {
            case ProportionScheme::Balanced: return {0.25, 0.25, 0.25, 0.25};
            case ProportionScheme::Unbalanced1: return {0.40, 0.20, 0.20, 0.20};
            case ProportionScheme::Unbalanced2: return {0.10, 0.30, 0.30, 0.30};
        }
    }
    throw DataError("standard proportions exist for K = 3 and K = 4 only");
}

std::vector<int> segment_counts(int n, const std::vector<double>& proportions) {
    const double total = std::accumulate(proportions.begin(), proportions.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) throw DataError("proportions must sum to 1");
    const std::size_t k = proportions.size();
    std::vector<int> counts(k);
    std::vector<double> remainder(k);
    int assigned = 0;
    for (std::size_t c = 0; c < k; ++c) {
        if (proportions[c] < 0.0) throw DataError("proportions must be nonnegative");
        const double exact = n * proportions[c];
        // Guard against 0.33 * 100 = 32.999999...
        counts[c] = static_cast<int>(std::floor(exact + 1e-9));
        remainder[c] = exact - counts[c];
        assigned += counts[c];
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (int left = n - assigned, i = 0; left > 0; --left, ++i) ++counts[order[static_cast<std::size_t>(i) % k]];
    for (int c : counts)
        if (c < 1) throw DataError("a segment receives no rows at this sample size");
    return counts;
}

void SimConfig::validate() const {
    if (k < 1) throw DataError("K must be at least 1");
    if (k > n) throw DataError("K exceeds n");
    if (static_cast<int>(proportions.size()) != k) throw DataError("need one proportion per segment");
    if (sigma < 0.0) throw DataError("sigma must be nonnegative");
    if (separation < 0.0 || cluster_spread < 0.0) throw DataError("separation and spread must be nonnegative");
    segment_counts(n, proportions);
}

Eigen::MatrixXd cluster_centers(int k, int h, double separation) {
    if (k < 1 || h < 1) throw DataError("cluster_centers needs K >= 1 and H >= 1");
    Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(k, h);
    if (k == 1) return centers;
    if (h == 1) {
        for (int c = 0; c < k; ++c) centers(c, 0) = separation * (c - 0.5 * (k - 1));
    } else if (k <= h + 1) {
        // Centred unit vectors e_c span a (K-1)-dimensional simplex with side sqrt(2).
        const Eigen::MatrixXd vertices =
            Eigen::MatrixXd::Identity(k, k).rowwise() - Eigen::RowVectorXd::Constant(k, 1.0 / k);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(vertices, Eigen::ComputeFullV);
        const Eigen::MatrixXd coords = vertices * svd.matrixV().leftCols(k - 1);
        centers.leftCols(k - 1) = coords * (separation / std::numbers::sqrt2);
    } else {
        const double radius = separation / (2.0 * std::sin(std::numbers::pi / k));
        for (int c = 0; c < k; ++c) {
            const double angle = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * c / k;
            centers(c, 0) = radius * std::cos(angle);
            centers(c, 1) = radius * std::sin(angle);
        }
    }
    const Eigen::RowVectorXd mean = centers.colwise().mean();
    return centers.rowwise() - mean;
}

ExogenousDraw generate_exogenous(const SimConfig& config, std::uint64_t seed) {
    config.validate();
    const int h = simulation_spec(config.model).num_exogenous();
    const auto counts = segment_counts(config.n, config.proportions);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    ExogenousDraw out;
    out.centers = cluster_centers(config.k, h, config.separation);
    out.labels = Membership{std::vector<int>(static_cast<std::size_t>(config.n)), config.k};
    out.xi.resize(config.n, h);
    const double sd = config.cluster_spread * config.sigma;
    int row = 0;
    for (int c = 0; c < config.k; ++c) {
        for (int i = 0; i < counts[c]; ++i, ++row) {
            out.labels.labels[row] = c;
            for (int d = 0; d < h; ++d) out.xi(row, d) = out.centers(c, d) + sd * normal(rng);
        }
    }
    return out;
}

namespace {

void fill_structure(const PathModelSpec& spec, double loading, double inner, SimDataset& ds) {
    const int H = spec.num_exogenous();
    const int L = spec.num_endogenous();
    ds.loadings = loading * spec.measurement_design();
    ds.gamma = Eigen::MatrixXd::Zero(L, H);
    ds.beta = Eigen::MatrixXd::Zero(L, L);
    for (int l = H; l < spec.num_lvs(); ++l) {
        for (int p : spec.predecessors(l)) {
            if (p < H)
                ds.gamma(l - H, p) = inner;
            else
                ds.beta(l - H, p - H) = inner;
        }
    }
}

Eigen::MatrixXd endogenous_scores(const SimDataset& ds, const Eigen::MatrixXd& xi) {
    const Eigen::Index L = ds.beta.rows();
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(L, L) - ds.beta.transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (!lu.isInvertible()) throw NumericalError("I - B' is singular");
    return xi * ds.gamma.transpose() * lu.inverse();
}

}  // namespace

SimDataset generate_dataset(const SimConfig& config, std::uint64_t seed) {
    const ExogenousDraw exo = generate_exogenous(config, seed);
    SimDataset ds;
    ds.spec = simulation_spec(config.model);
    fill_structure(ds.spec, config.loading_value, config.inner_value, ds);
    ds.truth = exo.labels;
    ds.centers = exo.centers;

    // Separate stream for the noise so the exogenous draw alone is reproducible.
    std::mt19937_64 rng(derive_seed(seed, 1));
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n = config.n;
    Eigen::MatrixXd eta = endogenous_scores(ds, exo.xi);
    for (Eigen::Index i = 0; i < eta.rows(); ++i)
        for (Eigen::Index l = 0; l < eta.cols(); ++l) eta(i, l) += config.sigma * normal(rng);

    ds.latent.resize(n, ds.spec.num_lvs());
    ds.latent << exo.xi, eta;
    ds.x = ds.latent * ds.loadings.transpose();
    for (Eigen::Index i = 0; i < ds.x.rows(); ++i)
        for (Eigen::Index j = 0; j < ds.x.cols(); ++j) ds.x(i, j) += config.sigma * normal(rng);
    ds.column_names = ds.spec.mv_names;
    return ds;
}

SimDataset generate_intro_dataset(const IntroConfig& config, std::uint64_t seed) {
    if (config.group_sizes.size() != 3) throw DataError("the intro design has three groups");
    SimDataset ds;
    ds.spec = intro_spec();
    fill_structure(ds.spec, config.loading_value, config.inner_value, ds);
    ds.centers = cluster_centers(3, 2, config.separation);

    const int n = std::accumulate(config.group_sizes.begin(), config.group_sizes.end(), 0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    ds.truth = Membership{std::vector<int>(static_cast<std::size_t>(n)), 3};
    Eigen::MatrixXd xi(n, 2);
    int row = 0;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < config.group_sizes[c]; ++i, ++row) {
            ds.truth.labels[row] = c;
            for (int d = 0; d < 2; ++d) xi(row, d) = ds.centers(c, d) + config.within_sd * normal(rng);
        }
    Eigen::MatrixXd eta = endogenous_scores(ds, xi);
    for (Eigen::Index i = 0; i < n; ++i) eta(i, 0) += std::sqrt(config.eta_variance) * normal(rng);
    ds.latent.resize(n, 3);
    ds.latent << xi, eta;

    // Noise MVs carry no signal; their generating loadings are zero.
    for (int j = 9; j < 15; ++j) ds.loadings.row(j).setZero();
    ds.x.resize(n, 15);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 9; ++j) ds.x(i, j) = config.loading_value * ds.latent(i, j / 3) + config.mv_noise_sd * normal(rng);
        for (int j = 9; j < 15; ++j) ds.x(i, j) = std::sqrt(config.noise_variance) * normal(rng);
    }
    ds.column_names = ds.spec.mv_names;
    return ds;
}

SimDataset generate_ecsi_synthetic(std::uint64_t seed, double missing_rate) {
    SimDataset ds;
    ds.spec = ecsi_spec();
    const int H = ds.spec.num_exogenous();
    fill_structure(ds.spec, 0.8, 0.0, ds);
    const std::vector<int> sizes{92, 112, 46};
    const int n = 250;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Segment shifts: satisfied, middling, dissatisfied.
    const double shift[] = {1.2, 0.0, -1.6};
    ds.truth = Membership{std::vector<int>(static_cast<std::size_t>(n)), 3};
    ds.centers = Eigen::MatrixXd(3, 1);
    for (int c = 0; c < 3; ++c) ds.centers(c, 0) = shift[c];

    const int P = ds.spec.num_lvs();
    ds.latent = Eigen::MatrixXd::Zero(n, P);
    int row = 0;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < sizes[c]; ++i, ++row) ds.truth.labels[row] = c;
    for (int p : ds.spec.endogenous_topological_order()) {
        const auto preds = ds.spec.predecessors(p);
        for (int q : preds) {
            if (q < H)
                ds.gamma(p - H, q) = 0.9 / static_cast<double>(preds.size());
            else
                ds.beta(p - H, q - H) = 0.9 / static_cast<double>(preds.size());
        }
    }
    for (int i = 0; i < n; ++i) {
        const int c = ds.truth.labels[i];
        ds.latent(i, 0) = shift[c] + normal(rng);
        for (int p : ds.spec.endogenous_topological_order()) {
            double v = 0.3 * shift[c] + 0.6 * normal(rng);
            for (int q : ds.spec.predecessors(p)) v += (q < H ? ds.gamma(p - H, q) : ds.beta(p - H, q - H)) * ds.latent(i, q);
            ds.latent(i, p) = v;
        }
    }
    for (int p = 0; p < P; ++p) {
        auto col = ds.latent.col(p);
        const double mean = col.mean();
        const double sd = std::sqrt((col.array() - mean).square().sum() / (n - 1));
        col = (col.array() - mean) / sd;
    }

    ds.x.resize(n, 24);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 24; ++j) {
            int p = 0;
            while (ds.spec.measurement(j, p) == 0) ++p;
            const double z = 0.8 * ds.latent(i, p) + 0.6 * normal(rng);
            ds.x(i, j) = std::clamp(std::round(7.0 + 1.6 * z), 1.0, 10.0);
        }
    // Interleave the segments, as survey rows would be.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const Eigen::MatrixXd x = ds.x, latent = ds.latent;
    const Membership truth = ds.truth;
    for (int i = 0; i < n; ++i) {
        ds.x.row(i) = x.row(order[i]);
        ds.latent.row(i) = latent.row(order[i]);
        ds.truth.labels[i] = truth.labels[order[i]];
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 24; ++j)
            if (unit(rng) < missing_rate) ds.x(i, j) = std::numeric_limits<double>::quiet_NaN();
    ds.column_names = ds.spec.mv_names;
    return ds;
}

GridCell standard_cell(int context, int case_number) {
    if (context < 1 || context > 4) throw DataError("context must be 1..4");
    if (case_number < 1 || case_number > 18) throw DataError("case must be 1..18");
    const int idx = case_number - 1;
    const int size_idx = idx / 9;
    const int prop_idx = (idx / 3) % 3;
    const int err_idx = idx % 3;

    GridCell cell;
    cell.context = context;
    cell.case_number = case_number;
    cell.config.model = (context == 1 || context == 3) ? PathModelKind::Model1 : PathModelKind::Model2;
    cell.config.k = context <= 2 ? 3 : 4;
    cell.config.n = size_idx == 0 ? 150 : 300;
    cell.config.proportions = standard_proportions(cell.config.k, static_cast<ProportionScheme>(prop_idx));
    cell.config.sigma = 0.30 + 0.10 * err_idx;
    cell.label = "c" + std::to_string(context) + "-case" + std::to_string(case_number);
    return cell;
}

}  // namespace plskm
