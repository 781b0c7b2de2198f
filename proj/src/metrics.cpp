#include "plskm/metrics.hpp"

#include "plskm/error.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace plskm {

double communality(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) throw DataError("communality: length mismatch");
    const Eigen::VectorXd xc = x.array() - x.mean();
    const Eigen::VectorXd yc = y.array() - y.mean();
    const double sxx = xc.squaredNorm();
    const double syy = yc.squaredNorm();
    if (!(sxx > 0.0) || !(syy > 0.0)) throw DataError("communality: zero-variance input");
    const double sxy = xc.dot(yc);
    return std::min(1.0, sxy * sxy / (sxx * syy));
}

double block_communality(const Eigen::MatrixXd& block, const Eigen::VectorXd& y) {
    if (block.cols() == 0) throw DataError("block communality: empty block");
    double total = 0.0;
    for (Eigen::Index j = 0; j < block.cols(); ++j) total += communality(block.col(j), y);
    return total / static_cast<double>(block.cols());
}

double r_squared(const Eigen::VectorXd& y, const Eigen::MatrixXd& predictors) {
    if (predictors.cols() == 0) throw DataError("r_squared: no predictors");
    if (predictors.rows() != y.size()) throw DataError("r_squared: length mismatch");
    const Eigen::VectorXd yc = y.array() - y.mean();
    const Eigen::MatrixXd xc = predictors.rowwise() - predictors.colwise().mean();
    const double syy = yc.squaredNorm();
    if (!(syy > 0.0)) throw DataError("r_squared: constant response");
    const Eigen::MatrixXd gram = xc.transpose() * xc;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (!(eig.eigenvalues().minCoeff() > 1e-12 * eig.eigenvalues().maxCoeff()))
        throw NumericalError("r_squared: collinear predictors");
    const Eigen::VectorXd coef = gram.ldlt().solve(xc.transpose() * yc);
    const double rss = (yc - xc * coef).squaredNorm();
    return std::clamp(1.0 - rss / syy, 0.0, 1.0);
}

double gof(double average_communality, double average_r2) {
    return std::sqrt(average_communality * average_r2);
}

double penalized_r_squared(double mean_r2, const Eigen::MatrixXd& x, const Membership& u, const Eigen::MatrixXd& centroids,
                           const Eigen::MatrixXd& loadings) {
    const double total = x.squaredNorm();
    if (!(total > 0.0)) throw DataError("penalized R2: X is zero");
    const Eigen::MatrixXd projected = centroids * loadings * loadings.transpose();
    double between = 0.0;
    for (int i = 0; i < u.size(); ++i) between += projected.row(u.labels[i]).squaredNorm();
    return std::sqrt(mean_r2 * between / total);
}

double cronbach_alpha(const Eigen::MatrixXd& block) {
    const Eigen::Index items = block.cols();
    if (items == 0) throw DataError("cronbach alpha: empty block");
    if (items == 1) return 1.0;
    const double n = static_cast<double>(block.rows());
    Eigen::MatrixXd z = block.rowwise() - block.colwise().mean();
    for (Eigen::Index j = 0; j < items; ++j) {
        const double sd = std::sqrt(z.col(j).squaredNorm() / (n - 1.0));
        if (!(sd > 0.0)) throw DataError("cronbach alpha: constant item");
        z.col(j) /= sd;
    }
    const Eigen::VectorXd sum = z.rowwise().sum();
    const double total_var = sum.squaredNorm() / (n - 1.0);
    if (!(total_var > 0.0)) throw DataError("cronbach alpha: zero total variance");
    const double k = static_cast<double>(items);
    return k / (k - 1.0) * (1.0 - k / total_var);
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw DataError("ARI: partitions have different lengths");
    std::map<std::pair<int, int>, long long> cells;
    std::map<int, long long> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++cells[{a[i], b[i]}];
        ++rows[a[i]];
        ++cols[b[i]];
    }
    auto pairs = [](long long m) { return 0.5 * static_cast<double>(m) * static_cast<double>(m - 1); };
    double index = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [key, m] : cells) index += pairs(m);
    for (const auto& [key, m] : rows) sum_a += pairs(m);
    for (const auto& [key, m] : cols) sum_b += pairs(m);
    const double total = pairs(static_cast<long long>(a.size()));
    const double expected = total > 0.0 ? sum_a * sum_b / total : 0.0;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;  // both partitions trivial and identical
    return (index - expected) / (max_index - expected);
}

FitReport fit_report(const PathModelSpec& spec, const Eigen::MatrixXd& x, const FittedModel& fit, ScoreSource source) {
    const auto& state = fit.state;
    const Eigen::MatrixXd scores = source == ScoreSource::Data ? Eigen::MatrixXd(x * state.loadings) : state.scores;
    const int P = spec.num_lvs();
    const int J = spec.num_mvs();

    FitReport report;
    report.source = source;
    report.mv_communality.resize(J);
    report.block_communality.resize(P);
    report.r_squared = Eigen::VectorXd::Constant(P, std::numeric_limits<double>::quiet_NaN());
    report.cronbach_alpha.resize(P);
    report.alpha_singleton.assign(P, false);

    for (int p = 0; p < P; ++p) {
        const auto block = spec.block(p);
        Eigen::MatrixXd cols(x.rows(), static_cast<Eigen::Index>(block.size()));
        double sum = 0.0;
        for (std::size_t c = 0; c < block.size(); ++c) {
            cols.col(static_cast<Eigen::Index>(c)) = x.col(block[c]);
            const double com = communality(x.col(block[c]), scores.col(p));
            report.mv_communality(block[c]) = com;
            sum += com;
        }
        report.block_communality(p) = sum / static_cast<double>(block.size());
        report.cronbach_alpha(p) = cronbach_alpha(cols);
        report.alpha_singleton[p] = block.size() == 1;
    }
    report.average_communality = report.mv_communality.mean();

    double r2_sum = 0.0;
    for (int l : spec.endogenous()) {
        const auto preds = spec.predecessors(l);
        Eigen::MatrixXd design(scores.rows(), static_cast<Eigen::Index>(preds.size()));
        for (std::size_t c = 0; c < preds.size(); ++c) design.col(static_cast<Eigen::Index>(c)) = scores.col(preds[c]);
        report.r_squared(l) = r_squared(scores.col(l), design);
        r2_sum += report.r_squared(l);
    }
    report.average_r2 = r2_sum / static_cast<double>(spec.num_endogenous());
    report.gof = gof(report.average_communality, report.average_r2);
    report.penalized_r2 = penalized_r_squared(report.average_r2, x, state.membership, state.centroids, state.loadings);
    return report;
}

}  // namespace plskm
