#include "plskm/core.hpp"

#include "plskm/error.hpp"
#include "plskm/kmeans.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <thread>
#include <cstdio>
#include <cstdlib>

namespace plskm {

namespace {

// Eigenvalues of Y_W'Y_W below this fraction of the largest are treated as zero.
constexpr double kGramRelativeThreshold = 1e-12;

}  // namespace

DataMatrix standardize(const Eigen::MatrixXd& raw, std::vector<std::string> column_names) {
    const Eigen::Index n = raw.rows();
    const Eigen::Index J = raw.cols();
    if (n < 2) throw DataError("standardization needs at least two rows");
    if (!column_names.empty() && static_cast<Eigen::Index>(column_names.size()) != J)
        throw DataError("column name count does not match the data");
    if (column_names.empty())
        for (Eigen::Index j = 0; j < J; ++j) column_names.push_back("x" + std::to_string(j + 1));

    DataMatrix out;
    out.values.resize(n, J);
    out.means.resize(J);
    out.sds.resize(J);
    for (Eigen::Index j = 0; j < J; ++j) {
        const double mean = raw.col(j).mean();
        const Eigen::VectorXd centered = raw.col(j).array() - mean;
        const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(n - 1));
        const double scale = std::max(1.0, std::abs(mean));
        if (!(sd > 1e-12 * scale)) throw DataError("column '" + column_names[j] + "' is constant");
        out.values.col(j) = centered / sd;
        out.means(j) = mean;
        out.sds(j) = sd;
    }
    out.column_names = std::move(column_names);
    out.standardized = true;
    return out;
}

std::vector<int> Membership::counts() const {
    std::vector<int> c(k, 0);
    for (int label : labels) ++c[label];
    return c;
}

Eigen::MatrixXd Membership::indicator() const {
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(size(), k);
    for (int i = 0; i < size(); ++i) u(i, labels[i]) = 1.0;
    return u;
}

bool Membership::all_nonempty() const {
    const auto c = counts();
    return std::all_of(c.begin(), c.end(), [](int v) { return v > 0; });
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    // splitmix64 finalizer over base and index.
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Membership random_membership(int n, int k, std::uint64_t seed) {
    if (k < 1) throw DataError("number of clusters must be at least 1");
    if (k > n) throw DataError("number of clusters (" + std::to_string(k) + ") exceeds number of rows (" + std::to_string(n) + ")");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, k - 1);
    Membership u{std::vector<int>(n), k};
    for (int attempt = 0; attempt < 1000; ++attempt) {
        for (int& label : u.labels) label = pick(rng);
        if (u.all_nonempty()) return u;
    }
    // n close to k: seed each cluster with one distinct row, rest uniform.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 0; i < n; ++i) u.labels[order[i]] = i < k ? i : pick(rng);
    return u;
}

void FitOptions::validate() const {
    if (!(tolerance > 0.0)) throw DataError("tolerance must be positive");
    if (max_iterations < 1) throw DataError("max_iterations must be at least 1");
    if (n_starts < 1) throw DataError("n_starts must be at least 1");
    if (threads < 1) throw DataError("threads must be at least 1");
}

Eigen::MatrixXd unit_design_loadings(const PathModelSpec& spec) {
    Eigen::MatrixXd loadings = spec.measurement_design();
    for (Eigen::Index p = 0; p < loadings.cols(); ++p) {
        const double norm = loadings.col(p).norm();
        if (norm == 0.0) throw SpecError("latent variable '" + spec.lv_names[p] + "' has an empty block");
        loadings.col(p) /= norm;
    }
    return loadings;
}

Eigen::MatrixXd compute_centroids(const Membership& u, const Eigen::MatrixXd& x) {
    if (u.size() != x.rows()) throw DataError("membership length does not match the number of rows");
    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(u.k, x.cols());
    std::vector<int> counts(u.k, 0);
    for (int i = 0; i < u.size(); ++i) {
        centroids.row(u.labels[i]) += x.row(i);
        ++counts[u.labels[i]];
    }
    for (int c = 0; c < u.k; ++c) {
        if (counts[c] == 0) throw DataError("cluster " + std::to_string(c + 1) + " is empty");
        centroids.row(c) /= static_cast<double>(counts[c]);
    }
    return centroids;
}

Eigen::MatrixXd compute_scores(const Membership& u, const Eigen::MatrixXd& centroids, const Eigen::MatrixXd& loadings) {
    if (centroids.rows() != u.k || centroids.cols() != loadings.rows())
        throw DataError("dimension mismatch between centroids and loadings");
    const Eigen::MatrixXd reduced = centroids * loadings;
    Eigen::MatrixXd scores(u.size(), loadings.cols());
    for (int i = 0; i < u.size(); ++i) scores.row(i) = reduced.row(u.labels[i]);
    return scores;
}

Eigen::MatrixXd inner_approximation(const Eigen::MatrixXd& scores, const BinaryMatrix& inner_design) {
    const Eigen::Index n = scores.rows();
    if (inner_design.rows() != scores.cols() || inner_design.cols() != scores.cols())
        throw DataError("inner design does not match the number of latent variables");
    const Eigen::MatrixXd centered = scores.rowwise() - scores.colwise().mean();
    if (!(centered.squaredNorm() > 1e-24 * std::max(1.0, scores.squaredNorm())))
        throw NumericalError("latent scores collapsed: all rows are identical");
    const Eigen::MatrixXd covariance = centered.transpose() * centered / static_cast<double>(n);
    const Eigen::MatrixXd weights = inner_design.cast<double>().cwiseProduct(covariance);
    return scores * weights;
}

Eigen::MatrixXd outer_update(const Eigen::MatrixXd& centroids, const Membership& u, const Eigen::MatrixXd& weighted_scores,
                             const BinaryMatrix& measurement_design, OuterMode mode) {
    const Eigen::Index J = centroids.cols();
    const Eigen::Index P = weighted_scores.cols();
    if (measurement_design.rows() != J || measurement_design.cols() != P || weighted_scores.rows() != u.size())
        throw DataError("dimension mismatch in outer update");

    Eigen::MatrixXd fitted(u.size(), J);  // U C
    for (int i = 0; i < u.size(); ++i) fitted.row(i) = centroids.row(u.labels[i]);

    Eigen::MatrixXd coefficients;  // P x J
    if (mode == OuterMode::PerColumn) {
        if (!(weighted_scores.squaredNorm() > 0.0)) throw NumericalError("weighted scores Y_W vanish");
        coefficients = weighted_scores.transpose() * fitted;
    } else {
        // C'U'Y_W (Y_W'Y_W)^+ through the SVD of Y_W. Exactly collinear inner
        // estimates (common with few clusters or shared neighbours) get the
        // minimum-norm solution; otherwise this is the plain inverse.
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(weighted_scores, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd& sv = svd.singularValues();
        if (sv.size() == 0 || !(sv(0) > 0.0)) throw NumericalError("weighted scores Y_W vanish; Y_W'Y_W is singular");
        const double cutoff = sv(0) * std::sqrt(kGramRelativeThreshold);
        Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            if (sv(i) > cutoff) inv(i) = 1.0 / sv(i);
        coefficients = svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * fitted);
    }

    Eigen::MatrixXd loadings = coefficients.transpose().cwiseProduct(measurement_design.cast<double>());
    const double scale = coefficients.norm();
    for (Eigen::Index p = 0; p < P; ++p) {
        bool fallback = false;
        if (mode == OuterMode::Regression && !(loadings.col(p).norm() > 1e-10 * scale)) {
            // The block lies in the span of the other inner estimates (noiseless
            // data), so the regression says nothing about it. Use the Mode A column.
            loadings.col(p) = (fitted.transpose() * weighted_scores.col(p))
                                  .cwiseProduct(measurement_design.col(p).cast<double>());
            if (!(loadings.col(p).norm() > 1e-14 * fitted.norm() * weighted_scores.col(p).norm()))
                throw NumericalError("loading column " + std::to_string(p + 1) + " vanished after masking");
            fallback = true;
        }
        const double norm = loadings.col(p).norm();
        if ((!fallback && !(norm > 1e-14 * scale)) || !std::isfinite(norm))
            throw NumericalError("loading column " + std::to_string(p + 1) + " vanished after masking");
        loadings.col(p) /= norm;
        if (loadings.col(p).sum() < 0.0) loadings.col(p) = -loadings.col(p);
    }
    return loadings;
}

namespace {

struct AssignmentOutcome {
    Membership membership;
    Eigen::VectorXd residuals;
    int repairs = 0;
};

// Row-wise nearest target with lowest-index tie-break, followed by the
// empty-cluster repair: an empty cluster receives the row with the largest
// residual among rows whose own cluster would stay nonempty.
AssignmentOutcome nearest_with_repair(const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets) {
    const Eigen::Index n = x.rows();
    const int k = static_cast<int>(targets.rows());
    AssignmentOutcome out{Membership{std::vector<int>(n), k}, Eigen::VectorXd(n), 0};
    Eigen::MatrixXd distances(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            const double d = (x.row(i) - targets.row(c)).squaredNorm();
            distances(i, c) = d;
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        out.membership.labels[i] = best;
        out.residuals(i) = best_d;
    }

    auto counts = out.membership.counts();
    for (int c = 0; c < k; ++c) {
        if (counts[c] > 0) continue;
        Eigen::Index donor = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (counts[out.membership.labels[i]] <= 1) continue;
            if (donor < 0 || out.residuals(i) > out.residuals(donor)) donor = i;
        }
        if (donor < 0) throw DataError("cannot repair empty cluster: too few rows");
        --counts[out.membership.labels[donor]];
        ++counts[c];
        out.membership.labels[donor] = c;
        out.residuals(donor) = distances(donor, c);
        ++out.repairs;
    }
    return out;
}

}  // namespace

Membership assign_memberships(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centroids, const Eigen::MatrixXd& loadings,
                              int* repairs) {
    if (centroids.cols() != x.cols() || loadings.rows() != x.cols())
        throw DataError("dimension mismatch in membership update");
    const Eigen::MatrixXd projected = centroids * loadings * loadings.transpose();
    auto outcome = nearest_with_repair(x, projected);
    if (repairs) *repairs = outcome.repairs;
    return std::move(outcome.membership);
}

double objective(const Eigen::MatrixXd& x, const Membership& u, const Eigen::MatrixXd& centroids,
                 const Eigen::MatrixXd& loadings) {
    if (u.size() != x.rows() || centroids.rows() != u.k || centroids.cols() != x.cols() || loadings.rows() != x.cols())
        throw DataError("dimension mismatch in objective");
    const Eigen::MatrixXd projected = centroids * loadings * loadings.transpose();
    double total = 0.0;
    for (int i = 0; i < u.size(); ++i) total += (x.row(i) - projected.row(u.labels[i])).squaredNorm();
    return total;
}

Eigen::MatrixXd data_scores(const Eigen::MatrixXd& x, const Eigen::MatrixXd& loadings) {
    Eigen::MatrixXd scores = x * loadings;
    const double n = static_cast<double>(scores.rows());
    for (Eigen::Index p = 0; p < scores.cols(); ++p) {
        const double mean = scores.col(p).mean();
        scores.col(p).array() -= mean;
        const double sd = std::sqrt(scores.col(p).squaredNorm() / (n - 1.0));
        if (!(sd > 0.0)) throw NumericalError("latent score " + std::to_string(p + 1) + " is constant");
        scores.col(p) /= sd;
    }
    return scores;
}

PathCoefficients estimate_path_coefficients(const Eigen::MatrixXd& x, const Eigen::MatrixXd& loadings,
                                            const PathModelSpec& spec) {
    const int H = spec.num_exogenous();
    const int L = spec.num_endogenous();
    const Eigen::MatrixXd scores = data_scores(x, loadings);
    PathCoefficients out{Eigen::MatrixXd::Zero(L, H), Eigen::MatrixXd::Zero(L, L)};

    for (int l : spec.endogenous_topological_order()) {
        const auto preds = spec.predecessors(l);
        Eigen::MatrixXd design(scores.rows(), static_cast<Eigen::Index>(preds.size()));
        for (std::size_t c = 0; c < preds.size(); ++c) design.col(static_cast<Eigen::Index>(c)) = scores.col(preds[c]);
        const Eigen::MatrixXd gram = design.transpose() * design;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        const double largest = eig.eigenvalues().maxCoeff();
        if (!(eig.eigenvalues().minCoeff() > kGramRelativeThreshold * largest))
            throw NumericalError("collinear predecessor scores for latent variable '" + spec.lv_names[l] + "'");
        const Eigen::VectorXd coef = gram.ldlt().solve(design.transpose() * scores.col(l));
        for (std::size_t c = 0; c < preds.size(); ++c) {
            const int p = preds[c];
            if (spec.lv_kinds[p] == LvKind::Exogenous)
                out.gamma(l - H, p) = coef(static_cast<Eigen::Index>(c));
            else
                out.beta(l - H, p - H) = coef(static_cast<Eigen::Index>(c));
        }
    }
    return out;
}

namespace {

void check_inputs(const PathModelSpec& spec, const DataMatrix& x) {
    if (!x.standardized) throw DataError("the estimator expects standardized data");
    if (x.cols() != spec.num_mvs())
        throw DataError("data has " + std::to_string(x.cols()) + " columns but the model declares " +
                        std::to_string(spec.num_mvs()) + " manifest variables");
}

FittedModel alternate(const PathModelSpec& spec, const DataMatrix& data, Membership membership, bool update_membership,
                      const FitOptions& options, std::uint64_t seed) {
    const Eigen::MatrixXd& x = data.values;
    ModelState state;
    state.loadings = unit_design_loadings(spec);
    state.membership = std::move(membership);
    state.centroids = compute_centroids(state.membership, x);
    state.scores = compute_scores(state.membership, state.centroids, state.loadings);
    state.objective_trace.push_back(objective(x, state.membership, state.centroids, state.loadings));

    bool converged = false;
    bool cycled = false;
    ModelState previous;              // state before the current one
    Eigen::MatrixXd previous_reduced;  // its C L
    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        state.iteration = iter;
        Eigen::MatrixXd next_loadings;
        try {
            const Eigen::MatrixXd weighted = inner_approximation(state.scores, spec.structural_sym);
            next_loadings = outer_update(state.centroids, state.membership, weighted, spec.measurement, options.outer);
        } catch (const NumericalError& e) {
            throw NumericalError(e.what(), iter);
        }

        IterationEvent event;
        const bool observe = static_cast<bool>(options.observer);
        if (observe) event.objective_before_assignment = objective(x, state.membership, state.centroids, next_loadings);

        Membership next_membership = state.membership;
        if (update_membership) {
            next_membership = assign_memberships(x, state.centroids, next_loadings, &event.repairs);
        }
        if (observe) event.objective_after_assignment = objective(x, next_membership, state.centroids, next_loadings);

        const Eigen::MatrixXd next_centroids = compute_centroids(next_membership, x);
        const Eigen::MatrixXd reduced = state.centroids * state.loadings;
        const Eigen::MatrixXd next_reduced = next_centroids * next_loadings;
        const double step = (reduced - next_reduced).squaredNorm();
        // A period-two cycle: the update returns to the state before the current one.
        const bool back_to_previous = step > options.tolerance && previous_reduced.size() > 0 &&
                                      next_membership == previous.membership &&
                                      (previous_reduced - next_reduced).squaredNorm() <= options.tolerance;
        previous = state;
        previous_reduced = reduced;

        state.centroids = next_centroids;
        state.loadings = next_loadings;
        state.membership = std::move(next_membership);
        state.scores = compute_scores(state.membership, state.centroids, state.loadings);
        state.objective_trace.push_back(objective(x, state.membership, state.centroids, state.loadings));

        if (observe) {
            event.iteration = iter;
            event.objective_after_centroids = state.objective_trace.back();
            event.step = step;
            event.loadings = &state.loadings;
            event.membership = &state.membership;
            options.observer(event);
        }
        if (step <= options.tolerance) {
            converged = true;
            break;
        }
        if (back_to_previous) {
            // Keep the better of the two alternating states.
            cycled = true;
            if (previous.objective_trace.back() < state.objective_trace.back()) {
                const double kept = previous.objective_trace.back();
                state.loadings = previous.loadings;
                state.centroids = previous.centroids;
                state.membership = previous.membership;
                state.scores = previous.scores;
                state.objective_trace.push_back(kept);
            }
            break;
        }
    }

    FittedModel fit;
    fit.paths = estimate_path_coefficients(x, state.loadings, spec);
    fit.converged = converged;
    fit.cycled = cycled;
    fit.n_iterations = state.iteration;
    fit.objective_value = state.objective_trace.back();
    fit.seed = seed;
    fit.runs.push_back({seed, fit.objective_value, converged, cycled, state.iteration, state.membership});
    fit.state = std::move(state);
    return fit;
}

}  // namespace

ModelState init_state(const PathModelSpec& spec, const DataMatrix& x, int k, std::uint64_t seed) {
    check_inputs(spec, x);
    ModelState state;
    state.loadings = unit_design_loadings(spec);
    state.membership = random_membership(x.rows(), k, seed);
    state.centroids = compute_centroids(state.membership, x.values);
    state.scores = compute_scores(state.membership, state.centroids, state.loadings);
    return state;
}

FittedModel fit_once(const PathModelSpec& spec, const DataMatrix& x, int k, const FitOptions& options, std::uint64_t seed) {
    options.validate();
    check_inputs(spec, x);
    return alternate(spec, x, random_membership(x.rows(), k, seed), true, options, seed);
}

FittedModel fit_fixed_partition(const PathModelSpec& spec, const DataMatrix& x, const Membership& partition,
                                const FitOptions& options) {
    options.validate();
    check_inputs(spec, x);
    if (partition.size() != x.rows()) throw DataError("partition length does not match the number of rows");
    if (!partition.all_nonempty()) throw DataError("partition has an empty cluster");
    return alternate(spec, x, partition, false, options, options.seed);
}

FittedModel fit_plain_pls(const PathModelSpec& spec, const DataMatrix& x, const FitOptions& options) {
    Membership identity{std::vector<int>(static_cast<std::size_t>(x.rows())), x.rows()};
    for (int i = 0; i < x.rows(); ++i) identity.labels[i] = i;
    return fit_fixed_partition(spec, x, identity, options);
}

FittedModel fit_multistart(const PathModelSpec& spec, const DataMatrix& x, int k, const FitOptions& options) {
    options.validate();
    check_inputs(spec, x);
    const int starts = options.n_starts;
    std::vector<std::optional<FittedModel>> results(starts);
    std::vector<std::string> failures(starts);

    auto run = [&](int s) {
        const std::uint64_t seed = s == 0 ? options.seed : derive_seed(options.seed, static_cast<std::uint64_t>(s));
        try {
            results[s] = fit_once(spec, x, k, options, seed);
        } catch (const NumericalError& e) {
            failures[s] = e.what();
        }
    };

    const int workers = std::min(options.threads, starts);
    if (workers <= 1) {
        for (int s = 0; s < starts; ++s) run(s);
    } else {
        std::atomic<int> next{0};
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int s = next++; s < starts; s = next++) run(s);
            });
    }

    int best = -1;
    for (int s = 0; s < starts; ++s)
        if (results[s] && (best < 0 || results[s]->objective_value < results[best]->objective_value)) best = s;
    if (best < 0) throw NumericalError("all " + std::to_string(starts) + " starts failed; first: " + failures[0]);

    std::vector<RunRecord> runs;
    for (int s = 0; s < starts; ++s)
        if (results[s]) runs.push_back(results[s]->runs.front());
    FittedModel out = std::move(*results[best]);
    out.runs = std::move(runs);
    return out;
}

TandemResult tandem_baseline(const PathModelSpec& spec, const DataMatrix& x, int k, const FitOptions& options) {
    TandemResult out;
    out.pls = fit_plain_pls(spec, x, options);
    KMeansOptions km;
    km.n_starts = options.n_starts;
    km.max_iterations = options.max_iterations;
    km.seed = options.seed;
    const KMeansResult clusters = kmeans(out.pls.state.scores, k, km);
    out.membership = clusters.membership;
    out.kmeans_objective = clusters.within_ss;
    return out;
}

// K-means shares the assignment and repair rules with the estimator.

KMeansResult kmeans_once(const Eigen::MatrixXd& data, int k, int max_iterations, std::uint64_t seed) {
    KMeansResult out;
    out.membership = random_membership(static_cast<int>(data.rows()), k, seed);
    for (int iter = 1; iter <= max_iterations; ++iter) {
        out.centers = compute_centroids(out.membership, data);
        auto outcome = nearest_with_repair(data, out.centers);
        out.iterations = iter;
        if (outcome.membership == out.membership) break;
        out.membership = std::move(outcome.membership);
    }
    out.centers = compute_centroids(out.membership, data);
    out.within_ss = within_dispersion(data, out.membership);
    return out;
}

KMeansResult kmeans(const Eigen::MatrixXd& data, int k, const KMeansOptions& options) {
    if (options.n_starts < 1) throw DataError("n_starts must be at least 1");
    std::optional<KMeansResult> best;
    for (int s = 0; s < options.n_starts; ++s) {
        const std::uint64_t seed = s == 0 ? options.seed : derive_seed(options.seed, static_cast<std::uint64_t>(s));
        KMeansResult r = kmeans_once(data, k, options.max_iterations, seed);
        if (!best || r.within_ss < best->within_ss) best = std::move(r);
    }
    return std::move(*best);
}

double within_dispersion(const Eigen::MatrixXd& data, const Membership& u) {
    const Eigen::MatrixXd centers = compute_centroids(u, data);
    double total = 0.0;
    for (int i = 0; i < u.size(); ++i) total += (data.row(i) - centers.row(u.labels[i])).squaredNorm();
    return total;
}

double between_dispersion(const Eigen::MatrixXd& data, const Membership& u) {
    const Eigen::MatrixXd centers = compute_centroids(u, data);
    const Eigen::RowVectorXd grand = data.colwise().mean();
    const auto counts = u.counts();
    double total = 0.0;
    for (int c = 0; c < u.k; ++c) total += counts[c] * (centers.row(c) - grand).squaredNorm();
    return total;
}

}  // namespace plskm
