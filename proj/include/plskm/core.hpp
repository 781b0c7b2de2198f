#pragma once

#include "plskm/model_spec.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace plskm {

/// n x J data with column names. When `standardized` is set, columns have
/// mean 0 and unit sample variance; `means`/`sds` hold the original moments.
struct DataMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> column_names;
    bool standardized = false;
    Eigen::VectorXd means;
    Eigen::VectorXd sds;

    int rows() const { return static_cast<int>(values.rows()); }
    int cols() const { return static_cast<int>(values.cols()); }
};

/// Column z-scores with the n-1 denominator. Throws DataError on n < 2 or a
/// constant column.
DataMatrix standardize(const Eigen::MatrixXd& raw, std::vector<std::string> column_names = {});

/// Hard partition of n rows into K clusters, stored as 0-based labels.
/// Serialized forms use 1-based labels.
struct Membership {
    std::vector<int> labels;
    int k = 0;

    int size() const { return static_cast<int>(labels.size()); }
    std::vector<int> counts() const;
    /// n x K indicator matrix U.
    Eigen::MatrixXd indicator() const;
    bool all_nonempty() const;

    bool operator==(const Membership&) const = default;
};

/// Uniform random labels conditioned on every cluster being nonempty.
Membership random_membership(int n, int k, std::uint64_t seed);

/// Iterate of the alternating estimator.
struct ModelState {
    Eigen::MatrixXd loadings;   // J x P
    Eigen::MatrixXd centroids;  // K x J
    Membership membership;
    Eigen::MatrixXd scores;     // n x P, U C Lambda
    int iteration = 0;
    std::vector<double> objective_trace;
};

struct PathCoefficients {
    Eigen::MatrixXd gamma;  // L x H
    Eigen::MatrixXd beta;   // L x L
};

struct RunRecord {
    std::uint64_t seed = 0;
    double objective = 0.0;
    bool converged = false;
    bool cycled = false;
    int iterations = 0;
    Membership membership;
};

struct FittedModel {
    ModelState state;
    PathCoefficients paths;
    bool converged = false;
    /// Stopped on a period-two cycle of the alternation; the better state is kept.
    bool cycled = false;
    int n_iterations = 0;
    double objective_value = 0.0;
    std::uint64_t seed = 0;
    /// One entry per start of a multistart fit (a single entry otherwise).
    std::vector<RunRecord> runs;
};

/// Snapshot handed to FitOptions::observer after every sweep.
struct IterationEvent {
    int iteration = 0;
    /// ||X - U C L L'||^2 at the three points of the sweep:
    /// (U_old, C_old, L_new), (U_new, C_old, L_new), (U_new, C_new, L_new).
    double objective_before_assignment = 0.0;
    double objective_after_assignment = 0.0;
    double objective_after_centroids = 0.0;
    int repairs = 0;
    double step = 0.0;  // ||C L - C_n L_n||^2
    const Eigen::MatrixXd* loadings = nullptr;
    const Membership* membership = nullptr;
};

/// Loading update. Regression is C'U'Y_W (Y_W'Y_W)^+; PerColumn drops the
/// Gram inverse (classical Mode A), which stays stable when the inner
/// estimates are strongly collinear.
enum class OuterMode { Regression, PerColumn };

struct FitOptions {
    double tolerance = 1e-12;
    OuterMode outer = OuterMode::Regression;
    int max_iterations = 300;
    int n_starts = 15;
    std::uint64_t seed = 1;
    /// Worker threads for multistart; results do not depend on it.
    int threads = 1;
    std::function<void(const IterationEvent&)> observer;

    void validate() const;
};

/// Per-start seed derived from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

Eigen::MatrixXd unit_design_loadings(const PathModelSpec& spec);

ModelState init_state(const PathModelSpec& spec, const DataMatrix& x, int k, std::uint64_t seed);

/// Cluster means: (U'U)^{-1} U'X. Throws DataError on an empty cluster.
Eigen::MatrixXd compute_centroids(const Membership& u, const Eigen::MatrixXd& x);

/// Y = U C Lambda.
Eigen::MatrixXd compute_scores(const Membership& u, const Eigen::MatrixXd& centroids, const Eigen::MatrixXd& loadings);

/// Y_W = Y (D_sym .* Sigma_Y) with Sigma_Y = n^{-1} Y' J_c Y.
/// Throws NumericalError when all rows of Y coincide.
Eigen::MatrixXd inner_approximation(const Eigen::MatrixXd& scores, const BinaryMatrix& inner_design);

/// Lambda_n = C' U' Y_W (Y_W' Y_W)^+, masked to the design, unit columns,
/// nonnegative column sums.
Eigen::MatrixXd outer_update(const Eigen::MatrixXd& centroids, const Membership& u, const Eigen::MatrixXd& weighted_scores,
                             const BinaryMatrix& measurement_design, OuterMode mode = OuterMode::Regression);

/// Row-wise argmin of ||x_i - c_k L L'||^2, lowest index on ties, then
/// empty-cluster repair. `repairs`, when given, receives the number of rows moved.
Membership assign_memberships(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centroids, const Eigen::MatrixXd& loadings,
                              int* repairs = nullptr);

/// ||X - U C L L'||^2.
double objective(const Eigen::MatrixXd& x, const Membership& u, const Eigen::MatrixXd& centroids,
                 const Eigen::MatrixXd& loadings);

/// OLS of each endogenous score on its direct predecessors, using standardized
/// scores X Lambda.
PathCoefficients estimate_path_coefficients(const Eigen::MatrixXd& x, const Eigen::MatrixXd& loadings,
                                            const PathModelSpec& spec);

/// Standardized X Lambda.
Eigen::MatrixXd data_scores(const Eigen::MatrixXd& x, const Eigen::MatrixXd& loadings);

FittedModel fit_once(const PathModelSpec& spec, const DataMatrix& x, int k, const FitOptions& options, std::uint64_t seed);

/// Best of `options.n_starts` fit_once runs, seeds derived from options.seed.
FittedModel fit_multistart(const PathModelSpec& spec, const DataMatrix& x, int k, const FitOptions& options);

/// Alternation with U held fixed at `partition` (no membership update).
FittedModel fit_fixed_partition(const PathModelSpec& spec, const DataMatrix& x, const Membership& partition,
                                const FitOptions& options);

/// PLS path model: the alternation with every unit in its own cluster.
FittedModel fit_plain_pls(const PathModelSpec& spec, const DataMatrix& x, const FitOptions& options);

struct TandemResult {
    FittedModel pls;
    Membership membership;
    double kmeans_objective = 0.0;
};

/// Plain PLS followed by multistart K-means on the score matrix X Lambda.
TandemResult tandem_baseline(const PathModelSpec& spec, const DataMatrix& x, int k, const FitOptions& options);

}  // namespace plskm
