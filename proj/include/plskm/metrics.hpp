#pragma once

#include "plskm/core.hpp"

#include <Eigen/Dense>

#include <vector>

namespace plskm {

/// Squared Pearson correlation. Throws DataError on a constant input.
double communality(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Mean communality of the block's columns with `y`.
double block_communality(const Eigen::MatrixXd& block, const Eigen::VectorXd& y);

/// R^2 of the OLS fit (with intercept) of `y` on `predictors`.
/// Throws NumericalError on collinear predictors.
double r_squared(const Eigen::VectorXd& y, const Eigen::MatrixXd& predictors);

/// sqrt(average communality * average R^2).
double gof(double average_communality, double average_r2);

/// sqrt(mean_r2 * ||U C L L'||^2 / ||X||^2).
double penalized_r_squared(double mean_r2, const Eigen::MatrixXd& x, const Membership& u, const Eigen::MatrixXd& centroids,
                           const Eigen::MatrixXd& loadings);

/// Alpha on standardized items. A single-column block returns 1.
double cronbach_alpha(const Eigen::MatrixXd& block);

/// Hubert-Arabie adjusted Rand index. Labels may be arbitrary integers.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

enum class ScoreSource {
    Data,      // X Lambda
    Centroid,  // U C Lambda
};

struct FitReport {
    ScoreSource source = ScoreSource::Data;
    Eigen::VectorXd mv_communality;     // J
    Eigen::VectorXd block_communality;  // P
    Eigen::VectorXd r_squared;          // P, NaN for exogenous LVs
    Eigen::VectorXd cronbach_alpha;     // P
    std::vector<bool> alpha_singleton;  // P
    double average_communality = 0.0;
    double average_r2 = 0.0;
    double gof = 0.0;
    double penalized_r2 = 0.0;
};

FitReport fit_report(const PathModelSpec& spec, const Eigen::MatrixXd& x, const FittedModel& fit,
                     ScoreSource source = ScoreSource::Data);

}  // namespace plskm
