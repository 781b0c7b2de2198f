#pragma once

#include "plskm/core.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace plskm {

struct KMeansOptions {
    int n_starts = 15;
    int max_iterations = 300;
    std::uint64_t seed = 1;
};

struct KMeansResult {
    Membership membership;
    Eigen::MatrixXd centers;
    double within_ss = 0.0;
    int iterations = 0;
};

/// Lloyd iterations from a random partition. Ties go to the lowest cluster
/// index; an emptied cluster takes the row farthest from its own center.
KMeansResult kmeans_once(const Eigen::MatrixXd& data, int k, int max_iterations, std::uint64_t seed);

KMeansResult kmeans(const Eigen::MatrixXd& data, int k, const KMeansOptions& options);

/// Sum of squared distances of rows to their cluster means.
double within_dispersion(const Eigen::MatrixXd& data, const Membership& u);

/// Sum over clusters of n_k ||mean_k - mean||^2.
double between_dispersion(const Eigen::MatrixXd& data, const Membership& u);

}  // namespace plskm
