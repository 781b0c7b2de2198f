#pragma once

#include "plskm/core.hpp"
#include "plskm/model_spec.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace plskm {

enum class PathModelKind { Model1, Model2 };

std::string to_string(PathModelKind m);

/// Model 1: xi1, xi2 -> eta1. Model 2: xi1 -> eta1 -> eta2. Three MVs per LV.
PathModelSpec simulation_spec(PathModelKind m);

/// Three LVs (xi1, xi2 -> eta1); each block holds three structured MVs and
/// two noise MVs. Column order: s1..s9, then z1..z6.
PathModelSpec intro_spec();

/// Seven-construct customer satisfaction model on x1..x24.
PathModelSpec ecsi_spec();

enum class ProportionScheme { Balanced, Unbalanced1, Unbalanced2 };

std::string to_string(ProportionScheme s);

/// Mixture weights used by the simulation study for K = 3 or 4.
std::vector<double> standard_proportions(int k, ProportionScheme scheme);

/// Largest-remainder rounding of n * p_k; leftover units go to the largest
/// remainders, lowest index first on ties.
std::vector<int> segment_counts(int n, const std::vector<double>& proportions);

struct SimConfig {
    int n = 150;
    int k = 3;
    std::vector<double> proportions{0.33, 0.33, 0.34};
    double sigma = 0.30;
    PathModelKind model = PathModelKind::Model1;
    double loading_value = 0.85;
    double inner_value = 0.85;
    /// Distance between neighbouring cluster centres in LV space.
    double separation = 12.5;
    /// Within-cluster SD of the exogenous scores is cluster_spread * sigma.
    double cluster_spread = 4.0;

    void validate() const;
};

struct SimDataset {
    Eigen::MatrixXd x;                 // n x J, raw
    std::vector<std::string> column_names;
    Membership truth;
    PathModelSpec spec;
    Eigen::MatrixXd loadings;          // J x P generating loadings
    Eigen::MatrixXd gamma;             // L x H
    Eigen::MatrixXd beta;              // L x L
    Eigen::MatrixXd centers;           // K x H
    Eigen::MatrixXd latent;            // n x P, [Xi, H]
};

struct ExogenousDraw {
    Eigen::MatrixXd xi;  // n x H
    Membership labels;
    Eigen::MatrixXd centers;
};

/// K centres in H dimensions with neighbour distance `separation`, centred at
/// the origin: a regular simplex when K <= H + 1, a regular polygon in the
/// first two coordinates when H >= 2, equispaced points when H = 1.
Eigen::MatrixXd cluster_centers(int k, int h, double separation);

ExogenousDraw generate_exogenous(const SimConfig& config, std::uint64_t seed);

SimDataset generate_dataset(const SimConfig& config, std::uint64_t seed);

struct IntroConfig {
    std::vector<int> group_sizes{30, 30, 40};
    double separation = 5.5;      // triangle side
    double within_sd = 1.0;
    double eta_variance = 3.0;
    double mv_noise_sd = 0.5;
    double noise_variance = 6.0;
    double loading_value = 0.85;
    double inner_value = 0.85;
};

SimDataset generate_intro_dataset(const IntroConfig& config, std::uint64_t seed);

/// Synthetic stand-in for the mobile phone survey: 250 x 24 item scores on a
/// 1..10 scale with a few missing cells (NaN) and segments of 92/112/46.
SimDataset generate_ecsi_synthetic(std::uint64_t seed, double missing_rate = 0.01);

struct GridCell {
    std::string label;
    int context = 0;
    int case_number = 0;
    SimConfig config;
};

/// Cell of the four simulation contexts. context: 1 = (Model 1, K=3),
/// 2 = (Model 2, K=3), 3 = (Model 1, K=4), 4 = (Model 2, K=4).
/// case_number 1..18 = size (150, 300) x proportions x sigma (.3, .4, .5).
GridCell standard_cell(int context, int case_number);

struct GridOptions {
    int replicates = 1;
    FitOptions fit;
    bool select_k = false;
    int k_min = 2;
    int k_max = 6;
    int selection_references = 20;
    int threads = 1;
};

struct GridRecord {
    std::string cell;
    int replicate = 0;
    std::string method;
    std::string metric;
    double value = 0.0;
};

struct CellSummary {
    GridCell cell;
    int completed = 0;
    int failed = 0;
    std::map<std::string, double> means;  // "method/metric" -> mean
    std::vector<std::string> errors;
};

struct GridResult {
    std::vector<GridRecord> records;
    std::vector<CellSummary> cells;
};

GridResult run_experiment_grid(const std::vector<GridCell>& grid, const GridOptions& options);

/// Grid file: TOML subset with `replicates = N` and `[[cell]]` tables holding
/// either `context`/`case` or explicit n, k, proportions, sigma, model.
/// A JSON document with the same keys is accepted as well.
struct GridFile {
    int replicates = 1;
    std::vector<GridCell> cells;
};

GridFile parse_grid(const std::string& text);
GridFile load_grid(const std::string& path);

}  // namespace plskm
