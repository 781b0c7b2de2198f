#pragma once

#include "plskm/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace plskm {

enum class SelectionScores {
    PerK,       // X Lambda from a PLS-SEM-KM fit at each K
    PlainPls,   // X Lambda from one plain PLS fit, partitioned by K-means
};

struct SelectionOptions {
    FitOptions fit;
    int references = 50;
    SelectionScores scores = SelectionScores::PerK;
};

struct KSelectionResult {
    std::vector<int> candidate_ks;
    std::vector<double> pseudo_f;       // +inf where the within dispersion vanishes
    std::vector<bool> degenerate;       // W_K == 0
    std::vector<double> objective;      // model objective per K
    std::vector<double> log_within;     // log W_K on the scores
    std::vector<double> gap;
    std::vector<double> gap_sd;         // s_K = sd * sqrt(1 + 1/B)
    double gap_one = 0.0;               // Gap(1) on the k_min scores
    int chosen_k = 0;                   // argmax pseudo-F
    int gap_k = 0;                      // smallest K with Gap(K) >= Gap(K+1) - s_{K+1}
    int reference_count = 0;
    bool weak_evidence = false;         // Gap(1) >= Gap(k_min) - s_{k_min}
    SelectionScores scores = SelectionScores::PerK;
};

/// Pseudo-F [B/(K-1)] / [W/(n-K)] of a partition of `data`; +inf when W is 0.
double pseudo_f(const Eigen::MatrixXd& data, const Membership& u);

KSelectionResult select_k(const PathModelSpec& spec, const DataMatrix& x, int k_min, int k_max,
                          const SelectionOptions& options);

enum class RunClass { TrueModel, GlobalBest, LocalMinimum, Overfit };

std::string to_string(RunClass c);

struct TruthReference {
    Membership partition;
    double objective = 0.0;  // objective of the model fitted on the true partition
};

struct RunDiagnostic {
    int index = 0;
    double objective = 0.0;
    RunClass classification = RunClass::GlobalBest;
};

struct RestartTable {
    int runs = 0;
    int true_model = 0;
    int global_best = 0;
    int local_minimum = 0;
    int overfit = 0;
    std::vector<RunDiagnostic> details;

    double percent(RunClass c) const;
    /// Pool another table (e.g. one per generated dataset).
    void merge(const RestartTable& other);
};

/// With a truth reference a run is "true" when its partition matches the
/// truth (ARI 1), "overfit" when its objective is below the true-model
/// objective by more than `tolerance`, and a local minimum otherwise.
/// Without it, runs within `tolerance` of the best objective are global-best.
RestartTable restart_diagnostics(const std::vector<RunRecord>& runs, const std::optional<TruthReference>& truth,
                                 double tolerance = 1e-6);

}  // namespace plskm
