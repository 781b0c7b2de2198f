#include "plskm/selection.hpp"

#include "plskm/error.hpp"
#include "plskm/kmeans.hpp"
#include "plskm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace plskm {

namespace {

constexpr std::uint64_t kReferenceStream = 0x5EED0F0E5EED0F0EULL;

bool vanishing(double within, double total) { return !(within > 1e-14 * std::max(total, 1e-300)); }

// Mean and sd of log W over uniform references drawn in the bounding box of `data`.
std::pair<double, double> reference_log_within(const Eigen::MatrixXd& data, int k, int references,
                                               const KMeansOptions& km, std::uint64_t seed) {
    const Eigen::RowVectorXd lo = data.colwise().minCoeff();
    const Eigen::RowVectorXd hi = data.colwise().maxCoeff();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> logs;
    Eigen::MatrixXd sample(data.rows(), data.cols());
    for (int b = 0; b < references; ++b) {
        for (Eigen::Index i = 0; i < sample.rows(); ++i)
            for (Eigen::Index j = 0; j < sample.cols(); ++j) sample(i, j) = lo(j) + (hi(j) - lo(j)) * unit(rng);
        double w;
        if (k == 1) {
            w = (sample.rowwise() - sample.colwise().mean()).squaredNorm();
        } else {
            KMeansOptions opts = km;
            opts.seed = derive_seed(seed, static_cast<std::uint64_t>(b));
            w = kmeans(sample, k, opts).within_ss;
        }
        logs.push_back(std::log(std::max(w, std::numeric_limits<double>::min())));
    }
    double mean = 0.0;
    for (double v : logs) mean += v;
    mean /= static_cast<double>(logs.size());
    double var = 0.0;
    for (double v : logs) var += (v - mean) * (v - mean);
    var /= static_cast<double>(logs.size());
    const double sd = std::sqrt(var) * std::sqrt(1.0 + 1.0 / static_cast<double>(references));
    return {mean, sd};
}

}  // namespace

double pseudo_f(const Eigen::MatrixXd& data, const Membership& u) {
    const double n = static_cast<double>(u.size());
    const double k = static_cast<double>(u.k);
    if (u.k < 2 || u.k >= u.size()) throw DataError("pseudo-F needs 2 <= K < n");
    const double within = within_dispersion(data, u);
    const double between = between_dispersion(data, u);
    if (vanishing(within, within + between)) return std::numeric_limits<double>::infinity();
    return (between / (k - 1.0)) / (within / (n - k));
}

KSelectionResult select_k(const PathModelSpec& spec, const DataMatrix& x, int k_min, int k_max,
                          const SelectionOptions& options) {
    options.fit.validate();
    if (k_min < 2) throw DataError("k_min must be at least 2");
    if (k_max <= k_min) throw DataError("the scan needs at least two K values (k_max > k_min)");
    if (2 * k_max > x.rows()) throw DataError("k_max must not exceed n/2");
    if (options.references < 1) throw DataError("reference count must be at least 1");

    KSelectionResult out;
    out.reference_count = options.references;
    out.scores = options.scores;

    KMeansOptions km;
    km.n_starts = options.fit.n_starts;
    km.max_iterations = options.fit.max_iterations;

    Eigen::MatrixXd plain_scores;
    if (options.scores == SelectionScores::PlainPls)
        plain_scores = fit_plain_pls(spec, x, options.fit).state.scores;

    for (int k = k_min; k <= k_max; ++k) {
        Eigen::MatrixXd scores;
        Membership partition;
        double model_objective;
        if (options.scores == SelectionScores::PerK) {
            FitOptions fo = options.fit;
            fo.seed = derive_seed(options.fit.seed, static_cast<std::uint64_t>(k));
            const FittedModel fit = fit_multistart(spec, x, k, fo);
            scores = x.values * fit.state.loadings;
            partition = fit.state.membership;
            model_objective = fit.objective_value;
        } else {
            km.seed = derive_seed(options.fit.seed, static_cast<std::uint64_t>(k));
            const KMeansResult clusters = kmeans(plain_scores, k, km);
            scores = plain_scores;
            partition = clusters.membership;
            model_objective = clusters.within_ss;
        }

        const double within = within_dispersion(scores, partition);
        const double total = (scores.rowwise() - scores.colwise().mean()).squaredNorm();
        const bool degenerate = vanishing(within, total);
        const double log_w = std::log(std::max(within, std::numeric_limits<double>::min()));
        const std::uint64_t ref_seed = derive_seed(options.fit.seed ^ kReferenceStream, static_cast<std::uint64_t>(k));
        const auto [ref_mean, ref_sd] = reference_log_within(scores, k, options.references, km, ref_seed);

        out.candidate_ks.push_back(k);
        out.pseudo_f.push_back(pseudo_f(scores, partition));
        out.degenerate.push_back(degenerate);
        out.objective.push_back(model_objective);
        out.log_within.push_back(log_w);
        out.gap.push_back(ref_mean - log_w);
        out.gap_sd.push_back(ref_sd);

        if (k == k_min) {
            const double log_w1 = std::log(std::max(total, std::numeric_limits<double>::min()));
            const auto [ref1_mean, ref1_sd] = reference_log_within(scores, 1, options.references, km, ref_seed ^ 1ULL);
            (void)ref1_sd;
            out.gap_one = ref1_mean - log_w1;
        }
    }

    const auto best = std::max_element(out.pseudo_f.begin(), out.pseudo_f.end());
    out.chosen_k = out.candidate_ks[static_cast<std::size_t>(best - out.pseudo_f.begin())];

    out.gap_k = out.candidate_ks.back();
    for (std::size_t i = 0; i + 1 < out.candidate_ks.size(); ++i) {
        if (out.gap[i] >= out.gap[i + 1] - out.gap_sd[i + 1]) {
            out.gap_k = out.candidate_ks[i];
            break;
        }
    }
    out.weak_evidence = out.gap_one >= out.gap.front() - out.gap_sd.front();
    return out;
}

std::string to_string(RunClass c) {
    switch (c) {
        case RunClass::TrueModel: return "true";
        case RunClass::GlobalBest: return "global-best";
        case RunClass::LocalMinimum: return "local-minimum";
        case RunClass::Overfit: return "overfit";
    }
    return "unknown";
}

double RestartTable::percent(RunClass c) const {
    if (runs == 0) return 0.0;
    int count = 0;
    switch (c) {
        case RunClass::TrueModel: count = true_model; break;
        case RunClass::GlobalBest: count = global_best; break;
        case RunClass::LocalMinimum: count = local_minimum; break;
        case RunClass::Overfit: count = overfit; break;
    }
    return 100.0 * count / runs;
}

void RestartTable::merge(const RestartTable& other) {
    const int offset = runs;
    runs += other.runs;
    true_model += other.true_model;
    global_best += other.global_best;
    local_minimum += other.local_minimum;
    overfit += other.overfit;
    for (RunDiagnostic d : other.details) {
        d.index += offset;
        details.push_back(d);
    }
}

RestartTable restart_diagnostics(const std::vector<RunRecord>& runs, const std::optional<TruthReference>& truth,
                                 double tolerance) {
    if (runs.empty()) throw DataError("restart diagnostics need at least one run");
    RestartTable table;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : runs) best = std::min(best, r.objective);

    for (std::size_t i = 0; i < runs.size(); ++i) {
        const RunRecord& r = runs[i];
        RunClass c;
        if (truth) {
            if (adjusted_rand_index(r.membership.labels, truth->partition.labels) == 1.0)
                c = RunClass::TrueModel;
            else if (r.objective < truth->objective - tolerance)
                c = RunClass::Overfit;
            else
                c = RunClass::LocalMinimum;
        } else {
            c = r.objective <= best + tolerance ? RunClass::GlobalBest : RunClass::LocalMinimum;
        }
        switch (c) {
            case RunClass::TrueModel: ++table.true_model; break;
            case RunClass::GlobalBest: ++table.global_best; break;
            case RunClass::LocalMinimum: ++table.local_minimum; break;
            case RunClass::Overfit: ++table.overfit; break;
        }
        table.details.push_back({static_cast<int>(i), r.objective, c});
    }
    table.runs = static_cast<int>(runs.size());
    return table;
}

}  // namespace plskm
