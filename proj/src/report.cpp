#include "plskm/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace plskm {

std::string format_double(double v) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::string fixed(double v, int digits = 3) {
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::vector<int> one_based(const Membership& u) {
    std::vector<int> out(u.labels);
    for (int& v : out) ++v;
    return out;
}

}  // namespace

Json matrix_json(const Eigen::MatrixXd& m) {
    Json data = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(number_or_null(m(i, j)));
    return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd path_table(const PathModelSpec& spec, const PathCoefficients& paths) {
    const int P = spec.num_lvs();
    const int H = spec.num_exogenous();
    Eigen::MatrixXd table = Eigen::MatrixXd::Zero(P, P);
    for (int l = H; l < P; ++l)
        for (int p : spec.predecessors(l)) table(p, l) = p < H ? paths.gamma(l - H, p) : paths.beta(l - H, p - H);
    return table;
}

Json spec_json(const PathModelSpec& spec) {
    Json lvs = Json::array();
    for (int p = 0; p < spec.num_lvs(); ++p) {
        std::vector<std::string> block;
        for (int j : spec.block(p)) block.push_back(spec.mv_names[j]);
        lvs.push_back({{"name", spec.lv_names[p]},
                       {"kind", spec.lv_kinds[p] == LvKind::Exogenous ? "exogenous" : "endogenous"},
                       {"mvs", block}});
    }
    Json paths = Json::array();
    for (int l = 0; l < spec.num_lvs(); ++l)
        for (int p : spec.predecessors(l)) paths.push_back({{"from", spec.lv_names[p]}, {"to", spec.lv_names[l]}});
    return Json{{"latent", lvs}, {"paths", paths}};
}

Json fitted_model_json(const PathModelSpec& spec, const FittedModel& fit) {
    Json runs = Json::array();
    for (const auto& r : fit.runs)
        runs.push_back({{"seed", r.seed}, {"objective", r.objective}, {"converged", r.converged}, {"cycled", r.cycled},
                        {"iterations", r.iterations}});
    return Json{
        {"k", fit.state.membership.k},
        {"n", fit.state.membership.size()},
        {"lv_names", spec.lv_names},
        {"mv_names", spec.mv_names},
        {"loadings", matrix_json(fit.state.loadings)},
        {"centroids", matrix_json(fit.state.centroids)},
        {"paths", matrix_json(path_table(spec, fit.paths))},
        {"gamma", matrix_json(fit.paths.gamma)},
        {"beta", matrix_json(fit.paths.beta)},
        {"assignment", one_based(fit.state.membership)},
        {"cluster_sizes", fit.state.membership.counts()},
        {"objective", fit.objective_value},
        {"objective_trace", fit.state.objective_trace},
        {"converged", fit.converged},
        {"cycled", fit.cycled},
        {"iterations", fit.n_iterations},
        {"seed", fit.seed},
        {"runs", runs},
    };
}

Json fit_report_json(const PathModelSpec& spec, const FitReport& report) {
    Json mvs = Json::array();
    for (int j = 0; j < spec.num_mvs(); ++j)
        mvs.push_back({{"mv", spec.mv_names[j]}, {"communality", report.mv_communality(j)}});
    Json blocks = Json::array();
    for (int p = 0; p < spec.num_lvs(); ++p)
        blocks.push_back({{"lv", spec.lv_names[p]},
                          {"communality", report.block_communality(p)},
                          {"r_squared", number_or_null(report.r_squared(p))},
                          {"cronbach_alpha", report.cronbach_alpha(p)},
                          {"alpha_singleton", static_cast<bool>(report.alpha_singleton[p])}});
    return Json{{"scores", report.source == ScoreSource::Data ? "X Lambda" : "U C Lambda"},
                {"average_communality", report.average_communality},
                {"average_r_squared", report.average_r2},
                {"gof", report.gof},
                {"penalized_r_squared", report.penalized_r2},
                {"blocks", blocks},
                {"manifest", mvs}};
}

Json selection_json(const KSelectionResult& r) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < r.candidate_ks.size(); ++i)
        rows.push_back({{"k", r.candidate_ks[i]},
                        {"pseudo_f", number_or_null(r.pseudo_f[i])},
                        {"degenerate", static_cast<bool>(r.degenerate[i])},
                        {"objective", r.objective[i]},
                        {"log_within", r.log_within[i]},
                        {"gap", r.gap[i]},
                        {"gap_sd", r.gap_sd[i]}});
    return Json{{"chosen_k", r.chosen_k},
                {"gap_k", r.gap_k},
                {"weak_evidence", r.weak_evidence},
                {"gap_one", r.gap_one},
                {"reference_count", r.reference_count},
                {"scores", r.scores == SelectionScores::PerK ? "per-k" : "plain-pls"},
                {"curve", rows}};
}

Json group_summary_json(const GroupSummary& s) {
    Json groups = Json::array();
    for (std::size_t c = 0; c < s.sizes.size(); ++c) {
        Json lvs = Json::array();
        for (std::size_t p = 0; p < s.lv_names.size(); ++p) {
            const auto& st = s.stats[c][p];
            lvs.push_back({{"lv", s.lv_names[p]}, {"min", st.min}, {"q1", st.q1}, {"median", st.median},
                           {"mean", st.mean}, {"q3", st.q3}, {"max", st.max}});
        }
        groups.push_back({{"group", c + 1}, {"size", s.sizes[c]}, {"lvs", lvs}});
    }
    return Json{{"normalization", "min-max per LV"}, {"groups", groups}};
}

Json restart_table_json(const RestartTable& t) {
    return Json{{"runs", t.runs},
                {"true_model_pct", t.percent(RunClass::TrueModel)},
                {"global_best_pct", t.percent(RunClass::GlobalBest)},
                {"local_minimum_pct", t.percent(RunClass::LocalMinimum)},
                {"overfit_pct", t.percent(RunClass::Overfit)}};
}

std::string loadings_csv(const PathModelSpec& spec, const Eigen::MatrixXd& loadings) {
    std::ostringstream out;
    out << "mv";
    for (const auto& lv : spec.lv_names) out << ',' << lv;
    out << '\n';
    for (int j = 0; j < spec.num_mvs(); ++j) {
        out << spec.mv_names[j];
        for (int p = 0; p < spec.num_lvs(); ++p) out << ',' << format_double(loadings(j, p));
        out << '\n';
    }
    return out.str();
}

std::string paths_csv(const PathModelSpec& spec, const PathCoefficients& paths) {
    const Eigen::MatrixXd table = path_table(spec, paths);
    std::ostringstream out;
    out << "from";
    for (const auto& lv : spec.lv_names) out << ',' << lv;
    out << '\n';
    for (int i = 0; i < spec.num_lvs(); ++i) {
        out << spec.lv_names[i];
        for (int j = 0; j < spec.num_lvs(); ++j) out << ',' << format_double(table(i, j));
        out << '\n';
    }
    return out.str();
}

std::string selection_csv(const KSelectionResult& r) {
    std::ostringstream out;
    out << "k,pseudo_f\n";
    for (std::size_t i = 0; i < r.candidate_ks.size(); ++i) out << r.candidate_ks[i] << ',' << format_double(r.pseudo_f[i]) << '\n';
    return out.str();
}

std::string group_summary_csv(const GroupSummary& s) {
    std::ostringstream out;
    out << "group,size,lv,min,q1,median,mean,q3,max\n";
    for (std::size_t c = 0; c < s.sizes.size(); ++c)
        for (std::size_t p = 0; p < s.lv_names.size(); ++p) {
            const auto& st = s.stats[c][p];
            out << c + 1 << ',' << s.sizes[c] << ',' << s.lv_names[p];
            for (double v : {st.min, st.q1, st.median, st.mean, st.q3, st.max}) out << ',' << format_double(v);
            out << '\n';
        }
    return out.str();
}

std::string grid_records_csv(const GridResult& result) {
    std::ostringstream out;
    out << "cell,replicate,method,metric,value\n";
    for (const auto& r : result.records)
        out << r.cell << ',' << r.replicate << ',' << r.method << ',' << r.metric << ',' << format_double(r.value) << '\n';
    return out.str();
}

std::string fit_report_markdown(const PathModelSpec& spec, const FitReport& report) {
    std::ostringstream out;
    out << "| LVs | Communality | R-Squared | Cronbach's alpha |\n|---|---|---|---|\n";
    for (int p = 0; p < spec.num_lvs(); ++p) {
        out << "| " << spec.lv_names[p] << " | " << fixed(report.block_communality(p)) << " | "
            << fixed(report.r_squared(p)) << " | " << fixed(report.cronbach_alpha(p))
            << (report.alpha_singleton[p] ? " (single item)" : "") << " |\n";
    }
    out << "\nAverage communality: " << fixed(report.average_communality, 4) << "  \n"
        << "Average R-squared: " << fixed(report.average_r2, 4) << "  \n"
        << "GoF: " << fixed(report.gof) << "  \n"
        << "Penalized R-squared: " << fixed(report.penalized_r2) << "\n";
    return out.str();
}

std::string group_summary_markdown(const GroupSummary& s) {
    std::ostringstream out;
    for (std::size_t c = 0; c < s.sizes.size(); ++c) {
        out << "**Group " << c + 1 << " (n=" << s.sizes[c] << ")**\n\n"
            << "| LV | Min | Q1 | Median | Mean | Q3 | Max |\n|---|---|---|---|---|---|---|\n";
        for (std::size_t p = 0; p < s.lv_names.size(); ++p) {
            const auto& st = s.stats[c][p];
            out << "| " << s.lv_names[p];
            for (double v : {st.min, st.q1, st.median, st.mean, st.q3, st.max}) out << " | " << fixed(v);
            out << " |\n";
        }
        out << '\n';
    }
    return out.str();
}

std::string grid_summary_markdown(const GridResult& result) {
    std::ostringstream out;
    out << "| Cell | n | K | sigma | model | reps | R2* PLS-SEM-KM | R2* tandem | ARI PLS-SEM-KM | ARI tandem | K correct | failed |\n"
        << "|---|---|---|---|---|---|---|---|---|---|---|---|\n";
    auto mean = [](const CellSummary& c, const std::string& key) {
        const auto it = c.means.find(key);
        return it == c.means.end() ? std::string("") : fixed(it->second);
    };
    for (const auto& c : result.cells) {
        const auto& cfg = c.cell.config;
        out << "| " << c.cell.label << " | " << cfg.n << " | " << cfg.k << " | " << fixed(cfg.sigma, 2) << " | "
            << to_string(cfg.model) << " | " << c.completed << " | " << mean(c, "pls-sem-km/r2star") << " | "
            << mean(c, "tandem/r2star") << " | " << mean(c, "pls-sem-km/ari") << " | " << mean(c, "tandem/ari") << " | "
            << mean(c, "pls-sem-km/k_correct") << " | " << c.failed << " |\n";
    }
    return out.str();
}

}  // namespace plskm
