#include "plskm/datagen.hpp"
#include "plskm/error.hpp"
#include "plskm/io.hpp"
#include "plskm/metrics.hpp"
#include "plskm/report.hpp"
#include "plskm/selection.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace plskm;

namespace {

struct Common {
    std::string data;
    std::string model;
    std::string out = "plskm-out";
    std::uint64_t seed = 1;
    int starts = 15;
    double tolerance = 1e-12;
    int max_iter = 300;
    int threads = 1;
    bool rescale = false;
    std::string impute = "none";
    std::vector<std::string> na_tokens{"", "NA"};
    std::string outer = "regression";

    FitOptions fit_options() const {
        FitOptions o;
        o.seed = seed;
        o.n_starts = starts;
        o.tolerance = tolerance;
        o.max_iterations = max_iter;
        o.threads = threads;
        o.outer = outer == "per-column" ? OuterMode::PerColumn : OuterMode::Regression;
        return o;
    }
};

void add_fit_flags(CLI::App* cmd, Common& c, bool needs_data = true) {
    if (needs_data) {
        cmd->add_option("--data", c.data, "CSV file with a header row")->required()->check(CLI::ExistingFile);
        cmd->add_option("--model", c.model, "Model specification file")->required()->check(CLI::ExistingFile);
        cmd->add_flag("--rescale-ecsi", c.rescale, "Map 1..10 item scores to 0..100 before fitting");
        cmd->add_option("--impute", c.impute, "Missing-value handling")->check(CLI::IsMember({"mean", "none"}));
        cmd->add_option("--na", c.na_tokens, "Tokens read as missing (default: empty cell and NA)");
    }
    cmd->add_option("--starts", c.starts, "Random starts per fit")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", c.seed, "Base random seed");
    cmd->add_option("--tolerance", c.tolerance, "Convergence threshold on ||C L - C_n L_n||^2");
    cmd->add_option("--max-iter", c.max_iter, "Iteration budget per start")->check(CLI::PositiveNumber);
    cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--outer", c.outer, "Loading update: regression or per-column")
        ->check(CLI::IsMember({"regression", "per-column"}));
    cmd->add_option("--out", c.out, "Output directory");
}

struct Prepared {
    PathModelSpec spec;
    Dataset dataset;
    DataMatrix x;
};

Prepared prepare(const Common& c) {
    Prepared p;
    p.spec = load_model_spec(c.model);
    CsvOptions csv;
    csv.missing_tokens = c.na_tokens;
    p.dataset = ingest_csv(c.data, p.spec, csv);
    if (c.rescale) p.dataset = rescale_ecsi(std::move(p.dataset));
    if (c.impute == "mean") p.dataset = impute_mean(std::move(p.dataset));
    p.dataset.log.push_back("standardized columns (mean 0, sample variance 1)");
    p.x = to_standardized(p.dataset);
    for (const auto& w : p.dataset.warnings) std::cerr << "warning: " << w << '\n';
    return p;
}

Json input_json(const Prepared& p) {
    return Json{{"rows", p.dataset.rows()}, {"columns", p.dataset.cols()}, {"preprocessing", p.dataset.log},
                {"warnings", p.dataset.warnings}};
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void write_json(const std::string& dir, const std::string& name, const Json& j) {
    write_file_atomic(path_in(dir, name), j.dump(2) + "\n");
}

void write_metadata(const std::string& dir, const std::string& command, int argc, char** argv) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    std::vector<std::string> args(argv, argv + argc);
    write_json(dir, "metadata.json", Json{{"command", command}, {"argv", args}, {"created", stamp}});
}

int run_fit(const Common& c, int k, bool uc_scores) {
    const Prepared p = prepare(c);
    const FittedModel fit = fit_multistart(p.spec, p.x, k, c.fit_options());
    const FitReport report = fit_report(p.spec, p.x.values, fit, uc_scores ? ScoreSource::Centroid : ScoreSource::Data);
    const GroupSummary groups = summarize_groups(p.spec, fit, p.x.values);

    write_json(c.out, "result.json",
               Json{{"command", "fit"}, {"input", input_json(p)}, {"spec", spec_json(p.spec)}, {"model", fitted_model_json(p.spec, fit)},
                    {"fit_report", fit_report_json(p.spec, report)}, {"groups", group_summary_json(groups)},
                    {"restarts", restart_table_json(restart_diagnostics(fit.runs, std::nullopt))}});
    write_file_atomic(path_in(c.out, "loadings.csv"), loadings_csv(p.spec, fit.state.loadings));
    write_file_atomic(path_in(c.out, "paths.csv"), paths_csv(p.spec, fit.paths));
    write_file_atomic(path_in(c.out, "groups.csv"), group_summary_csv(groups));
    write_file_atomic(path_in(c.out, "report.md"),
                      "# Fit measures\n\n" + fit_report_markdown(p.spec, report) + "\n# Groups\n\n" + group_summary_markdown(groups));

    std::cout << "K=" << k << " objective=" << format_double(fit.objective_value) << " converged=" << (fit.converged ? "yes" : fit.cycled ? "cycle" : "no")
              << " iterations=" << fit.n_iterations << " GoF=" << format_double(report.gof) << '\n';
    std::cout << "cluster sizes:";
    for (int s : fit.state.membership.counts()) std::cout << ' ' << s;
    std::cout << '\n';
    return 0;
}

int run_tandem(const Common& c, int k) {
    const Prepared p = prepare(c);
    const TandemResult t = tandem_baseline(p.spec, p.x, k, c.fit_options());
    Json j{{"command", "tandem"}, {"input", input_json(p)}, {"pls", fitted_model_json(p.spec, t.pls)},
           {"kmeans_objective", t.kmeans_objective}};
    std::vector<int> labels(t.membership.labels);
    for (int& v : labels) ++v;
    j["assignment"] = labels;
    j["cluster_sizes"] = t.membership.counts();
    write_json(c.out, "result.json", j);
    std::cout << "K=" << k << " k-means objective=" << format_double(t.kmeans_objective) << '\n';
    return 0;
}

int run_select(const Common& c, int k_min, int k_max, int references, bool plain) {
    const Prepared p = prepare(c);
    SelectionOptions so;
    so.fit = c.fit_options();
    so.references = references;
    so.scores = plain ? SelectionScores::PlainPls : SelectionScores::PerK;
    const KSelectionResult r = select_k(p.spec, p.x, k_min, k_max, so);
    write_json(c.out, "result.json", Json{{"command", "select-k"}, {"input", input_json(p)}, {"selection", selection_json(r)}});
    write_file_atomic(path_in(c.out, "k_curve.csv"), selection_csv(r));
    for (std::size_t i = 0; i < r.candidate_ks.size(); ++i)
        if (r.degenerate[i]) std::cerr << "warning: within dispersion vanishes at K=" << r.candidate_ks[i] << '\n';
    std::cout << "chosen K=" << r.chosen_k << " (pseudo-F), gap rule K=" << r.gap_k
              << (r.weak_evidence ? " [weak evidence of clustering]" : "") << '\n';
    return 0;
}

struct SimulateArgs {
    std::string kind = "model1";
    int n = 150;
    int k = 3;
    double sigma = 0.3;
    std::string proportions = "balanced";
    int context = 0;
    int case_number = 0;
    double separation = -1;
    double spread = -1;
};

int run_simulate(const Common& c, const SimulateArgs& a) {
    SimDataset ds;
    Json meta{{"kind", a.kind}, {"seed", c.seed}};
    if (a.kind == "intro") {
        IntroConfig ic;
        if (a.separation >= 0) ic.separation = a.separation;
        ds = generate_intro_dataset(ic, c.seed);
        meta["separation"] = ic.separation;
    } else if (a.kind == "ecsi") {
        ds = generate_ecsi_synthetic(c.seed);
        meta["note"] = "synthetic ECSI-shaped data, not the survey";
    } else {
        GridCell cell;
        if (a.context > 0) {
            cell = standard_cell(a.context, a.case_number);
        } else {
            cell.config.model = a.kind == "model2" ? PathModelKind::Model2 : PathModelKind::Model1;
            cell.config.n = a.n;
            cell.config.k = a.k;
            cell.config.sigma = a.sigma;
            ProportionScheme scheme = ProportionScheme::Balanced;
            if (a.proportions == "unbalanced1") scheme = ProportionScheme::Unbalanced1;
            if (a.proportions == "unbalanced2") scheme = ProportionScheme::Unbalanced2;
            cell.config.proportions = standard_proportions(a.k, scheme);
        }
        if (a.separation >= 0) cell.config.separation = a.separation;
        if (a.spread >= 0) cell.config.cluster_spread = a.spread;
        ds = generate_dataset(cell.config, c.seed);
        meta["config"] = {{"n", cell.config.n}, {"k", cell.config.k}, {"sigma", cell.config.sigma},
                          {"model", to_string(cell.config.model)}, {"proportions", cell.config.proportions},
                          {"separation", cell.config.separation}, {"cluster_spread", cell.config.cluster_spread}};
    }
    Dataset out;
    out.values = ds.x;
    out.column_names = ds.column_names;
    write_file_atomic(path_in(c.out, "data.csv"), to_csv(out));
    std::string truth = "label\n";
    for (int l : ds.truth.labels) truth += std::to_string(l + 1) + "\n";
    write_file_atomic(path_in(c.out, "truth.csv"), truth);
    write_file_atomic(path_in(c.out, "model.spec"), to_text(ds.spec));
    meta["latent_centers"] = matrix_json(ds.centers);
    write_json(c.out, "result.json", meta);
    std::cout << "wrote " << ds.x.rows() << "x" << ds.x.cols() << " data to " << path_in(c.out, "data.csv") << '\n';
    return 0;
}

int run_benchmark(const Common& c, const std::string& grid_path, int replicates, bool with_selection) {
    GridFile grid = load_grid(grid_path);
    GridOptions go;
    go.replicates = replicates > 0 ? replicates : grid.replicates;
    go.fit = c.fit_options();
    go.threads = c.threads;
    go.select_k = with_selection;
    const GridResult r = run_experiment_grid(grid.cells, go);

    Json cells = Json::array();
    for (const auto& s : r.cells) cells.push_back({{"cell", s.cell.label}, {"completed", s.completed}, {"failed", s.failed},
                                                   {"means", s.means}, {"errors", s.errors}});
    write_json(c.out, "result.json", Json{{"command", "benchmark"}, {"replicates", go.replicates}, {"cells", cells}});
    write_file_atomic(path_in(c.out, "records.csv"), grid_records_csv(r));
    const std::string md = grid_summary_markdown(r);
    write_file_atomic(path_in(c.out, "summary.md"), md);
    std::cout << md;
    int failed = 0;
    for (const auto& s : r.cells) failed += s.failed;
    if (failed) std::cerr << "warning: " << failed << " replicate(s) failed; see result.json\n";
    return 0;
}

int run_validate(const std::string& model) {
    std::ifstream in(model);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const PathModelSpec spec = parse_model_spec_unchecked(buffer.str());
    const auto violations = validate_spec(spec);
    if (violations.empty()) {
        std::cout << "ok: " << spec.num_lvs() << " latent variables (" << spec.num_exogenous() << " exogenous), "
                  << spec.num_mvs() << " manifest variables\n";
        return 0;
    }
    for (const auto& v : violations) std::cout << v.kind << ": " << v.detail << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Partial least squares K-means: joint path modelling and clustering"};
    app.require_subcommand(1);
    Common c;

    int k = 0;
    bool uc_scores = false;
    auto* fit = app.add_subcommand("fit", "Fit the model for a fixed K");
    add_fit_flags(fit, c);
    fit->add_option("--k", k, "Number of clusters")->required()->check(CLI::PositiveNumber);
    fit->add_flag("--centroid-scores", uc_scores, "Compute fit indices on U C Lambda instead of X Lambda");

    auto* tandem = app.add_subcommand("tandem", "Plain PLS followed by K-means on the scores");
    add_fit_flags(tandem, c);
    tandem->add_option("--k", k, "Number of clusters")->required()->check(CLI::PositiveNumber);

    int k_min = 2, k_max = 10, references = 50;
    bool plain = false;
    auto* select = app.add_subcommand("select-k", "Scan K and report pseudo-F and gap curves");
    add_fit_flags(select, c);
    select->add_option("--k-min", k_min, "Smallest K");
    select->add_option("--k-max", k_max, "Largest K");
    select->add_option("--references", references, "Uniform reference datasets for the gap statistic");
    select->add_flag("--plain-pls-scores", plain, "Use one plain PLS fit plus K-means instead of per-K fits");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
    add_fit_flags(simulate, c, false);
    simulate->add_option("--kind", sim.kind, "model1, model2, intro or ecsi")
        ->check(CLI::IsMember({"model1", "model2", "intro", "ecsi"}));
    simulate->add_option("--n", sim.n, "Rows");
    simulate->add_option("--k", sim.k, "Segments");
    simulate->add_option("--sigma", sim.sigma, "Error standard deviation");
    simulate->add_option("--proportions", sim.proportions)->check(CLI::IsMember({"balanced", "unbalanced1", "unbalanced2"}));
    auto* ctx = simulate->add_option("--context", sim.context, "Standard context 1..4")->check(CLI::Range(1, 4));
    simulate->add_option("--case", sim.case_number, "Standard case 1..18")->check(CLI::Range(1, 18))->needs(ctx);
    ctx->needs("--case");
    simulate->add_option("--separation", sim.separation, "Distance between neighbouring centres");
    simulate->add_option("--spread", sim.spread, "Within-cluster SD as a multiple of sigma");

    std::string grid_path;
    int replicates = 0;
    bool with_selection = false;
    auto* bench = app.add_subcommand("benchmark", "Run a simulation grid");
    add_fit_flags(bench, c, false);
    bench->add_option("--grid", grid_path, "Grid file (TOML subset or JSON)")->required()->check(CLI::ExistingFile);
    bench->add_option("--replicates", replicates, "Override the grid's replicate count")->check(CLI::PositiveNumber);
    bench->add_flag("--select-k", with_selection, "Also run K selection per replicate");

    std::string model_path;
    auto* validate = app.add_subcommand("validate-spec", "Check a model specification");
    validate->add_option("--model", model_path, "Model specification file")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        int status = 0;
        std::string name;
        if (fit->parsed()) status = run_fit(c, k, uc_scores), name = "fit";
        else if (tandem->parsed()) status = run_tandem(c, k), name = "tandem";
        else if (select->parsed()) status = run_select(c, k_min, k_max, references, plain), name = "select-k";
        else if (simulate->parsed()) status = run_simulate(c, sim), name = "simulate";
        else if (bench->parsed()) status = run_benchmark(c, grid_path, replicates, with_selection), name = "benchmark";
        else return run_validate(model_path);
        write_metadata(c.out, name, argc, argv);
        return status;
    } catch (const SpecError& e) {
        std::cerr << "model error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
