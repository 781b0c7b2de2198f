#include "plskm/datagen.hpp"

#include "plskm/error.hpp"
#include "plskm/metrics.hpp"
#include "plskm/selection.hpp"

#include <json.hpp>

#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>
#include <variant>

namespace plskm {

namespace {

struct ReplicateOutcome {
    std::vector<GridRecord> records;
    std::optional<std::string> error;
};

FittedModel with_partition(const FittedModel& base, const Membership& partition, const Eigen::MatrixXd& x) {
    FittedModel out = base;
    out.state.membership = partition;
    out.state.centroids = compute_centroids(partition, x);
    out.state.scores = compute_scores(partition, out.state.centroids, out.state.loadings);
    return out;
}

ReplicateOutcome run_replicate(const GridCell& cell, int replicate, std::uint64_t seed, const GridOptions& options) {
    ReplicateOutcome out;
    auto add = [&](const std::string& method, const std::string& metric, double value) {
        out.records.push_back({cell.label, replicate, method, metric, value});
    };
    try {
        const SimDataset ds = generate_dataset(cell.config, seed);
        const DataMatrix x = standardize(ds.x, ds.column_names);
        FitOptions fo = options.fit;
        fo.seed = derive_seed(seed, 2);
        fo.threads = 1;

        const FittedModel fit = fit_multistart(ds.spec, x, cell.config.k, fo);
        const FitReport report = fit_report(ds.spec, x.values, fit);
        add("pls-sem-km", "r2star", report.penalized_r2);
        add("pls-sem-km", "ari", adjusted_rand_index(fit.state.membership.labels, ds.truth.labels));
        add("pls-sem-km", "gof", report.gof);
        add("pls-sem-km", "objective", fit.objective_value);
        add("pls-sem-km", "iterations", fit.n_iterations);
        add("pls-sem-km", "converged", fit.converged ? 1.0 : 0.0);

        const TandemResult tandem = tandem_baseline(ds.spec, x, cell.config.k, fo);
        const FitReport tandem_report = fit_report(ds.spec, x.values, with_partition(tandem.pls, tandem.membership, x.values));
        add("tandem", "r2star", tandem_report.penalized_r2);
        add("tandem", "ari", adjusted_rand_index(tandem.membership.labels, ds.truth.labels));

        if (options.select_k) {
            SelectionOptions so;
            so.fit = fo;
            so.references = options.selection_references;
            const int k_max = std::min(options.k_max, cell.config.n / 2);
            const KSelectionResult sel = select_k(ds.spec, x, options.k_min, k_max, so);
            add("pls-sem-km", "chosen_k", sel.chosen_k);
            add("pls-sem-km", "k_correct", sel.chosen_k == cell.config.k ? 1.0 : 0.0);
        }
    } catch (const std::exception& e) {
        out.records.clear();
        out.error = e.what();
    }
    return out;
}

}  // namespace

GridResult run_experiment_grid(const std::vector<GridCell>& grid, const GridOptions& options) {
    if (options.replicates < 1) throw DataError("replicates must be at least 1");
    options.fit.validate();
    const int reps = options.replicates;
    const int tasks = static_cast<int>(grid.size()) * reps;
    std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(tasks));

    auto run = [&](int t) {
        const int c = t / reps;
        const int r = t % reps;
        const std::uint64_t seed = derive_seed(derive_seed(options.fit.seed, static_cast<std::uint64_t>(c + 1)),
                                               static_cast<std::uint64_t>(r));
        outcomes[t] = run_replicate(grid[c], r + 1, seed, options);
    };
    const int workers = std::max(1, std::min(options.threads, tasks));
    if (workers == 1) {
        for (int t = 0; t < tasks; ++t) run(t);
    } else {
        std::atomic<int> next{0};
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int t = next++; t < tasks; t = next++) run(t);
            });
    }

    GridResult result;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        CellSummary summary;
        summary.cell = grid[c];
        std::map<std::string, std::pair<double, int>> sums;
        for (int r = 0; r < reps; ++r) {
            const auto& o = outcomes[c * reps + r];
            if (o.error) {
                ++summary.failed;
                summary.errors.push_back("replicate " + std::to_string(r + 1) + ": " + *o.error);
                continue;
            }
            ++summary.completed;
            for (const auto& rec : o.records) {
                auto& s = sums[rec.method + "/" + rec.metric];
                s.first += rec.value;
                ++s.second;
                result.records.push_back(rec);
            }
        }
        for (const auto& [key, s] : sums) summary.means[key] = s.first / s.second;
        result.cells.push_back(std::move(summary));
    }
    return result;
}

// Grid files.

namespace {

using Value = std::variant<double, std::string, std::vector<double>>;
using Table = std::map<std::string, Value>;

double number(const Table& t, const std::string& key, const std::string& where) {
    const auto* v = std::get_if<double>(&t.at(key));
    if (!v) throw SpecError(where + ": '" + key + "' must be a number");
    return *v;
}

int integer(const Table& t, const std::string& key, const std::string& where) {
    const double v = number(t, key, where);
    if (v != std::floor(v)) throw SpecError(where + ": '" + key + "' must be an integer");
    return static_cast<int>(v);
}

std::string text(const Table& t, const std::string& key, const std::string& where) {
    const auto* v = std::get_if<std::string>(&t.at(key));
    if (!v) throw SpecError(where + ": '" + key + "' must be a string");
    return *v;
}

ProportionScheme scheme_from(const std::string& name, const std::string& where) {
    if (name == "balanced") return ProportionScheme::Balanced;
    if (name == "unbalanced1") return ProportionScheme::Unbalanced1;
    if (name == "unbalanced2") return ProportionScheme::Unbalanced2;
    throw SpecError(where + ": unknown proportions '" + name + "'");
}

GridCell materialize(const Table& t, std::size_t index) {
    const std::string where = "cell " + std::to_string(index + 1);
    static const std::vector<std::string> known{"label", "context", "case", "n", "k", "proportions", "sigma", "model",
                                                "separation", "cluster_spread", "loading", "inner"};
    for (const auto& [key, v] : t)
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw SpecError(where + ": unknown key '" + key + "'");

    GridCell cell;
    const bool has_context = t.count("context"), has_case = t.count("case");
    if (has_context != has_case) throw SpecError(where + ": 'context' and 'case' go together");
    if (has_context) cell = standard_cell(integer(t, "context", where), integer(t, "case", where));
    else cell.label = "cell" + std::to_string(index + 1);

    SimConfig& c = cell.config;
    if (t.count("label")) cell.label = text(t, "label", where);
    if (t.count("n")) c.n = integer(t, "n", where);
    if (t.count("k")) c.k = integer(t, "k", where);
    if (t.count("sigma")) c.sigma = number(t, "sigma", where);
    if (t.count("separation")) c.separation = number(t, "separation", where);
    if (t.count("cluster_spread")) c.cluster_spread = number(t, "cluster_spread", where);
    if (t.count("loading")) c.loading_value = number(t, "loading", where);
    if (t.count("inner")) c.inner_value = number(t, "inner", where);
    if (t.count("model")) {
        const std::string m = text(t, "model", where);
        if (m == "model1") c.model = PathModelKind::Model1;
        else if (m == "model2") c.model = PathModelKind::Model2;
        else throw SpecError(where + ": model must be \"model1\" or \"model2\"");
    }
    if (t.count("proportions")) {
        const Value& v = t.at("proportions");
        if (const auto* s = std::get_if<std::string>(&v)) c.proportions = standard_proportions(c.k, scheme_from(*s, where));
        else if (const auto* list = std::get_if<std::vector<double>>(&v)) c.proportions = *list;
        else throw SpecError(where + ": proportions must be a name or a list");
    } else if (static_cast<int>(c.proportions.size()) != c.k) {
        c.proportions = (c.k == 3 || c.k == 4) ? standard_proportions(c.k, ProportionScheme::Balanced)
                                               : std::vector<double>(static_cast<std::size_t>(c.k), 1.0 / c.k);
    }
    try {
        c.validate();
    } catch (const DataError& e) {
        throw SpecError(where + ": " + e.what());
    }
    return cell;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& s, int line) {
    std::size_t used = 0;
    double v;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw SpecError("expected a number, got '" + s + "'", line, 1);
    }
    if (used != s.size()) throw SpecError("expected a number, got '" + s + "'", line, 1);
    return v;
}

Value parse_value(const std::string& raw, int line) {
    const std::string s = trim(raw);
    if (s.empty()) throw SpecError("missing value", line, 1);
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"') throw SpecError("unterminated string", line, 1);
        return s.substr(1, s.size() - 2);
    }
    if (s.front() == '[') {
        if (s.back() != ']') throw SpecError("unterminated list", line, 1);
        std::vector<double> list;
        std::stringstream items(s.substr(1, s.size() - 2));
        std::string item;
        while (std::getline(items, item, ','))
            if (!trim(item).empty()) list.push_back(parse_number(trim(item), line));
        return list;
    }
    return parse_number(s, line);
}

GridFile parse_toml_grid(const std::string& input) {
    GridFile out;
    std::vector<Table> tables;
    std::istringstream in(input);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') quoted = !quoted;
            if (s[i] == '#' && !quoted) {
                s.resize(i);
                break;
            }
        }
        s = trim(s);
        if (s.empty()) continue;
        if (s == "[[cell]]") {
            tables.emplace_back();
            continue;
        }
        if (s.front() == '[') throw SpecError("only [[cell]] tables are supported", line, 1);
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw SpecError("expected 'key = value'", line, 1);
        const std::string key = trim(s.substr(0, eq));
        const Value value = parse_value(s.substr(eq + 1), line);
        if (tables.empty()) {
            if (key != "replicates") throw SpecError("unknown top-level key '" + key + "'", line, 1);
            const auto* v = std::get_if<double>(&value);
            if (!v || *v < 1 || *v != std::floor(*v)) throw SpecError("replicates must be a positive integer", line, 1);
            out.replicates = static_cast<int>(*v);
        } else {
            if (tables.back().count(key)) throw SpecError("duplicate key '" + key + "'", line, 1);
            tables.back()[key] = value;
        }
    }
    for (std::size_t i = 0; i < tables.size(); ++i) out.cells.push_back(materialize(tables[i], i));
    return out;
}

GridFile parse_json_grid(const std::string& input) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(input);
    } catch (const nlohmann::json::parse_error& e) {
        throw SpecError(std::string("invalid JSON grid: ") + e.what());
    }
    GridFile out;
    if (doc.contains("replicates")) out.replicates = doc["replicates"].get<int>();
    if (!doc.contains("cells") || !doc["cells"].is_array()) throw SpecError("JSON grid needs a 'cells' array");
    std::size_t index = 0;
    for (const auto& entry : doc["cells"]) {
        Table t;
        for (const auto& [key, v] : entry.items()) {
            if (v.is_number()) t[key] = v.get<double>();
            else if (v.is_string()) t[key] = v.get<std::string>();
            else if (v.is_array()) t[key] = v.get<std::vector<double>>();
            else throw SpecError("cell " + std::to_string(index + 1) + ": unsupported value for '" + key + "'");
        }
        out.cells.push_back(materialize(t, index++));
    }
    return out;
}

}  // namespace

GridFile parse_grid(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    GridFile out = (first != std::string::npos && text[first] == '{') ? parse_json_grid(text) : parse_toml_grid(text);
    if (out.cells.empty()) throw SpecError("grid has no cells");
    return out;
}

GridFile load_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open grid file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_grid(buffer.str());
}

}  // namespace plskm
