#include "plskm/io.hpp"

#include "plskm/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace plskm {

int Dataset::missing_count() const { return static_cast<int>(values.array().isNaN().count()); }

namespace {

std::vector<std::string> split_record(const std::string& line, int line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(field);
            field.clear();
        } else if (ch != '\r') {
            field += ch;
        }
    }
    if (quoted) throw DataError("line " + std::to_string(line_no) + ": unterminated quote");
    fields.push_back(field);
    return fields;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::string& source, const CsvOptions& options) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    Dataset out;
    out.source = source;

    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty() && trim(line) != "\r") break;
    }
    if (line_no == 0 || trim(line).empty()) throw DataError(source + ": missing header row");
    for (auto& name : split_record(line, line_no)) out.column_names.push_back(trim(name));
    std::set<std::string> seen;
    for (const auto& name : out.column_names) {
        if (name.empty()) throw DataError(source + ": empty column name in header");
        if (!seen.insert(name).second) throw DataError(source + ": duplicate column '" + name + "'");
    }

    const std::size_t J = out.column_names.size();
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty() || trim(line) == "\r") continue;
        const auto fields = split_record(line, line_no);
        if (fields.size() != J)
            throw DataError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                            " fields, expected " + std::to_string(J));
        std::vector<double> row(J);
        for (std::size_t j = 0; j < J; ++j) {
            const std::string cell = trim(fields[j]);
            if (std::find(options.missing_tokens.begin(), options.missing_tokens.end(), cell) != options.missing_tokens.end()) {
                row[j] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
                throw DataError(source + ": line " + std::to_string(line_no) + ", column '" + out.column_names[j] +
                                "': non-numeric value '" + cell + "'");
            row[j] = v;
        }
        rows.push_back(std::move(row));
    }
    out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(J));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < J; ++j) out.values(i, j) = rows[i][j];
    return out;
}

Dataset read_csv(const std::string& path, const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str(), path, options);
}

Dataset project_columns(Dataset data, const PathModelSpec& spec) {
    std::vector<int> index;
    for (const auto& name : spec.mv_names) {
        const auto it = std::find(data.column_names.begin(), data.column_names.end(), name);
        if (it == data.column_names.end()) throw DataError(data.source + ": column '" + name + "' required by the model is missing");
        index.push_back(static_cast<int>(it - data.column_names.begin()));
    }
    std::vector<std::string> unused;
    for (const auto& name : data.column_names)
        if (spec.mv_index(name) < 0) unused.push_back(name);
    if (!unused.empty()) {
        std::string msg = "ignoring " + std::to_string(unused.size()) + " column(s) not in the model:";
        for (const auto& u : unused) msg += " " + u;
        data.warnings.push_back(msg);
    }
    Eigen::MatrixXd values(data.values.rows(), static_cast<Eigen::Index>(index.size()));
    for (std::size_t j = 0; j < index.size(); ++j) values.col(static_cast<Eigen::Index>(j)) = data.values.col(index[j]);
    data.values = std::move(values);
    data.column_names = spec.mv_names;
    return data;
}

Dataset ingest_csv(const std::string& path, const PathModelSpec& spec, const CsvOptions& options) {
    return project_columns(read_csv(path, options), spec);
}

double rescale_ecsi(double v) {
    if (!(v >= 1.0 && v <= 10.0)) throw DataError("rescale: value " + std::to_string(v) + " outside [1, 10]");
    if (v == 10.0) return 100.0;
    return 100.0 / 9.0 * (v - 1.0);
}

Dataset rescale_ecsi(Dataset data) {
    for (Eigen::Index j = 0; j < data.values.cols(); ++j)
        for (Eigen::Index i = 0; i < data.values.rows(); ++i) {
            double& v = data.values(i, j);
            if (std::isnan(v)) continue;
            try {
                v = rescale_ecsi(v);
            } catch (const DataError& e) {
                throw DataError("row " + std::to_string(i + 1) + ", column '" + data.column_names[j] + "': " + e.what());
            }
        }
    data.log.push_back("rescaled items from [1,10] to [0,100]");
    return data;
}

Dataset impute_mean(Dataset data) {
    int total = 0;
    for (Eigen::Index j = 0; j < data.values.cols(); ++j) {
        auto col = data.values.col(j);
        double sum = 0.0;
        int observed = 0;
        for (Eigen::Index i = 0; i < col.size(); ++i)
            if (!std::isnan(col(i))) {
                sum += col(i);
                ++observed;
            }
        const int missing = static_cast<int>(col.size()) - observed;
        if (missing == 0) continue;
        if (observed == 0) throw DataError("column '" + data.column_names[j] + "' has no observed values");
        const double mean = sum / observed;
        for (Eigen::Index i = 0; i < col.size(); ++i)
            if (std::isnan(col(i))) col(i) = mean;
        data.log.push_back("imputed " + std::to_string(missing) + " missing value(s) in '" + data.column_names[j] +
                           "' with the column mean");
        total += missing;
    }
    if (total == 0) data.log.push_back("no missing values to impute");
    return data;
}

DataMatrix to_standardized(const Dataset& data) {
    if (data.missing_count() > 0)
        throw DataError(std::to_string(data.missing_count()) + " missing cell(s) remain; use mean imputation");
    return standardize(data.values, data.column_names);
}

std::string to_csv(const Dataset& data) {
    std::ostringstream out;
    for (std::size_t j = 0; j < data.column_names.size(); ++j) out << (j ? "," : "") << data.column_names[j];
    out << '\n';
    char buf[64];
    for (Eigen::Index i = 0; i < data.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.values.cols(); ++j) {
            if (j) out << ',';
            const double v = data.values(i, j);
            if (std::isnan(v)) {
                out << "NA";
            } else {
                const auto res = std::to_chars(buf, buf + sizeof buf, v);
                out.write(buf, res.ptr - buf);
            }
        }
        out << '\n';
    }
    return out.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw DataError("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw DataError("cannot rename '" + tmp.string() + "' to '" + path + "': " + ec.message());
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw DataError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

GroupSummary summarize_groups(const PathModelSpec& spec, const FittedModel& fit, const Eigen::MatrixXd& x) {
    const Membership& u = fit.state.membership;
    Eigen::MatrixXd scores = x * fit.state.loadings;
    for (Eigen::Index p = 0; p < scores.cols(); ++p) {
        const double lo = scores.col(p).minCoeff();
        const double hi = scores.col(p).maxCoeff();
        if (hi > lo) scores.col(p) = (scores.col(p).array() - lo) / (hi - lo);
        else scores.col(p).setZero();
    }

    GroupSummary out;
    out.lv_names = spec.lv_names;
    out.sizes = u.counts();
    for (int c = 0; c < u.k; ++c) {
        std::vector<SummaryStats> row;
        for (Eigen::Index p = 0; p < scores.cols(); ++p) {
            std::vector<double> v;
            for (int i = 0; i < u.size(); ++i)
                if (u.labels[i] == c) v.push_back(scores(i, p));
            SummaryStats s;
            if (!v.empty()) {
                s.min = *std::min_element(v.begin(), v.end());
                s.max = *std::max_element(v.begin(), v.end());
                s.q1 = quantile(v, 0.25);
                s.median = quantile(v, 0.5);
                s.q3 = quantile(v, 0.75);
                double sum = 0.0;
                for (double d : v) sum += d;
                s.mean = sum / static_cast<double>(v.size());
            }
            row.push_back(s);
        }
        out.stats.push_back(std::move(row));
    }
    return out;
}

}  // namespace plskm
