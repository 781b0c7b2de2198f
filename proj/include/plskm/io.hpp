#pragma once

#include "plskm/core.hpp"
#include "plskm/model_spec.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace plskm {

/// Raw table as read from disk. Missing cells are NaN.
struct Dataset {
    Eigen::MatrixXd values;
    std::vector<std::string> column_names;
    std::string source;
    std::vector<std::string> log;       // preprocessing steps, in order
    std::vector<std::string> warnings;

    int rows() const { return static_cast<int>(values.rows()); }
    int cols() const { return static_cast<int>(values.cols()); }
    int missing_count() const;
};

struct CsvOptions {
    std::vector<std::string> missing_tokens{"", "NA"};
};

/// Comma-separated, '.' decimal, mandatory header. Fields may be quoted.
Dataset read_csv(const std::string& path, const CsvOptions& options = {});
Dataset parse_csv(const std::string& text, const std::string& source = "<memory>", const CsvOptions& options = {});

/// read_csv projected onto the spec's manifest variables, in spec order.
/// Unused columns are dropped with a warning; a missing one is an error.
Dataset ingest_csv(const std::string& path, const PathModelSpec& spec, const CsvOptions& options = {});
Dataset project_columns(Dataset data, const PathModelSpec& spec);

/// (100/9)(v - 1) for v in [1, 10].
double rescale_ecsi(double v);
Dataset rescale_ecsi(Dataset data);

/// Replace missing cells by the column mean of the observed values.
Dataset impute_mean(Dataset data);

/// Throws DataError if any cell is missing.
DataMatrix to_standardized(const Dataset& data);

std::string to_csv(const Dataset& data);

/// Write to a temporary sibling and rename over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

struct SummaryStats {
    double min = 0, q1 = 0, median = 0, mean = 0, q3 = 0, max = 0;
};

/// Per cluster and LV statistics of min-max normalized scores X Lambda.
struct GroupSummary {
    std::vector<std::string> lv_names;
    std::vector<int> sizes;
    std::vector<std::vector<SummaryStats>> stats;  // [cluster][lv]
};

/// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double p);

GroupSummary summarize_groups(const PathModelSpec& spec, const FittedModel& fit, const Eigen::MatrixXd& x);

}  // namespace plskm
