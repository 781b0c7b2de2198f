#pragma once

#include "plskm/core.hpp"
#include "plskm/datagen.hpp"
#include "plskm/io.hpp"
#include "plskm/metrics.hpp"
#include "plskm/selection.hpp"

#include <json.hpp>

#include <string>

namespace plskm {

using Json = nlohmann::ordered_json;

/// Matrices serialize as {"rows", "cols", "data"} with row-major data.
Json matrix_json(const Eigen::MatrixXd& m);

/// P x P matrix whose (i, j) entry is the coefficient of the path i -> j.
Eigen::MatrixXd path_table(const PathModelSpec& spec, const PathCoefficients& paths);

/// Names, kinds, blocks and directed paths of a model.
Json spec_json(const PathModelSpec& spec);
Json fitted_model_json(const PathModelSpec& spec, const FittedModel& fit);
Json fit_report_json(const PathModelSpec& spec, const FitReport& report);
Json selection_json(const KSelectionResult& result);
Json group_summary_json(const GroupSummary& summary);
Json restart_table_json(const RestartTable& table);

std::string loadings_csv(const PathModelSpec& spec, const Eigen::MatrixXd& loadings);
std::string paths_csv(const PathModelSpec& spec, const PathCoefficients& paths);
/// Two columns: K and the pseudo-F value.
std::string selection_csv(const KSelectionResult& result);
std::string group_summary_csv(const GroupSummary& summary);
std::string grid_records_csv(const GridResult& result);

std::string fit_report_markdown(const PathModelSpec& spec, const FitReport& report);
std::string group_summary_markdown(const GroupSummary& summary);
std::string grid_summary_markdown(const GridResult& result);

/// Shortest decimal that round-trips.
std::string format_double(double v);

}  // namespace plskm
