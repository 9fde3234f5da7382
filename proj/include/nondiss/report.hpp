#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nondiss/training.hpp"

namespace nondiss {

/// Runs of one (task, model, config) group.
struct ReportRow {
  std::string task;
  std::string model;
  nlohmann::json config;
  int runs = 0;
  int failed = 0;
  std::string metric;
  Aggregate val;
  Aggregate test;
};

/// Groups runs and sorts by task, then model, then config.
std::vector<ReportRow> summarize(const std::vector<RunResult>& runs);

/// CSV with a leading '#' comment line; std columns are population std.
std::string rows_to_csv(const std::vector<ReportRow>& rows);
nlohmann::json rows_to_json(const std::vector<ReportRow>& rows);
std::vector<ReportRow> rows_from_json(const nlohmann::json& j);

/// Inputs are run directories (every run-*.json inside) or report JSON files.
std::vector<ReportRow> collect_report(const std::vector<std::filesystem::path>& inputs);

}  // namespace nondiss
