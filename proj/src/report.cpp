#include "nondiss/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "nondiss/errors.hpp"

namespace nondiss {

namespace {

const char* kConfigColumns[] = {"d", "layers", "eps", "gamma", "beta", "agg", "agg_p", "agg_q",
                                "act", "dampening", "force", "readout_input", "hidden"};

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string cell(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return format_number(v.get<double>());
  return v.dump();
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_from(const nlohmann::json& v) {
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

Aggregate aggregate_or_nan(const std::vector<double>& values) {
  if (values.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, 0};
  }
  return aggregate(values);
}

}  // namespace

std::vector<ReportRow> summarize(const std::vector<RunResult>& runs) {
  require(!runs.empty(), ErrorKind::kEmpty, "no runs to report");
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::vector<const RunResult*>> groups;
  for (const auto& r : runs) {
    nlohmann::json cfg = to_json(r.config);
    groups[{r.task, r.config.kind, cfg.dump()}].push_back(&r);
  }
  std::vector<ReportRow> rows;
  for (const auto& [key, members] : groups) {
    ReportRow row;
    row.task = std::get<0>(key);
    row.model = std::get<1>(key);
    row.config = nlohmann::json::parse(std::get<2>(key));
    row.metric = to_string(members.front()->metric);
    std::vector<double> val;
    std::vector<double> test;
    for (const auto* r : members) {
      ++row.runs;
      if (r->failed) {
        ++row.failed;
        continue;
      }
      val.push_back(r->best_val);
      test.push_back(r->test);
    }
    row.val = aggregate_or_nan(val);
    row.test = aggregate_or_nan(test);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string rows_to_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "# mean and std over non-failed runs; std is the population standard deviation\n";
  out << "task,model";
  for (const char* c : kConfigColumns) out << ',' << c;
  out << ",runs,failed,metric,val_mean,val_std,test_mean,test_std\n";
  for (const auto& r : rows) {
    out << r.task << ',' << r.model;
    for (const char* c : kConfigColumns) out << ',' << (r.config.contains(c) ? cell(r.config.at(c)) : "");
    out << ',' << r.runs << ',' << r.failed << ',' << r.metric << ',' << format_number(r.val.mean) << ','
        << format_number(r.val.std) << ',' << format_number(r.test.mean) << ',' << format_number(r.test.std)
        << '\n';
  }
  return out.str();
}

nlohmann::json rows_to_json(const std::vector<ReportRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"task", r.task},
                   {"model", r.model},
                   {"config", r.config},
                   {"runs", r.runs},
                   {"failed", r.failed},
                   {"metric", r.metric},
                   {"val_mean", number_or_null(r.val.mean)},
                   {"val_std", number_or_null(r.val.std)},
                   {"test_mean", number_or_null(r.test.mean)},
                   {"test_std", number_or_null(r.test.std)}});
  }
  return {{"std", "population"}, {"rows", arr}};
}

std::vector<ReportRow> rows_from_json(const nlohmann::json& j) {
  std::vector<ReportRow> rows;
  try {
    for (const auto& o : j.at("rows")) {
      ReportRow r;
      r.task = o.at("task").get<std::string>();
      r.model = o.at("model").get<std::string>();
      r.config = o.at("config");
      r.runs = o.at("runs").get<int>();
      r.failed = o.at("failed").get<int>();
      r.metric = o.at("metric").get<std::string>();
      const int ok = r.runs - r.failed;
      r.val = {number_from(o.at("val_mean")), number_from(o.at("val_std")), ok};
      r.test = {number_from(o.at("test_mean")), number_from(o.at("test_std")), ok};
      rows.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, std::string("report json: ") + e.what());
  }
  return rows;
}

std::vector<ReportRow> collect_report(const std::vector<std::filesystem::path>& inputs) {
  require(!inputs.empty(), ErrorKind::kEmpty, "report needs at least one input");
  std::vector<RunResult> runs;
  std::vector<ReportRow> rows;
  auto read_json = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    require(static_cast<bool>(in), ErrorKind::kInvalidArgument, "cannot open " + p.string());
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kParse, p.string() + ": " + e.what());
    }
  };
  for (const auto& input : inputs) {
    if (std::filesystem::is_directory(input)) {
      std::vector<std::filesystem::path> files;
      for (const auto& entry : std::filesystem::directory_iterator(input)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("run-", 0) == 0 && entry.path().extension() == ".json") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) runs.push_back(run_result_from_json(read_json(f)));
    } else {
      require(std::filesystem::exists(input), ErrorKind::kInvalidArgument, "no such input " + input.string());
      auto more = rows_from_json(read_json(input));
      rows.insert(rows.end(), more.begin(), more.end());
    }
  }
  if (!runs.empty()) {
    auto more = summarize(runs);
    rows.insert(rows.end(), more.begin(), more.end());
  }
  require(!rows.empty(), ErrorKind::kEmpty, "inputs contain no runs");
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.task, a.model) < std::tie(b.task, b.model);
  });
  return rows;
}

}  // namespace nondiss
