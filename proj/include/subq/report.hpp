#pragma once

#include "subq/types.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace subq::report {

inline constexpr const char* kToolName = "subq-lab";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

struct CheckRecord {
  std::string name;
  std::string status;  // "pass" | "fail" | "diagnostic"
  std::map<std::string, double> metrics;
  std::string note;
  double runtime_sec = 0.0;
};

// Plain numeric table attached to a report; emitted as whitespace .dat or .csv.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  bool csv = false;
};

struct RunReport {
  std::string experiment;
  std::uint64_t seed = 0;
  bool deterministic = false;
  nlohmann::json config;  // resolved configuration echo
  std::vector<CheckRecord> checks;
  std::map<std::string, Table> tables;

  bool all_pass() const;
  void add_pass_fail(const std::string& name, bool pass,
                     std::map<std::string, double> metrics = {}, const std::string& note = "");
  void add_diagnostic(const std::string& name, std::map<std::string, double> metrics = {},
                      const std::string& note = "");
  nlohmann::json to_json(bool with_timestamp = true) const;
};

/// Writes report.json plus one .dat/.csv file per table; returns the file list.
std::vector<std::string> write_report(const RunReport& rep, const std::filesystem::path& dir);

/// Writes just the table files of an existing report (plot-data emission).
std::vector<std::string> emit_plot_data(const RunReport& rep, const std::filesystem::path& dir);

}  // namespace subq::report
