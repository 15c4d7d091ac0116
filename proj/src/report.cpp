#include "subq/report.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

namespace subq::report {

bool RunReport::all_pass() const {
  for (const auto& c : checks)
    if (c.status == "fail") return false;
  return true;
}

void RunReport::add_pass_fail(const std::string& name, bool pass,
                              std::map<std::string, double> metrics, const std::string& note) {
  checks.push_back({name, pass ? "pass" : "fail", std::move(metrics), note, 0.0});
}

void RunReport::add_diagnostic(const std::string& name, std::map<std::string, double> metrics,
                               const std::string& note) {
  checks.push_back({name, "diagnostic", std::move(metrics), note, 0.0});
}

nlohmann::json RunReport::to_json(bool with_timestamp) const {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  j["experiment"] = experiment;
  j["seed"] = seed;
  j["deterministic"] = deterministic;
  j["config"] = config;
  if (with_timestamp) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&tt, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    j["timestamp"] = buf;
  }
  nlohmann::json jchecks = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json jc;
    jc["name"] = c.name;
    jc["status"] = c.status;
    jc["metrics"] = c.metrics;
    if (!c.note.empty()) jc["note"] = c.note;
    if (!deterministic) jc["runtime_sec"] = c.runtime_sec;
    jchecks.push_back(jc);
  }
  j["checks"] = jchecks;
  nlohmann::json jt;
  for (const auto& [name, tab] : tables) {
    nlohmann::json t;
    t["columns"] = tab.columns;
    t["rows"] = tab.rows;
    jt[name] = t;
  }
  j["tables"] = jt;
  j["all_pass"] = all_pass();
  return j;
}

namespace {

void write_table_file(const Table& tab, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  const char sep = tab.csv ? ',' : ' ';
  out << (tab.csv ? "" : "# ");
  for (std::size_t c = 0; c < tab.columns.size(); ++c)
    out << tab.columns[c] << (c + 1 < tab.columns.size() ? std::string(1, sep) : "\n");
  char buf[40];
  for (const auto& row : tab.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
      out << buf << (c + 1 < row.size() ? std::string(1, sep) : "\n");
    }
  }
}

}  // namespace

std::vector<std::string> emit_plot_data(const RunReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  for (const auto& [name, tab] : rep.tables) {
    const auto file = dir / (name + (tab.csv ? ".csv" : ".dat"));
    write_table_file(tab, file);
    files.push_back(file.string());
  }
  return files;
}

std::vector<std::string> write_report(const RunReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto files = emit_plot_data(rep, dir);
  const auto jpath = dir / "report.json";
  std::ofstream out(jpath);
  if (!out) throw std::runtime_error("cannot open " + jpath.string());
  out << rep.to_json().dump(2) << "\n";
  files.push_back(jpath.string());
  return files;
}

}  // namespace subq::report
