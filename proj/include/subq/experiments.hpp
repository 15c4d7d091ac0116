#pragma once

#include "subq/report.hpp"
#include "subq/types.hpp"

#include "json.hpp"

#include <optional>
#include <string>

namespace subq::cli {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::optional<int> steps;
  std::optional<int> threads;
  std::optional<bool> deterministic;
  std::optional<std::string> output_dir;
};

/// Strict parse: unknown keys anywhere raise ConfigError with the key path.
nlohmann::json load_config_file(const std::string& path);

/// Executes one experiment described by the (already loaded) config.
report::RunReport run_from_json(nlohmann::json config, const Overrides& ov = {});

report::RunReport run_selftest();

// Full CLI semantics: run + write artifacts; returns the process exit code
// (0 all gated checks pass, 1 a check failed, 2 usage/config error).
int run_experiment(const std::string& config_path, const Overrides& ov);

}  // namespace subq::cli
