#pragma once

#include "subq/generator.hpp"
#include "subq/types.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace subq::sde {

struct DiffusionSpec {
  std::string name = "custom";
  std::function<Vec(double, const Vec&)> drift;       // b(t, x) -> R^n
  std::function<Mat(double, const Vec&)> diffusion;   // sigma(t, x) -> n x d
  double lipschitz_K = 1.0;
  int dim_x = 1;
  int dim_w = 1;
  bool a1_expected = true;  // whether the sampled boundedness/Lipschitz check should pass
};

struct PathBatch {
  Vec time_grid;                    // N+1 ascending points, t0 .. T
  std::vector<Mat> states;          // N+1 entries, each dim_x x paths
  std::vector<Mat> increments;      // N entries, each dim_w x paths
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  int n_steps() const { return static_cast<int>(increments.size()); }
  int n_paths() const { return states.empty() ? 0 : static_cast<int>(states.front().cols()); }
  int dim_x() const { return states.empty() ? 0 : static_cast<int>(states.front().rows()); }
  int dim_w() const { return increments.empty() ? 0 : static_cast<int>(increments.front().rows()); }
  double dt(int i) const { return time_grid(i + 1) - time_grid(i); }
};

// Euler-Maruyama on a uniform grid.  Each path owns a counter-based random
// stream keyed by (seed, stream_id, path index), so enlarging n_paths leaves
// existing trajectories untouched and parallel/serial runs agree bit-exactly.
PathBatch simulate(const DiffusionSpec& spec, double t0, const Vec& x0, double horizon_end,
                   int n_steps, int n_paths, std::uint64_t seed, std::uint64_t stream_id = 0);

struct ExpMomentDiagnostic {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t saturated = 0;
};

// Empirical mean over paths of sup over grid times of exp(lambda |X_s|^q).
ExpMomentDiagnostic exp_moment_diagnostic(const PathBatch& batch, double q, double lambda,
                                          double cap = kDefaultExpCap);

/// Sampled boundedness + Lipschitz check of the diffusion coefficients.
gen::AssumptionReport check_A1(const DiffusionSpec& spec, double t_max = 1.0,
                               double x_radius = 5.0, int n_samples = 64);

// Flat binary persistence with a JSON header (grid, dims, seed) for replay.
void save_path_batch(const PathBatch& batch, const std::string& path);
PathBatch load_path_batch(const std::string& path);

/// Four standard normals from the counter-based stream (exposed for tests).
std::array<double, 4> normal_block(std::uint64_t seed, std::uint64_t stream, std::uint64_t path,
                                   std::uint32_t block);

DiffusionSpec make_diffusion(const std::string& name,
                             const std::map<std::string, double>& params = {}, int dim = 1);
std::vector<std::string> diffusion_names();

}  // namespace subq::sde
