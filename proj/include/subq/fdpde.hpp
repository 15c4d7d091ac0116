#pragma once

#include "subq/bsde.hpp"
#include "subq/generator.hpp"
#include "subq/sde.hpp"
#include "subq/types.hpp"

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace subq::pde {

enum class BoundaryRule { Extrapolate, DirichletFromTerminalFlow };

// Terminal-value problem  u_t + 1/2 sigma^2 u_xx + b u_x + g(t, x, u, sigma u_x) = 0,
// u(T, .) = h, solved on a padded interval around the reporting window.
struct PdeProblem {
  sde::DiffusionSpec diffusion;  // one space dimension, one driving dimension
  gen::MarkovGenerator generator;
  std::function<double(const Vec&)> terminal;
  double horizon = 1.0;
  double x_lo = -5.0;
  double x_hi = 5.0;
  BoundaryRule boundary = BoundaryRule::Extrapolate;
  double pad_fraction = 0.3;
};

struct GridSolution {
  Vec times;   // ascending, 0 .. T
  Vec xs;      // padded node set
  Mat values;  // (n_t_used + 1) x nodes, row i at times(i)
  double dt = 0.0;
  double dx = 0.0;
  int n_t_used = 0;  // after the stability refinement
  bool cfl_refined = false;
  double report_lo = 0.0, report_hi = 0.0;

  double value(double t, double x) const;  // bilinear interpolation
};

// Explicit backward scheme with central differences; the parabolic stability
// bound dt <= dx^2 / (sigma_max^2 + dx |b|_max) is enforced by refining dt.
GridSolution fd_solve(const PdeProblem& pde, int n_t, int n_x);

struct McParams {
  int paths = 20000;
  int steps = 100;
  std::uint64_t seed = 1;
  bsde::RegressionBasis basis{};
  double picard_tol = 1e-10;
  int picard_max = 50;
  int threads = 1;
};

struct PointEstimate {
  double t = 0.0;
  double x = 0.0;
  double u_mc = 0.0;
  double std_error = 0.0;
};

// Solution values by independent seeded simulations started at each point.
// Point seeds derive from (seed, point index); points are independent, so a
// failure at one point does not disturb the others (it is rethrown with
// context after the loop).
std::vector<PointEstimate> u_from_bsde(const PdeProblem& pde,
                                       const std::vector<std::pair<double, double>>& points,
                                       const McParams& mc);

struct GrowthReport {
  double c_hat = 0.0;
  double c_low_band = 0.0;
  double c_high_band = 0.0;
  double band_ratio = 0.0;
  double fitted_exponent = 0.0;
  bool pass = false;  // finite and band ratio <= 2
};

/// Scans |u| / (1 + |x|^p) over the grid and compares the two |x| bands.
GrowthReport growth_check(const GridSolution& u, double p, bool fit, double band_split = 10.0,
                          double band_hi = 20.0);

struct LadderEntry {
  double m = 0.0;
  double l = 0.0;
  double max_abs = 0.0;
  double gap_to_direct = 0.0;  // max node gap inside the reporting window
};

struct LadderReport {
  std::vector<LadderEntry> entries;
  bool monotone_in_l = false;  // node-wise decreasing as l grows, fixed m
  bool monotone_in_m = false;  // node-wise increasing as m grows, at the largest l
  double final_gap_rel = 0.0;
  bool pass = false;
};

// Solves the regularized problems over the (m, l) ladder and checks the
// node-wise ordering plus closeness of the largest pair to the direct solve.
LadderReport lipschitz_pde_ladder(const PdeProblem& pde, const std::vector<double>& m_list,
                                  const std::vector<double>& l_list, int n_t, int n_x,
                                  const gen::InfConvParams& box = {});

}  // namespace subq::pde
