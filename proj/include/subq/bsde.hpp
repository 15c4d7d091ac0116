#pragma once

#include "subq/envelope.hpp"
#include "subq/generator.hpp"
#include "subq/regression.hpp"
#include "subq/sde.hpp"
#include "subq/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace subq::bsde {

struct MarkovBsdeProblem {
  sde::DiffusionSpec diffusion;
  std::function<double(const Vec&)> terminal;
  gen::MarkovGenerator generator;
  double t0 = 0.0;
  double horizon = 1.0;  // T - t0
  Vec x0;
};

struct BackwardSolution {
  Vec time_grid;               // N+1
  Mat y_reg;                   // (N+1) x paths, regression-based per-time estimates
  Mat y_roll;                  // (N+1) x paths, pathwise rollback accumulations
  std::vector<Mat> z;          // N entries of (d x paths)
  double y0 = 0.0;             // mean of the rollback at t0
  double y0_std_error = 0.0;
  std::vector<int> picard_iters;  // per step, index i = step from t_i to t_{i+1}
  SolveDiagnostics diag;

  gen::FrozenPaths frozen() const { return {time_grid, y_reg, z}; }
};

// One-step backward scheme: Z from the regression of Y_{i+1} dW / dt on the
// basis, then the implicit equation Y_i = E[Y_{i+1}|X_i] + dt g(t_i, X_i, Y_i, Z_i)
// solved pathwise by Picard iteration (Z frozen within the step).  The
// rollback column accumulates raw next-step values plus dt * g along the
// regressed arguments; its mean at t0 is the y0 estimate.
BackwardSolution solve_backward(const MarkovBsdeProblem& problem, const sde::PathBatch& batch,
                                const RegressionBasis& basis, double picard_tol = 1e-10,
                                int picard_max = 50);

struct TruncationLadder {
  std::vector<double> n_levels;
  std::vector<double> p_levels;
  Mat y0;             // n_levels x p_levels
  Mat y0_std_error;
  double y0_untruncated = 0.0;
  double y0_untruncated_se = 0.0;
};

/// Solves the capped problems for every (n, p) pair on one common path batch.
TruncationLadder solve_truncated_sequence(const MarkovBsdeProblem& problem,
                                          const sde::PathBatch& batch,
                                          const RegressionBasis& basis,
                                          const std::vector<double>& n_levels,
                                          const std::vector<double>& p_levels,
                                          double picard_tol = 1e-10, int picard_max = 50);

struct ClassDRow {
  double t = 0.0;
  double lhs = 0.0;
  double lhs_se = 0.0;
  double rhs = 0.0;
  double rhs_se = 0.0;
  double ratio = 0.0;
  double ratio_se = 0.0;
};

struct ClassDReport {
  std::vector<ClassDRow> rows;
  double worst_ratio = 0.0;
  double worst_ratio_se = 0.0;
  std::size_t saturated = 0;
  double saturated_share = 0.0;
  bool pass = false;  // worst ratio <= 1 + 3 se at every grid time
};

// Compares the psi-moment of |Y_t| plus the weighted Z energy against the
// a-priori right side, time by time.  One-sided three-sigma gate.
ClassDReport class_d_diagnostic(const BackwardSolution& solution,
                                const envelope::EnvelopeCurve& curve,
                                const envelope::AprioriBound& bound, const Vec& xi_plus_g0);

struct ComparisonRow {
  double t = 0.0;
  double q99 = 0.0;        // 99th percentile of (Y_t - Y'_t)
  double mean_gap = 0.0;   // mean of (Y_t - Y'_t)
  double pooled_se = 0.0;
  bool pass = false;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  bool precondition_ok = false;
  std::string precondition_note;
  double worst_excess = 0.0;  // max over t of q99 - 3 se
  bool pass = false;
};

// Paired-batch ordering experiment.  Preconditions (terminal ordering along
// the batch, generator ordering on a probe grid, a convexity-type certificate
// for one side) are checked first; violations throw PreconditionError.
ComparisonReport comparison_experiment(const MarkovBsdeProblem& problem,
                                       const MarkovBsdeProblem& problem_prime,
                                       const sde::PathBatch& batch, const RegressionBasis& basis);

struct StabilitySchedule {
  std::vector<double> deltas;
  std::function<double(const Vec&)> terminal_perturb;  // w(x); null means none
  gen::GenFn generator_perturb;                        // v(t,x,y,z); null means none
};

struct StabilityRow {
  double delta = 0.0;
  double s_sup = 0.0;   // mean over paths of sup_t |Y^n_t - Y_t|
  double s_se = 0.0;
  double d_z = 0.0;     // mean over paths of the L2 Z distance
  double d_se = 0.0;
};

struct StabilityReport {
  std::vector<StabilityRow> rows;
  bool nonincreasing = false;  // within two pooled standard errors
  double last_over_first = 0.0;
  bool pass = false;           // nonincreasing and S_last < S_first / 4
};

StabilityReport stability_experiment(const MarkovBsdeProblem& problem,
                                     const StabilitySchedule& schedule,
                                     const sde::PathBatch& batch, const RegressionBasis& basis);

struct ThetaGapRow {
  double theta = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double q99 = 0.0;
  double max = 0.0;
  double psi_bound = 0.0;  // bound implied by the unit-epsilon moment estimate
};

struct ThetaGapReport {
  std::vector<ThetaGapRow> rows;  // diagnostic data, no pass/fail gate
};

ThetaGapReport theta_gap_experiment(const MarkovBsdeProblem& problem,
                                    const MarkovBsdeProblem& problem_prime,
                                    const std::vector<double>& theta_list,
                                    const sde::PathBatch& batch, const RegressionBasis& basis);

double empirical_quantile(Vec values, double q);

}  // namespace subq::bsde
