#include "subq/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace subq::bsde {

namespace {

double sample_sd(const Vec& v) {
  if (v.size() < 2) return 0.0;
  // deviations against the first sample: identical inputs give exactly zero
  const Eigen::ArrayXd shifted = v.array() - v(0);
  const double mean = shifted.mean();
  return std::sqrt((shifted - mean).square().sum() / (v.size() - 1));
}

double std_error(const Vec& v) { return sample_sd(v) / std::sqrt(static_cast<double>(v.size())); }

}  // namespace

double empirical_quantile(Vec values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * (values.size() - 1);
  const auto lo = static_cast<std::ptrdiff_t>(pos);
  const auto hi = std::min<std::ptrdiff_t>(lo + 1, values.size() - 1);
  const double w = pos - lo;
  return (1.0 - w) * values(lo) + w * values(hi);
}

BackwardSolution solve_backward(const MarkovBsdeProblem& problem, const sde::PathBatch& batch,
                                const RegressionBasis& basis, double picard_tol, int picard_max) {
  const int N = batch.n_steps();
  const int P = batch.n_paths();
  const int n = batch.dim_x();
  const int d = batch.dim_w();
  const double t_end = problem.t0 + problem.horizon;
  if (std::abs(batch.time_grid(N) - t_end) > 1e-9 * (1.0 + std::abs(t_end)) ||
      std::abs(batch.time_grid(0) - problem.t0) > 1e-9 * (1.0 + std::abs(problem.t0)))
    throw std::invalid_argument("solve_backward: batch grid does not span [t0, t0 + horizon]");

  BackwardSolution sol;
  sol.time_grid = batch.time_grid;
  sol.y_reg.resize(N + 1, P);
  sol.y_roll.resize(N + 1, P);
  sol.z.assign(static_cast<std::size_t>(N), Mat(d, P));
  sol.picard_iters.assign(static_cast<std::size_t>(N), 0);

  Vec y_next(P), roll(P);
  for (int j = 0; j < P; ++j) y_next(j) = problem.terminal(batch.states.back().col(j));
  roll = y_next;
  sol.y_reg.row(N) = y_next.transpose();
  sol.y_roll.row(N) = roll.transpose();

  Vec xj(n), zj(d), y(P), g_vals(P), target(P);
  for (int i = N - 1; i >= 0; --i) {
    const double t = batch.time_grid(i);
    const double dt = batch.dt(i);
    const Mat& xi = batch.states[static_cast<std::size_t>(i)];
    const Mat& dwi = batch.increments[static_cast<std::size_t>(i)];
    FittedBasis fb(xi, basis, &sol.diag);

    const Vec y_cond = fb.fit_predict(y_next);
    Mat& zi = sol.z[static_cast<std::size_t>(i)];
    for (int c = 0; c < d; ++c) {
      for (int j = 0; j < P; ++j) target(j) = y_next(j) * dwi(c, j) / dt;
      zi.row(c) = fb.fit_predict(target).transpose();
    }

    y = y_cond;
    double max_diff = std::numeric_limits<double>::infinity();
    double first_diff = 0.0;
    int iters = 0;
    while (iters < picard_max) {
      ++iters;
      max_diff = 0.0;
      for (int j = 0; j < P; ++j) {
        xj = xi.col(j);
        zj = zi.col(j);
        const double y_new = y_cond(j) + dt * problem.generator(t, xj, y(j), zj);
        max_diff = std::max(max_diff, std::abs(y_new - y(j)));
        y(j) = y_new;
      }
      if (iters == 1) first_diff = max_diff;
      if (max_diff < picard_tol) break;
    }
    if (max_diff >= picard_tol) {
      std::ostringstream os;
      os << "solve_backward: Picard iteration did not reach " << picard_tol << " at step " << i
         << " (t=" << t << ", last update " << max_diff << ", first " << first_diff
         << "); the one-step map contracts with factor ~ dt * dg/dy, so reduce the time step";
      throw PicardDivergenceError(os.str());
    }
    sol.picard_iters[static_cast<std::size_t>(i)] = iters;

    for (int j = 0; j < P; ++j) {
      xj = xi.col(j);
      zj = zi.col(j);
      g_vals(j) = problem.generator(t, xj, y(j), zj);
    }
    roll += dt * g_vals;
    sol.y_reg.row(i) = y.transpose();
    sol.y_roll.row(i) = roll.transpose();
    y_next = y;
  }
  sol.y0 = roll.mean();
  sol.y0_std_error = std_error(roll);
  return sol;
}

TruncationLadder solve_truncated_sequence(const MarkovBsdeProblem& problem,
                                          const sde::PathBatch& batch,
                                          const RegressionBasis& basis,
                                          const std::vector<double>& n_levels,
                                          const std::vector<double>& p_levels, double picard_tol,
                                          int picard_max) {
  if (!std::is_sorted(n_levels.begin(), n_levels.end()) ||
      !std::is_sorted(p_levels.begin(), p_levels.end()))
    throw std::invalid_argument("solve_truncated_sequence: levels must be increasing");
  TruncationLadder out;
  out.n_levels = n_levels;
  out.p_levels = p_levels;
  out.y0.resize(static_cast<int>(n_levels.size()), static_cast<int>(p_levels.size()));
  out.y0_std_error.resize(out.y0.rows(), out.y0.cols());

  for (std::size_t a = 0; a < n_levels.size(); ++a) {
    for (std::size_t b = 0; b < p_levels.size(); ++b) {
      MarkovBsdeProblem capped = problem;
      capped.generator = gen::truncate(problem.generator, n_levels[a], p_levels[b]).as_markov();
      const auto h = problem.terminal;
      const double cn = n_levels[a], cp = p_levels[b];
      capped.terminal = [h, cn, cp](const Vec& x) { return gen::truncate_scalar(h(x), cn, cp); };
      const auto sol = solve_backward(capped, batch, basis, picard_tol, picard_max);
      out.y0(static_cast<int>(a), static_cast<int>(b)) = sol.y0;
      out.y0_std_error(static_cast<int>(a), static_cast<int>(b)) = sol.y0_std_error;
    }
  }
  const auto direct = solve_backward(problem, batch, basis, picard_tol, picard_max);
  out.y0_untruncated = direct.y0;
  out.y0_untruncated_se = direct.y0_std_error;
  return out;
}

ClassDReport class_d_diagnostic(const BackwardSolution& solution,
                                const envelope::EnvelopeCurve& curve,
                                const envelope::AprioriBound& bound, const Vec& xi_plus_g0) {
  const int N = static_cast<int>(solution.z.size());
  const int P = static_cast<int>(solution.y_reg.cols());
  const auto& params = curve.params();

  const auto rhs = envelope::apriori_rhs(bound, xi_plus_g0);

  // suffix sums of |Z|^2 dt per path
  Mat tail = Mat::Zero(N + 1, P);
  for (int i = N - 1; i >= 0; --i) {
    const double dt = solution.time_grid(i + 1) - solution.time_grid(i);
    for (int j = 0; j < P; ++j)
      tail(i, j) = tail(i + 1, j) + dt * solution.z[static_cast<std::size_t>(i)].col(j).squaredNorm();
  }

  ClassDReport rep;
  std::size_t sat_total = 0;
  Vec w(P);
  for (int i = 0; i <= N; ++i) {
    const double t = solution.time_grid(i);
    const double mu_t = curve.mu(std::min(t - solution.time_grid(0), curve.horizon()));
    for (int j = 0; j < P; ++j) {
      const auto pv = envelope::psi(std::abs(solution.y_reg(i, j)), mu_t, params);
      sat_total += pv.saturated ? 1 : 0;
      w(j) = pv.value + 0.5 * bound.delta * tail(i, j);
    }
    ClassDRow row;
    row.t = t;
    row.lhs = w.mean();
    row.lhs_se = std_error(w);
    row.rhs = rhs.value;
    row.rhs_se = rhs.std_error;
    row.ratio = row.lhs / row.rhs;
    row.ratio_se = row.ratio * std::sqrt(std::pow(row.lhs_se / row.lhs, 2) +
                                         std::pow(row.rhs_se / std::max(row.rhs, 1e-300), 2));
    rep.rows.push_back(row);
  }
  rep.saturated = sat_total;
  rep.saturated_share =
      static_cast<double>(sat_total) / (static_cast<double>(P) * (N + 1));
  rep.pass = true;
  for (const auto& row : rep.rows) {
    if (row.ratio > rep.worst_ratio) {
      rep.worst_ratio = row.ratio;
      rep.worst_ratio_se = row.ratio_se;
    }
    if (row.ratio > 1.0 + 3.0 * row.ratio_se) rep.pass = false;
  }
  if (rep.saturated_share > 0.001) rep.pass = false;
  return rep;
}

namespace {

void check_comparison_preconditions(const MarkovBsdeProblem& a, const MarkovBsdeProblem& b,
                                    const sde::PathBatch& batch, std::string* note) {
  // terminal ordering along the simulated terminal states
  const Mat& xT = batch.states.back();
  for (int j = 0; j < batch.n_paths(); ++j) {
    const double ha = a.terminal(xT.col(j));
    const double hb = b.terminal(xT.col(j));
    if (ha > hb + 1e-12 * (1.0 + std::abs(hb))) {
      std::ostringstream os;
      os << "terminal ordering fails on path " << j << ": " << ha << " > " << hb;
      throw PreconditionError(os.str());
    }
  }
  // generator ordering on a probe grid
  const auto grid = gen::default_sample_grid(batch.dim_x(), batch.dim_w());
  for (double t : grid.ts)
    for (const Vec& x : grid.xs)
      for (double y : grid.ys)
        for (const Vec& z : grid.zs) {
          const double ga = a.generator(t, x, y, z);
          const double gb = b.generator(t, x, y, z);
          if (ga > gb + 1e-12 * (1.0 + std::abs(gb))) {
            std::ostringstream os;
            os << "generator ordering fails at t=" << t << " x=" << x(0) << " y=" << y
               << " z=" << z(0) << ": " << ga << " > " << gb;
            throw PreconditionError(os.str());
          }
        }
  // one side needs a convexity-type certificate
  const gen::MarkovGenerator* certified = nullptr;
  const char* side = nullptr;
  if (a.generator.flag_h2 || a.generator.flag_h2prime) {
    certified = &a.generator;
    side = "lower";
  } else if (b.generator.flag_h2 || b.generator.flag_h2prime) {
    certified = &b.generator;
    side = "upper";
  }
  if (certified == nullptr)
    throw PreconditionError("neither generator declares a convexity-type certificate");
  if (certified->flag_h2) {
    const auto rep = gen::check_H2(*certified, grid);
    if (!rep.pass()) throw PreconditionError("declared convexity fails the sampled check");
    *note = std::string(side) + " generator sampled as " + rep.note;
  } else {
    const auto rep = gen::check_H2_prime(*certified, gen::default_theta_tuples(batch.dim_x(),
                                                                               batch.dim_w()));
    if (!rep.pass())
      throw PreconditionError("declared theta-difference growth fails the sampled check");
    *note = std::string(side) + " generator passed the sampled theta-difference check";
  }
}

}  // namespace

ComparisonReport comparison_experiment(const MarkovBsdeProblem& problem,
                                       const MarkovBsdeProblem& problem_prime,
                                       const sde::PathBatch& batch, const RegressionBasis& basis) {
  ComparisonReport rep;
  check_comparison_preconditions(problem, problem_prime, batch, &rep.precondition_note);
  rep.precondition_ok = true;

  const auto sol = solve_backward(problem, batch, basis);
  const auto sol_p = solve_backward(problem_prime, batch, basis);
  const int N = batch.n_steps();
  const int P = batch.n_paths();
  rep.worst_excess = -std::numeric_limits<double>::infinity();
  rep.pass = true;
  Vec diff(P);
  for (int i = 0; i <= N; ++i) {
    for (int j = 0; j < P; ++j) diff(j) = sol.y_roll(i, j) - sol_p.y_roll(i, j);
    ComparisonRow row;
    row.t = batch.time_grid(i);
    row.mean_gap = diff.mean();
    row.pooled_se = std_error(diff);
    row.q99 = empirical_quantile(diff, 0.99);
    row.pass = row.q99 <= 3.0 * row.pooled_se + 1e-9;
    rep.worst_excess = std::max(rep.worst_excess, row.q99 - 3.0 * row.pooled_se);
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(row);
  }
  return rep;
}

StabilityReport stability_experiment(const MarkovBsdeProblem& problem,
                                     const StabilitySchedule& schedule,
                                     const sde::PathBatch& batch, const RegressionBasis& basis) {
  if (schedule.deltas.empty())
    throw std::invalid_argument("stability_experiment: empty schedule");
  const auto base = solve_backward(problem, batch, basis);
  const int N = batch.n_steps();
  const int P = batch.n_paths();

  StabilityReport rep;
  for (double delta : schedule.deltas) {
    MarkovBsdeProblem pert = problem;
    if (schedule.terminal_perturb) {
      const auto h = problem.terminal;
      const auto w = schedule.terminal_perturb;
      pert.terminal = [h, w, delta](const Vec& x) { return h(x) + delta * w(x); };
    }
    if (schedule.generator_perturb) {
      const auto g = problem.generator;
      const auto v = schedule.generator_perturb;
      pert.generator.eval = [g, v, delta](double t, const Vec& x, double y, const Vec& z) {
        return g(t, x, y, z) + delta * v(t, x, y, z);
      };
    }
    const auto sol = solve_backward(pert, batch, basis);

    Vec sup_diff(P), z_dist(P);
    for (int j = 0; j < P; ++j) {
      double sup = 0.0;
      for (int i = 0; i <= N; ++i)
        sup = std::max(sup, std::abs(sol.y_roll(i, j) - base.y_roll(i, j)));
      sup_diff(j) = sup;
      double acc = 0.0;
      for (int i = 0; i < N; ++i) {
        const double dt = batch.dt(i);
        acc += dt * (sol.z[static_cast<std::size_t>(i)].col(j) -
                     base.z[static_cast<std::size_t>(i)].col(j))
                        .squaredNorm();
      }
      z_dist(j) = std::sqrt(acc);
    }
    StabilityRow row;
    row.delta = delta;
    row.s_sup = sup_diff.mean();
    row.s_se = std_error(sup_diff);
    row.d_z = z_dist.mean();
    row.d_se = std_error(z_dist);
    rep.rows.push_back(row);
  }

  rep.nonincreasing = true;
  for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i) {
    const double slack = 2.0 * std::sqrt(rep.rows[i].s_se * rep.rows[i].s_se +
                                         rep.rows[i + 1].s_se * rep.rows[i + 1].s_se);
    if (rep.rows[i + 1].s_sup > rep.rows[i].s_sup + slack) rep.nonincreasing = false;
  }
  const double first = rep.rows.front().s_sup;
  const double last = rep.rows.back().s_sup;
  rep.last_over_first = first > 0.0 ? last / first : 0.0;
  rep.pass = rep.nonincreasing && (first == 0.0 ? last == 0.0 : last < first / 4.0);
  return rep;
}

ThetaGapReport theta_gap_experiment(const MarkovBsdeProblem& problem,
                                    const MarkovBsdeProblem& problem_prime,
                                    const std::vector<double>& theta_list,
                                    const sde::PathBatch& batch, const RegressionBasis& basis) {
  const auto sol = solve_backward(problem, batch, basis);
  const auto sol_p = solve_backward(problem_prime, batch, basis);
  const int N = batch.n_steps();
  const int P = batch.n_paths();

  // moment estimate with the unit-epsilon curve, used as the bound scale
  const envelope::SubQuadParams params = problem.generator.declared;
  const envelope::EnvelopeCurve unit_curve =
      envelope::EnvelopeCurve::make(params, 1.0, problem.horizon);
  const double big_c =
      std::exp(unit_curve.mu(problem.horizon) * std::pow(unit_curve.k_eps(), params.q()));

  Vec xi_term(P);
  Vec xj(batch.dim_x()), z0 = Vec::Zero(batch.dim_w());
  for (int j = 0; j < P; ++j) {
    double acc = std::max(problem.terminal(batch.states.back().col(j)), 0.0);
    for (int i = 0; i < N; ++i) {
      xj = batch.states[static_cast<std::size_t>(i)].col(j);
      acc += batch.dt(i) * std::abs(problem.generator(batch.time_grid(i), xj, 0.0, z0));
    }
    xi_term(j) = acc;
  }
  double psi_mean = 0.0;
  for (int j = 0; j < P; ++j)
    psi_mean += envelope::psi(xi_term(j), unit_curve.mu(problem.horizon), params).value;
  psi_mean /= P;
  const double log_bound = std::log(big_c) + std::log(psi_mean);
  const double psi_bound = std::pow(std::max(log_bound, 0.0), params.alpha_star() / 2.0);

  ThetaGapReport rep;
  Vec v(P);
  for (double theta : theta_list) {
    for (int j = 0; j < P; ++j)
      v(j) = std::max(sol.y_roll(0, j) - theta * sol_p.y_roll(0, j), 0.0) / (1.0 - theta);
    ThetaGapRow row;
    row.theta = theta;
    row.mean = v.mean();
    row.median = empirical_quantile(v, 0.5);
    row.q99 = empirical_quantile(v, 0.99);
    row.max = v.maxCoeff();
    row.psi_bound = psi_bound;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace subq::bsde
