#include "subq/experiments.hpp"

#include "subq/bsde.hpp"
#include "subq/envelope.hpp"
#include "subq/fdpde.hpp"
#include "subq/generator.hpp"
#include "subq/sde.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>

namespace subq::cli {

namespace {

using nlohmann::json;

// --- strict config access -------------------------------------------------

void expect_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

template <typename T>
T get_req(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing required key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::map<std::string, double> numeric_params(const json& j, const std::string& where) {
  std::map<std::string, double> out;
  for (const auto& [key, val] : j.items()) {
    if (key == "name") continue;
    if (!val.is_number()) throw ConfigError(where + "." + key + ": expected a number");
    out[key] = val.get<double>();
  }
  return out;
}

// --- problem building ------------------------------------------------------

struct McSettings {
  int paths = 20000;
  int steps = 100;
};

McSettings parse_mc(const json& j, const Overrides& ov) {
  expect_keys(j, {"paths", "steps"}, "mc");
  McSettings mc;
  mc.paths = get_or(j, "paths", 20000);
  mc.steps = get_or(j, "steps", 100);
  if (ov.paths) mc.paths = *ov.paths;
  if (ov.steps) mc.steps = *ov.steps;
  if (mc.paths < 1 || mc.steps < 1) throw ConfigError("mc: paths and steps must be positive");
  return mc;
}

bsde::RegressionBasis parse_basis(const json& j) {
  expect_keys(j, {"kind", "degree", "bins"}, "basis");
  bsde::RegressionBasis basis;
  const std::string kind = get_or<std::string>(j, "kind", "polynomial");
  if (kind == "polynomial")
    basis.kind = bsde::RegressionBasis::Kind::Polynomial;
  else if (kind == "bins")
    basis.kind = bsde::RegressionBasis::Kind::PiecewiseConstantBins;
  else
    throw ConfigError("basis.kind: expected 'polynomial' or 'bins'");
  basis.degree = get_or(j, "degree", 4);
  basis.n_bins = get_or(j, "bins", 32);
  return basis;
}

gen::MarkovGenerator parse_generator(const json& j) {
  const std::string name = get_req<std::string>(j, "name", "generator");
  try {
    return gen::make_generator(name, numeric_params(j, "generator"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::function<double(const Vec&)> parse_terminal(const json& j) {
  const std::string name = get_req<std::string>(j, "name", "terminal");
  try {
    return gen::make_terminal(name, numeric_params(j, "terminal"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

sde::DiffusionSpec parse_diffusion(const json& j, int dim) {
  const std::string name = get_req<std::string>(j, "name", "diffusion");
  try {
    return sde::make_diffusion(name, numeric_params(j, "diffusion"), dim);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

bsde::MarkovBsdeProblem parse_problem(const json& j) {
  expect_keys(j, {"dim", "t0", "horizon", "x0", "diffusion", "generator", "terminal"}, "problem");
  bsde::MarkovBsdeProblem prob;
  const int dim = get_or(j, "dim", 1);
  prob.t0 = get_or(j, "t0", 0.0);
  prob.horizon = get_or(j, "horizon", 1.0);
  prob.x0 = Vec::Zero(dim);
  if (j.contains("x0")) {
    if (j.at("x0").is_number()) {
      prob.x0.setConstant(j.at("x0").get<double>());
    } else {
      const auto v = j.at("x0").get<std::vector<double>>();
      if (static_cast<int>(v.size()) != dim) throw ConfigError("problem.x0: wrong length");
      for (int i = 0; i < dim; ++i) prob.x0(i) = v[static_cast<std::size_t>(i)];
    }
  }
  prob.diffusion = parse_diffusion(j.at("diffusion"), dim);
  prob.generator = parse_generator(j.at("generator"));
  prob.terminal = parse_terminal(j.at("terminal"));
  if (!(prob.horizon > 0.0)) throw ConfigError("problem.horizon must be positive");
  return prob;
}

pde::PdeProblem parse_pde(const json& j) {
  expect_keys(j, {"x_lo", "x_hi", "horizon", "boundary", "pad_fraction", "diffusion", "generator",
                  "terminal"},
              "pde");
  pde::PdeProblem p;
  p.x_lo = get_or(j, "x_lo", -5.0);
  p.x_hi = get_or(j, "x_hi", 5.0);
  p.horizon = get_or(j, "horizon", 1.0);
  p.pad_fraction = get_or(j, "pad_fraction", 0.3);
  const std::string bd = get_or<std::string>(j, "boundary", "extrapolate");
  if (bd == "extrapolate")
    p.boundary = pde::BoundaryRule::Extrapolate;
  else if (bd == "terminal_flow")
    p.boundary = pde::BoundaryRule::DirichletFromTerminalFlow;
  else
    throw ConfigError("pde.boundary: expected 'extrapolate' or 'terminal_flow'");
  p.diffusion = parse_diffusion(j.at("diffusion"), 1);
  p.generator = parse_generator(j.at("generator"));
  p.terminal = parse_terminal(j.at("terminal"));
  if (!(p.x_hi > p.x_lo)) throw ConfigError("pde: x_hi must exceed x_lo");
  return p;
}

envelope::SubQuadParams parse_subquad(const json& j, const std::string& where) {
  envelope::SubQuadParams p;
  p.alpha = get_req<double>(j, "alpha", where);
  p.beta = get_or(j, "beta", 0.0);
  p.gamma = get_or(j, "gamma", 1.0);
  try {
    p.validate();
  } catch (const std::domain_error& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return p;
}

report::Table solution_profile(const bsde::BackwardSolution& sol) {
  report::Table tab;
  tab.csv = true;
  tab.columns = {"t", "mean_y", "stderr_y", "mean_abs_z"};
  const int N = static_cast<int>(sol.z.size());
  const int P = static_cast<int>(sol.y_reg.cols());
  for (int i = 0; i <= N; ++i) {
    const double mean_y = sol.y_reg.row(i).mean();
    double var = 0.0;
    for (int j = 0; j < P; ++j) var += std::pow(sol.y_reg(i, j) - mean_y, 2);
    const double se = P > 1 ? std::sqrt(var / (P - 1) / P) : 0.0;
    double mean_z = 0.0;
    if (i < N) {
      for (int j = 0; j < P; ++j) mean_z += sol.z[static_cast<std::size_t>(i)].col(j).norm();
      mean_z /= P;
    }
    tab.rows.push_back({sol.time_grid(i), mean_y, se, mean_z});
  }
  return tab;
}

// --- experiment runners ----------------------------------------------------

void run_envelope_certify(const json& params, report::RunReport& rep) {
  expect_keys(params, {"alpha", "beta", "gamma", "eps", "horizon", "grid", "curve_samples"},
              "params");
  const auto p = parse_subquad(params, "params");
  const double eps = get_req<double>(params, "eps", "params");
  const double horizon = get_or(params, "horizon", 1.0);
  envelope::GridSpec grid;
  if (params.contains("grid")) {
    const auto& g = params.at("grid");
    expect_keys(g, {"s_count", "x_count", "z_count", "x_hi", "z_hi"}, "params.grid");
    grid.s_count = get_or(g, "s_count", grid.s_count);
    grid.x_count = get_or(g, "x_count", grid.x_count);
    grid.z_count = get_or(g, "z_count", grid.z_count);
    grid.x_hi = get_or(g, "x_hi", grid.x_hi);
    grid.z_hi = get_or(g, "z_hi", grid.z_hi);
  }

  const auto curve = envelope::EnvelopeCurve::make(p, eps, horizon);
  const double delta = envelope::certify_delta(curve);
  rep.add_pass_fail("delta_positive", delta > 0.0, {{"delta", delta}});

  const auto check = envelope::verify_envelope_inequality(curve, delta, grid);
  rep.add_pass_fail("envelope_inequality", check.pass(),
                    {{"min_residual", check.min_residual},
                     {"nodes", static_cast<double>(check.nodes)},
                     {"argmin_s", check.argmin.s},
                     {"argmin_x", check.argmin.x},
                     {"argmin_z", check.argmin.z}},
                    "residual is the left side divided by phi");

  // curve consistency: centered differences of mu against the defining slope field
  double worst_resid = 0.0;
  const double h = 1e-5 * horizon;
  const double c_coef =
      std::exp(envelope::log_c_tilde(p.alpha, p.gamma)) * (2.0 - p.alpha) / p.alpha;
  for (int i = 1; i <= 100; ++i) {
    const double s = horizon * i / 101.0;
    const double fd = (curve.mu(s + h) - curve.mu(s - h)) / (2.0 * h);
    const double mu = curve.mu(s);
    const double rhs = 2.0 * (p.alpha - 1.0) * p.beta * mu / p.alpha +
                       c_coef * (1.0 + eps) * std::pow(mu, -2.0 * (p.alpha - 1.0) / (2.0 - p.alpha));
    worst_resid = std::max(worst_resid, std::abs(fd - rhs) / std::max(1.0, std::abs(rhs)));
  }
  rep.add_pass_fail("ode_residual", worst_resid <= 1e-7, {{"max_residual", worst_resid}});

  // sandwich of psi under/over phi on a coarse grid
  const envelope::TestFunction tf(curve);
  const double kq = std::pow(curve.k_eps(), p.q());
  bool sandwich_ok = true;
  for (int is = 0; is < 20 && sandwich_ok; ++is) {
    const double s = horizon * is / 19.0;
    for (int ix = 0; ix < 20; ++ix) {
      const double x = 10.0 * ix / 19.0;
      const double phi = tf.eval(s, x).phi;
      const double lo = envelope::psi(x, curve.mu(s), p).value;
      const double hi = std::exp(curve.mu(s) * kq) * lo;
      if (phi < lo * (1.0 - 1e-12) || phi > hi * (1.0 + 1e-12)) {
        sandwich_ok = false;
        break;
      }
    }
  }
  rep.add_pass_fail("psi_phi_sandwich", sandwich_ok);

  const int samples = get_or(params, "curve_samples", 201);
  report::Table tab;
  tab.columns = {"s", "mu", "mu_prime"};
  for (int i = 0; i < samples; ++i) {
    const double s = horizon * i / (samples - 1);
    tab.rows.push_back({s, curve.mu(s), curve.mu_prime(s)});
  }
  rep.tables["mu_curve"] = tab;
}

void run_solve_bsde(const json& params, const Overrides& ov, std::uint64_t seed,
                    report::RunReport& rep) {
  expect_keys(params, {"problem", "mc", "basis", "picard"}, "params");
  const auto prob = parse_problem(params.at("problem"));
  const auto mc = parse_mc(params.value("mc", json::object()), ov);
  const auto basis = parse_basis(params.value("basis", json::object()));
  double picard_tol = 1e-10;
  int picard_max = 50;
  if (params.contains("picard")) {
    expect_keys(params.at("picard"), {"tol", "max"}, "params.picard");
    picard_tol = get_or(params.at("picard"), "tol", picard_tol);
    picard_max = get_or(params.at("picard"), "max", picard_max);
  }

  const auto batch = sde::simulate(prob.diffusion, prob.t0, prob.x0, prob.t0 + prob.horizon,
                                   mc.steps, mc.paths, seed);
  const auto sol = bsde::solve_backward(prob, batch, basis, picard_tol, picard_max);

  double term_gap = 0.0;
  for (int j = 0; j < batch.n_paths(); ++j)
    term_gap = std::max(term_gap, std::abs(sol.y_reg(mc.steps, j) -
                                           prob.terminal(batch.states.back().col(j))));
  rep.add_pass_fail("terminal_consistency", term_gap == 0.0, {{"max_gap", term_gap}});
  if (prob.generator.growth) {
    const auto a2 = gen::check_A2(prob.generator, prob.terminal,
                                  gen::default_sample_grid(batch.dim_x(), batch.dim_w()));
    rep.add_diagnostic("a2_growth_consistency",
                       {{"pass", a2.pass() ? 1.0 : 0.0},
                        {"margin", a2.margin},
                        {"violations", static_cast<double>(a2.violations.size())}},
                       "declared growth of driver and terminal on the sampled grid");
  }
  rep.add_diagnostic("solution",
                     {{"y0", sol.y0},
                      {"y0_stderr", sol.y0_std_error},
                      {"max_picard_iters",
                       static_cast<double>(*std::max_element(sol.picard_iters.begin(),
                                                             sol.picard_iters.end()))},
                      {"rank_fallbacks", static_cast<double>(sol.diag.rank_fallbacks)}});
  rep.tables["y_profile"] = solution_profile(sol);
}

void run_truncation_ladder(const json& params, const Overrides& ov, std::uint64_t seed,
                           report::RunReport& rep) {
  expect_keys(params, {"problem", "mc", "basis", "n_levels", "p_levels"}, "params");
  const auto prob = parse_problem(params.at("problem"));
  const auto mc = parse_mc(params.value("mc", json::object()), ov);
  const auto basis = parse_basis(params.value("basis", json::object()));
  const std::vector<double> def_levels = {1, 2, 4, 8, 16, 32};
  const auto n_levels = get_or(params, "n_levels", def_levels);
  const auto p_levels = get_or(params, "p_levels", def_levels);

  const auto batch = sde::simulate(prob.diffusion, prob.t0, prob.x0, prob.t0 + prob.horizon,
                                   mc.steps, mc.paths, seed);
  const auto lad = bsde::solve_truncated_sequence(prob, batch, basis, n_levels, p_levels);

  bool mono_n = true, mono_p = true;
  for (int b = 0; b < lad.y0.cols(); ++b)
    for (int a = 0; a + 1 < lad.y0.rows(); ++a) {
      const double slack = 2.0 * std::hypot(lad.y0_std_error(a, b), lad.y0_std_error(a + 1, b));
      if (lad.y0(a + 1, b) < lad.y0(a, b) - slack) mono_n = false;
    }
  for (int a = 0; a < lad.y0.rows(); ++a)
    for (int b = 0; b + 1 < lad.y0.cols(); ++b) {
      const double slack = 2.0 * std::hypot(lad.y0_std_error(a, b), lad.y0_std_error(a, b + 1));
      if (lad.y0(a, b + 1) > lad.y0(a, b) + slack) mono_p = false;
    }
  const double corner = lad.y0(lad.y0.rows() - 1, lad.y0.cols() - 1);
  const double corner_se = lad.y0_std_error(lad.y0.rows() - 1, lad.y0.cols() - 1);
  const double gap = std::abs(corner - lad.y0_untruncated);
  const double gap_slack = 2.0 * std::hypot(corner_se, lad.y0_untruncated_se);

  rep.add_pass_fail("monotone_in_n", mono_n);
  rep.add_pass_fail("monotone_in_p", mono_p);
  rep.add_pass_fail("matches_untruncated", gap <= gap_slack + 1e-12,
                    {{"gap", gap}, {"slack", gap_slack}, {"y0_untruncated", lad.y0_untruncated}});

  report::Table tab;
  tab.columns = {"n", "p", "y0", "stderr"};
  for (int a = 0; a < lad.y0.rows(); ++a)
    for (int b = 0; b < lad.y0.cols(); ++b)
      tab.rows.push_back({lad.n_levels[static_cast<std::size_t>(a)],
                          lad.p_levels[static_cast<std::size_t>(b)], lad.y0(a, b),
                          lad.y0_std_error(a, b)});
  rep.tables["truncation_y0"] = tab;
}

void run_comparison(const json& params, const Overrides& ov, std::uint64_t seed,
                    report::RunReport& rep) {
  expect_keys(params, {"problem", "problem_prime", "mc", "basis"}, "params");
  const auto prob = parse_problem(params.at("problem"));
  bsde::MarkovBsdeProblem prob_p = prob;
  const auto& jp = params.at("problem_prime");
  expect_keys(jp, {"generator", "terminal"}, "params.problem_prime");
  if (jp.contains("generator")) prob_p.generator = parse_generator(jp.at("generator"));
  if (jp.contains("terminal")) prob_p.terminal = parse_terminal(jp.at("terminal"));
  const auto mc = parse_mc(params.value("mc", json::object()), ov);
  const auto basis = parse_basis(params.value("basis", json::object()));

  const auto batch = sde::simulate(prob.diffusion, prob.t0, prob.x0, prob.t0 + prob.horizon,
                                   mc.steps, mc.paths, seed);
  const auto cmp = bsde::comparison_experiment(prob, prob_p, batch, basis);

  rep.add_pass_fail("ordering", cmp.pass,
                    {{"worst_excess", cmp.worst_excess},
                     {"mean_gap_t0", cmp.rows.front().mean_gap}},
                    cmp.precondition_note);
  report::Table tab;
  tab.csv = true;
  tab.columns = {"t", "q99", "mean_gap", "pooled_se"};
  for (const auto& row : cmp.rows) tab.rows.push_back({row.t, row.q99, row.mean_gap, row.pooled_se});
  rep.tables["comparison"] = tab;
}

void run_stability(const json& params, const Overrides& ov, std::uint64_t seed,
                   report::RunReport& rep) {
  expect_keys(params, {"problem", "mc", "basis", "schedule"}, "params");
  const auto prob = parse_problem(params.at("problem"));
  const auto mc = parse_mc(params.value("mc", json::object()), ov);
  const auto basis = parse_basis(params.value("basis", json::object()));

  bsde::StabilitySchedule sched;
  int n_max = 6;
  std::string term_name = "one";
  std::string gen_name = "none";
  if (params.contains("schedule")) {
    const auto& js = params.at("schedule");
    expect_keys(js, {"n", "terminal_perturb", "generator_perturb"}, "params.schedule");
    n_max = get_or(js, "n", 6);
    term_name = get_or<std::string>(js, "terminal_perturb", term_name);
    gen_name = get_or<std::string>(js, "generator_perturb", gen_name);
  }
  for (int n = 1; n <= n_max; ++n) sched.deltas.push_back(std::pow(2.0, -n));
  if (term_name == "one")
    sched.terminal_perturb = [](const Vec&) { return 1.0; };
  else if (term_name == "cos")
    sched.terminal_perturb = [](const Vec& x) { return std::cos(x(0)); };
  else if (term_name != "none")
    throw ConfigError("schedule.terminal_perturb: expected one|cos|none");
  if (gen_name == "one")
    sched.generator_perturb = [](double, const Vec&, double, const Vec&) { return 1.0; };
  else if (gen_name != "none")
    throw ConfigError("schedule.generator_perturb: expected one|none");

  const auto batch = sde::simulate(prob.diffusion, prob.t0, prob.x0, prob.t0 + prob.horizon,
                                   mc.steps, mc.paths, seed);
  const auto st = bsde::stability_experiment(prob, sched, batch, basis);

  rep.add_pass_fail("sup_distance_decay", st.pass,
                    {{"last_over_first", st.last_over_first},
                     {"s_first", st.rows.front().s_sup},
                     {"s_last", st.rows.back().s_sup}});
  report::Table tab;
  tab.columns = {"n", "delta", "s_sup", "s_se", "d_z", "d_se"};
  for (std::size_t i = 0; i < st.rows.size(); ++i)
    tab.rows.push_back({static_cast<double>(i + 1), st.rows[i].delta, st.rows[i].s_sup,
                        st.rows[i].s_se, st.rows[i].d_z, st.rows[i].d_se});
  rep.tables["stability"] = tab;
}

void run_feynman_kac(const json& params, const Overrides& ov, std::uint64_t seed, int threads,
                     report::RunReport& rep) {
  expect_keys(params, {"pde", "fd", "mc", "points", "rel_tolerance"}, "params");
  const auto prob = parse_pde(params.at("pde"));
  int n_t = 2000, n_x = 200;
  if (params.contains("fd")) {
    expect_keys(params.at("fd"), {"n_t", "n_x"}, "params.fd");
    n_t = get_or(params.at("fd"), "n_t", n_t);
    n_x = get_or(params.at("fd"), "n_x", n_x);
  }
  pde::McParams mcp;
  if (params.contains("mc")) {
    const auto mc = parse_mc(params.at("mc"), ov);
    mcp.paths = mc.paths;
    mcp.steps = mc.steps;
  }
  mcp.seed = seed;
  mcp.threads = threads;
  const double rel = get_or(params, "rel_tolerance", 0.02);

  std::vector<std::pair<double, double>> points;
  if (params.contains("points")) {
    for (const auto& pt : params.at("points")) {
      const auto v = pt.get<std::vector<double>>();
      if (v.size() != 2) throw ConfigError("params.points: entries must be [t, x]");
      points.emplace_back(v[0], v[1]);
    }
  } else {
    for (double t : {0.0, 0.25})
      for (double x : {-1.0, 0.0, 1.0}) points.emplace_back(t, x);
    for (double x : {-0.5, 0.0, 0.5}) points.emplace_back(0.4, x);
  }

  const auto fd = pde::fd_solve(prob, n_t, n_x);
  const auto mc_pts = pde::u_from_bsde(prob, points, mcp);

  report::Table tab;
  tab.csv = true;
  tab.columns = {"t", "x", "u_fd", "u_mc", "stderr", "abs_diff"};
  bool all_ok = true;
  double worst = 0.0;
  for (const auto& pe : mc_pts) {
    const double u_fd = fd.value(pe.t, pe.x);
    const double diff = std::abs(pe.u_mc - u_fd);
    const double tol = std::max(3.0 * pe.std_error, rel * std::abs(u_fd));
    if (diff > tol) all_ok = false;
    worst = std::max(worst, tol > 0 ? diff / tol : 0.0);
    tab.rows.push_back({pe.t, pe.x, u_fd, pe.u_mc, pe.std_error, diff});
  }
  rep.add_pass_fail("cross_validation", all_ok,
                    {{"points", static_cast<double>(points.size())},
                     {"worst_diff_over_tol", worst},
                     {"cfl_refined", fd.cfl_refined ? 1.0 : 0.0}});
  rep.tables["u_table"] = tab;

  report::Table prof;
  prof.columns = {"x", "u_fd_t0"};
  for (int j = 0; j < fd.xs.size(); ++j) {
    if (fd.xs(j) < prob.x_lo || fd.xs(j) > prob.x_hi) continue;
    prof.rows.push_back({fd.xs(j), fd.values(0, j)});
  }
  rep.tables["u_profile"] = prof;
}

void run_growth_check(const json& params, report::RunReport& rep) {
  expect_keys(params, {"pde", "fd", "p", "fit", "band_split", "band_hi"}, "params");
  const auto prob = parse_pde(params.at("pde"));
  int n_t = 2000, n_x = 600;
  if (params.contains("fd")) {
    expect_keys(params.at("fd"), {"n_t", "n_x"}, "params.fd");
    n_t = get_or(params.at("fd"), "n_t", n_t);
    n_x = get_or(params.at("fd"), "n_x", n_x);
  }
  const double p = get_req<double>(params, "p", "params");
  const bool fit = get_or(params, "fit", true);
  const double band_split = get_or(params, "band_split", 10.0);
  const double band_hi = get_or(params, "band_hi", 20.0);

  const auto fd = pde::fd_solve(prob, n_t, n_x);
  const auto gr = pde::growth_check(fd, p, fit, band_split, band_hi);
  rep.add_pass_fail("growth_bound", gr.pass,
                    {{"c_hat", gr.c_hat},
                     {"c_low_band", gr.c_low_band},
                     {"c_high_band", gr.c_high_band},
                     {"band_ratio", gr.band_ratio},
                     {"fitted_exponent", gr.fitted_exponent}});

  report::Table tab;
  tab.csv = true;
  tab.columns = {"x", "max_abs_u", "power_envelope"};
  for (int j = 0; j < fd.xs.size(); ++j) {
    const double ax = std::abs(fd.xs(j));
    if (ax > band_hi) continue;
    double m = 0.0;
    for (int i = 0; i < fd.times.size(); ++i) m = std::max(m, std::abs(fd.values(i, j)));
    tab.rows.push_back({fd.xs(j), m, gr.c_hat * (1.0 + std::pow(ax, p))});
  }
  rep.tables["growth"] = tab;
}

void run_selftest_checks(report::RunReport& rep) {
  // quick closed-form exercises of every module
  envelope::SubQuadParams p{1.5, 0.0, 1.0};
  const auto curve = envelope::EnvelopeCurve::make(p, 0.5, 1.0);
  rep.add_pass_fail("envelope_mu_starts_at_eps", curve.mu(0.0) == 0.5);
  rep.add_pass_fail("envelope_psi_trivial",
                    envelope::psi(0.0, 3.0, p).value == 1.0 &&
                        envelope::psi(2.0, 0.0, p).value == 1.0);
  rep.add_pass_fail("generator_truncation",
                    gen::truncate_scalar(5.0, 3.0, 1.0) == 3.0 &&
                        gen::truncate_scalar(-5.0, 3.0, 2.0) == -2.0);

  const auto zero_g = gen::make_generator("zero");
  const auto grid = gen::default_sample_grid();
  rep.add_pass_fail("generator_zero_h1", gen::check_H1(zero_g, grid).pass());

  auto spec = sde::make_diffusion("const_drift", {{"b", 1.0}, {"sigma", 0.0}});
  Vec x0 = Vec::Zero(1);
  const auto batch = sde::simulate(spec, 0.0, x0, 1.0, 16, 8, 7);
  rep.add_pass_fail("sde_drift_exact",
                    std::abs(batch.states.back()(0, 0) - 1.0) < 1e-12);

  bsde::MarkovBsdeProblem prob;
  prob.diffusion = sde::make_diffusion("brownian");
  prob.generator = gen::make_generator("zero");
  prob.terminal = gen::make_terminal("identity");
  prob.x0 = Vec::Ones(1);
  const auto b2 = sde::simulate(prob.diffusion, 0.0, prob.x0, 1.0, 20, 2000, 11);
  const auto sol = bsde::solve_backward(prob, b2, bsde::RegressionBasis{});
  rep.add_pass_fail("bsde_martingale",
                    std::abs(sol.y0 - 1.0) <= 3.0 * sol.y0_std_error + 1e-12,
                    {{"y0", sol.y0}, {"stderr", sol.y0_std_error}});

  pde::PdeProblem heat;
  heat.diffusion = sde::make_diffusion("brownian");
  heat.generator = gen::make_generator("zero");
  heat.terminal = gen::make_terminal("identity");
  heat.horizon = 0.5;
  const auto fd = pde::fd_solve(heat, 200, 100);
  rep.add_pass_fail("fd_linear_exact", std::abs(fd.value(0.0, 1.0) - 1.0) < 1e-9);
}

}  // namespace

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

report::RunReport run_selftest() {
  report::RunReport rep;
  rep.experiment = "SelfTest";
  rep.seed = 0;
  rep.deterministic = true;
  rep.config = json{{"experiment", "SelfTest"}};
  run_selftest_checks(rep);
  return rep;
}

report::RunReport run_from_json(json config, const Overrides& ov) {
  expect_keys(config,
              {"experiment", "seed", "deterministic", "threads", "output_dir", "params"},
              "config");
  const std::string kind = get_req<std::string>(config, "experiment", "config");
  if (ov.seed) config["seed"] = *ov.seed;
  if (ov.deterministic) config["deterministic"] = *ov.deterministic;
  if (ov.threads) config["threads"] = *ov.threads;
  if (ov.output_dir) config["output_dir"] = *ov.output_dir;
  const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 1);
  const bool deterministic = get_or(config, "deterministic", false);
  const int threads = get_or(config, "threads", 1);
  config["seed"] = seed;
  config["deterministic"] = deterministic;
  config["threads"] = threads;
  if (!config.contains("output_dir")) config["output_dir"] = "out";
  json params = config.value("params", json::object());
  if (ov.paths && params.contains("mc")) params["mc"]["paths"] = *ov.paths;
  if (ov.steps && params.contains("mc")) params["mc"]["steps"] = *ov.steps;
  config["params"] = params;  // echo the resolved values

  report::RunReport rep;
  rep.experiment = kind;
  rep.seed = seed;
  rep.deterministic = deterministic;
  rep.config = config;

  if (kind == "SelfTest") {
    run_selftest_checks(rep);
  } else if (kind == "EnvelopeCertify") {
    run_envelope_certify(params, rep);
  } else if (kind == "SolveBsde") {
    run_solve_bsde(params, ov, seed, rep);
  } else if (kind == "TruncationLadder") {
    run_truncation_ladder(params, ov, seed, rep);
  } else if (kind == "Comparison") {
    run_comparison(params, ov, seed, rep);
  } else if (kind == "Stability") {
    run_stability(params, ov, seed, rep);
  } else if (kind == "FeynmanKac") {
    run_feynman_kac(params, ov, seed, threads, rep);
  } else if (kind == "GrowthCheck") {
    run_growth_check(params, rep);
  } else {
    throw ConfigError("unknown experiment kind '" + kind + "'");
  }
  return rep;
}

int run_experiment(const std::string& config_path, const Overrides& ov) {
  try {
    const json config = load_config_file(config_path);
    const auto rep = run_from_json(config, ov);
    const std::string outdir = rep.config.value("output_dir", "out");
    const auto files = report::write_report(rep, outdir);
    for (const auto& c : rep.checks)
      std::cout << (c.status == "pass" ? "PASS " : c.status == "fail" ? "FAIL " : "INFO ")
                << c.name << "\n";
    std::cout << "report: " << files.back() << "\n";
    return rep.all_pass() ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace subq::cli
