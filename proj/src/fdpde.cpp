#include "subq/fdpde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

namespace subq::pde {

double GridSolution::value(double t, double x) const {
  const auto locate = [](const Vec& grid, double v) {
    const int n = static_cast<int>(grid.size());
    if (v <= grid(0)) return std::pair<int, double>{0, 0.0};
    if (v >= grid(n - 1)) return std::pair<int, double>{n - 2, 1.0};
    int lo = 0, hi = n - 1;
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      (grid(mid) <= v ? lo : hi) = mid;
    }
    return std::pair<int, double>{lo, (v - grid(lo)) / (grid(lo + 1) - grid(lo))};
  };
  const auto [it, wt] = locate(times, t);
  const auto [ix, wx] = locate(xs, x);
  return (1.0 - wt) * ((1.0 - wx) * values(it, ix) + wx * values(it, ix + 1)) +
         wt * ((1.0 - wx) * values(it + 1, ix) + wx * values(it + 1, ix + 1));
}

GridSolution fd_solve(const PdeProblem& pde, int n_t, int n_x) {
  if (pde.diffusion.dim_x != 1 || pde.diffusion.dim_w != 1)
    throw std::invalid_argument("fd_solve: the grid oracle is one-dimensional");
  if (n_t < 1 || n_x < 2) throw std::domain_error("fd_solve: need n_t >= 1 and n_x >= 2");

  GridSolution out;
  out.report_lo = pde.x_lo;
  out.report_hi = pde.x_hi;
  const double width = pde.x_hi - pde.x_lo;
  out.dx = width / n_x;
  const int pad_nodes = static_cast<int>(std::ceil(pde.pad_fraction * width / out.dx));
  const int m = n_x + 2 * pad_nodes + 1;
  out.xs.resize(m);
  for (int j = 0; j < m; ++j) out.xs(j) = pde.x_lo + out.dx * (j - pad_nodes);

  // sampled coefficient bounds for the stability restriction
  Vec xv(1);
  double sig_max = 0.0, b_max = 0.0;
  for (int k = 0; k <= 4; ++k) {
    const double t = pde.horizon * k / 4.0;
    for (int j = 0; j < m; j += std::max(1, m / 64)) {
      xv(0) = out.xs(j);
      sig_max = std::max(sig_max, std::abs(pde.diffusion.diffusion(t, xv)(0, 0)));
      b_max = std::max(b_max, std::abs(pde.diffusion.drift(t, xv)(0)));
    }
  }
  const double dt_cap = out.dx * out.dx / (sig_max * sig_max + out.dx * b_max + 1e-300);
  int nt = n_t;
  if (pde.horizon / nt > dt_cap) {
    nt = static_cast<int>(std::ceil(pde.horizon / dt_cap));
    out.cfl_refined = true;
  }
  out.n_t_used = nt;
  out.dt = pde.horizon / nt;
  out.times.resize(nt + 1);
  for (int i = 0; i <= nt; ++i) out.times(i) = out.dt * i;
  out.times(nt) = pde.horizon;

  out.values.resize(nt + 1, m);
  for (int j = 0; j < m; ++j) {
    xv(0) = out.xs(j);
    out.values(nt, j) = pde.terminal(xv);
  }

  Vec z(1);
  double bd_lo = out.values(nt, 0), bd_hi = out.values(nt, m - 1);
  for (int i = nt - 1; i >= 0; --i) {
    const double t_next = out.times(i + 1);
    const auto row_next = out.values.row(i + 1);
    for (int j = 1; j + 1 < m; ++j) {
      xv(0) = out.xs(j);
      const double d1 = (row_next(j + 1) - row_next(j - 1)) / (2.0 * out.dx);
      const double d2 =
          (row_next(j + 1) - 2.0 * row_next(j) + row_next(j - 1)) / (out.dx * out.dx);
      const double sig = pde.diffusion.diffusion(t_next, xv)(0, 0);
      const double b = pde.diffusion.drift(t_next, xv)(0);
      z(0) = sig * d1;
      out.values(i, j) =
          row_next(j) +
          out.dt * (0.5 * sig * sig * d2 + b * d1 +
                    pde.generator(t_next, xv, row_next(j), z));
    }
    if (pde.boundary == BoundaryRule::Extrapolate) {
      out.values(i, 0) = 3.0 * out.values(i, 1) - 3.0 * out.values(i, 2) + out.values(i, 3);
      out.values(i, m - 1) =
          3.0 * out.values(i, m - 2) - 3.0 * out.values(i, m - 3) + out.values(i, m - 4);
    } else {
      z.setZero();
      xv(0) = out.xs(0);
      bd_lo += out.dt * pde.generator(t_next, xv, bd_lo, z);
      xv(0) = out.xs(m - 1);
      bd_hi += out.dt * pde.generator(t_next, xv, bd_hi, z);
      out.values(i, 0) = bd_lo;
      out.values(i, m - 1) = bd_hi;
    }
    const double amax = out.values.row(i).cwiseAbs().maxCoeff();
    if (!std::isfinite(amax) || amax > 1e6) {
      std::ostringstream os;
      os << "fd_solve: solution magnitude " << amax << " at t=" << out.times(i)
         << " exceeds the blow-up guard";
      throw InstabilityError(os.str());
    }
  }
  return out;
}

std::vector<PointEstimate> u_from_bsde(const PdeProblem& pde,
                                       const std::vector<std::pair<double, double>>& points,
                                       const McParams& mc) {
  std::vector<PointEstimate> out(points.size());
  std::vector<std::string> errors(points.size());

  auto run_point = [&](std::size_t idx) {
    const auto [t, x] = points[idx];
    PointEstimate pe;
    pe.t = t;
    pe.x = x;
    try {
      Vec x0(1);
      x0(0) = x;
      if (t >= pde.horizon - 1e-14) {
        pe.u_mc = pde.terminal(x0);
        pe.std_error = 0.0;
      } else {
        bsde::MarkovBsdeProblem prob;
        prob.diffusion = pde.diffusion;
        prob.terminal = pde.terminal;
        prob.generator = pde.generator;
        prob.t0 = t;
        prob.horizon = pde.horizon - t;
        prob.x0 = x0;
        // same step length at every point: the count follows the remaining horizon
        const int steps = std::max(
            10, static_cast<int>(std::lround(mc.steps * prob.horizon / pde.horizon)));
        const auto batch = sde::simulate(pde.diffusion, t, x0, pde.horizon, steps, mc.paths,
                                         mc.seed, idx + 1);
        const auto sol = bsde::solve_backward(prob, batch, mc.basis, mc.picard_tol, mc.picard_max);
        pe.u_mc = sol.y0;
        pe.std_error = sol.y0_std_error;
      }
    } catch (const std::exception& e) {
      errors[idx] = e.what();
    }
    out[idx] = pe;
  };

  const int threads = std::max(1, mc.threads);
  if (threads == 1 || points.size() < 2) {
    for (std::size_t i = 0; i < points.size(); ++i) run_point(i);
  } else {
    std::vector<std::thread> pool;
    std::size_t next = 0;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w]() {
        for (std::size_t i = static_cast<std::size_t>(w); i < points.size();
             i += static_cast<std::size_t>(threads))
          run_point(i);
      });
      (void)next;
    }
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < points.size(); ++i)
    if (!errors[i].empty())
      throw std::runtime_error("u_from_bsde: point " + std::to_string(i) + " failed: " + errors[i]);
  return out;
}

GrowthReport growth_check(const GridSolution& u, double p, bool fit, double band_split,
                          double band_hi) {
  GrowthReport rep;
  double c_low = 0.0, c_high = 0.0;
  for (int i = 0; i < u.times.size(); ++i) {
    for (int j = 0; j < u.xs.size(); ++j) {
      const double ax = std::abs(u.xs(j));
      if (ax > band_hi) continue;
      const double c = std::abs(u.values(i, j)) / (1.0 + std::pow(ax, p));
      if (ax <= band_split)
        c_low = std::max(c_low, c);
      else
        c_high = std::max(c_high, c);
    }
  }
  rep.c_low_band = c_low;
  rep.c_high_band = c_high;
  rep.c_hat = std::max(c_low, c_high);
  const double lo = std::max(std::min(c_low, c_high), 1e-300);
  rep.band_ratio = std::max(c_low, c_high) / lo;
  rep.pass = std::isfinite(rep.c_hat) && rep.band_ratio <= 2.0;

  if (fit) {
    // slope of log|u(0,.)| against log(1+|x|) away from the origin
    double sxx = 0.0, sxy = 0.0, sx = 0.0, sy = 0.0;
    int n = 0;
    for (int j = 0; j < u.xs.size(); ++j) {
      const double ax = std::abs(u.xs(j));
      if (ax < 2.0 || ax > band_hi) continue;
      const double uv = std::abs(u.values(0, j));
      if (uv < 1e-12) continue;
      const double lx = std::log(ax), ly = std::log(uv);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++n;
    }
    if (n > 1 && sxx * n - sx * sx > 1e-12)
      rep.fitted_exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return rep;
}

LadderReport lipschitz_pde_ladder(const PdeProblem& pde, const std::vector<double>& m_list,
                                  const std::vector<double>& l_list, int n_t, int n_x,
                                  const gen::InfConvParams& box) {
  if (m_list.empty() || l_list.empty())
    throw std::invalid_argument("lipschitz_pde_ladder: empty ladder");
  const GridSolution direct = fd_solve(pde, n_t, n_x);

  const auto in_window = [&](double x) { return x >= pde.x_lo && x <= pde.x_hi; };
  auto max_gap = [&](const GridSolution& a, const GridSolution& b) {
    double gap = 0.0;
    for (int i = 0; i < a.times.size(); ++i)
      for (int j = 0; j < a.xs.size(); ++j)
        if (in_window(a.xs(j))) gap = std::max(gap, std::abs(a.values(i, j) - b.values(i, j)));
    return gap;
  };
  auto node_leq = [&](const GridSolution& a, const GridSolution& b, double slack) {
    for (int i = 0; i < a.times.size(); ++i)
      for (int j = 0; j < a.xs.size(); ++j)
        if (in_window(a.xs(j)) && a.values(i, j) > b.values(i, j) + slack) return false;
    return true;
  };

  LadderReport rep;
  std::vector<std::vector<GridSolution>> sols(m_list.size());
  for (std::size_t a = 0; a < m_list.size(); ++a) {
    for (std::size_t b = 0; b < l_list.size(); ++b) {
      PdeProblem reg = pde;
      reg.generator = gen::inf_convolution(pde.generator, m_list[a], l_list[b], box);
      sols[a].push_back(fd_solve(reg, n_t, n_x));
      LadderEntry e;
      e.m = m_list[a];
      e.l = l_list[b];
      double amax = 0.0;
      for (int i = 0; i < sols[a].back().times.size(); ++i)
        amax = std::max(amax, sols[a].back().values.row(i).cwiseAbs().maxCoeff());
      e.max_abs = amax;
      e.gap_to_direct = max_gap(sols[a].back(), direct);
      rep.entries.push_back(e);
    }
  }

  const double slack = 1e-6;
  rep.monotone_in_l = true;
  for (std::size_t a = 0; a < m_list.size(); ++a)
    for (std::size_t b = 0; b + 1 < l_list.size(); ++b)
      if (!node_leq(sols[a][b + 1], sols[a][b], slack)) rep.monotone_in_l = false;
  rep.monotone_in_m = true;
  for (std::size_t a = 0; a + 1 < m_list.size(); ++a)
    if (!node_leq(sols[a].back(), sols[a + 1].back(), slack)) rep.monotone_in_m = false;

  double scale = 1.0;
  for (int i = 0; i < direct.times.size(); ++i)
    scale = std::max(scale, direct.values.row(i).cwiseAbs().maxCoeff());
  rep.final_gap_rel = rep.entries.back().gap_to_direct / scale;
  rep.pass = rep.monotone_in_l && rep.monotone_in_m && rep.final_gap_rel <= 0.02;
  return rep;
}

}  // namespace subq::pde
