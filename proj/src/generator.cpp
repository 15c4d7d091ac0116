#include "subq/generator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace subq::gen {

namespace {

double rel_tol(double scale) { return 1e-9 * (1.0 + std::abs(scale)); }

std::string node_str(std::initializer_list<std::pair<const char*, double>> kv) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [k, v] : kv) {
    if (!first) os << " ";
    os << k << "=" << v;
    first = false;
  }
  return os.str();
}

void record(AssumptionReport& rep, double lhs, double rhs, const std::string& node) {
  ++rep.sampled_nodes;
  rep.margin = std::min(rep.margin, rhs - lhs);
  if (lhs - rhs > rel_tol(rhs)) rep.violations.push_back({node, lhs, rhs});
}

double param(const std::map<std::string, double>& m, const std::string& key, double fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : it->second;
}

}  // namespace

std::string to_string(Assumption a) {
  switch (a) {
    case Assumption::H1: return "H1";
    case Assumption::H1Prime: return "H1'";
    case Assumption::H1DoublePrime: return "H1''";
    case Assumption::H2: return "H2";
    case Assumption::H2Prime: return "H2'";
    case Assumption::A1: return "A1";
    case Assumption::A2: return "A2";
  }
  return "?";
}

SampleGrid default_sample_grid(int dim_x, int dim_z, double t_max, double x_hi, double y_hi,
                               double z_cap) {
  SampleGrid g;
  g.ts = {0.0, 0.5 * t_max, t_max};
  const double x_pts[] = {-x_hi, -0.25 * x_hi, 0.0, 0.25 * x_hi, x_hi};
  for (double v : x_pts) {
    Vec x = Vec::Zero(dim_x);
    x(0) = v;
    g.xs.push_back(x);
  }
  g.ys = {-y_hi, -1.0, -0.3, 0.0, 0.3, 1.0, y_hi};
  const double mags[] = {0.0, z_cap / 16.0, z_cap / 4.0, z_cap};
  for (double m : mags) {
    for (int sgn_i : {-1, 1}) {
      if (m == 0.0 && sgn_i < 0) continue;
      Vec z = Vec::Zero(dim_z);
      z(0) = sgn_i * m;
      g.zs.push_back(z);
    }
  }
  return g;
}

AssumptionReport check_H1(const MarkovGenerator& g, const SampleGrid& grid) {
  AssumptionReport rep;
  rep.which = Assumption::H1;
  const auto& d = g.declared;
  for (double t : grid.ts) {
    for (const Vec& x : grid.xs) {
      const Vec z0 = Vec::Zero(grid.zs.front().size());
      const double g0 = std::abs(g(t, x, 0.0, z0));
      for (double y : grid.ys) {
        for (const Vec& z : grid.zs) {
          const double lhs = std::abs(g(t, x, y, z));
          const double rhs = g0 + d.beta * std::abs(y) + d.gamma * std::pow(z.norm(), d.alpha);
          record(rep, lhs, rhs, node_str({{"t", t}, {"x", x(0)}, {"y", y}, {"z", z(0)}}));
        }
      }
    }
  }
  return rep;
}

AssumptionReport check_H1_one_sided(const MarkovGenerator& g, const SampleGrid& grid,
                                    OneSidedVariant variant) {
  AssumptionReport rep;
  rep.which = variant == OneSidedVariant::H1Prime ? Assumption::H1Prime
                                                  : Assumption::H1DoublePrime;
  const auto& d = g.declared;
  const bool two_sided = variant == OneSidedVariant::H1DoublePrime;
  if (two_sided && !g.h_of_y)
    throw std::invalid_argument("check_H1_one_sided: the two-sided variant needs a declared h(|y|) and c");
  for (double t : grid.ts) {
    for (const Vec& x : grid.xs) {
      const Vec z0 = Vec::Zero(grid.zs.front().size());
      const double g0 = std::abs(g(t, x, 0.0, z0));
      const double fx = g.f_envelope(x);
      for (double y : grid.ys) {
        for (const Vec& z : grid.zs) {
          const double gv = g(t, x, y, z);
          const double za = std::pow(z.norm(), d.alpha);
          const auto node = node_str({{"t", t}, {"x", x(0)}, {"y", y}, {"z", z(0)}});
          if (variant == OneSidedVariant::H1Prime) {
            if (y > 0.0) record(rep, gv, g0 + d.beta * std::abs(y) + d.gamma * za, node);
            continue;
          }
          record(rep, sgn(y) * gv, fx + d.beta * std::abs(y) + d.gamma * za, node);
          const double rhs2 = fx + g.h_of_y(std::abs(y)) + g.c_quad * z.squaredNorm();
          record(rep, std::abs(gv), rhs2, node);
        }
      }
    }
  }
  return rep;
}

AssumptionReport check_H2(const MarkovGenerator& g, const SampleGrid& grid) {
  AssumptionReport rep;
  rep.which = Assumption::H2;
  const double lambdas[] = {0.25, 0.5, 0.75};

  struct Probe {
    double y;
    Vec z;
  };
  std::vector<Probe> w;
  for (double y : grid.ys)
    for (const Vec& z : grid.zs) w.push_back({y, z});

  double convex_margin = std::numeric_limits<double>::infinity();
  double concave_margin = std::numeric_limits<double>::infinity();
  std::vector<Violation> convex_viol, concave_viol;
  std::size_t nodes = 0;
  for (double t : grid.ts) {
    for (const Vec& x : grid.xs) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        for (std::size_t j = i + 1; j < w.size(); ++j) {
          const double g1 = g(t, x, w[i].y, w[i].z);
          const double g2 = g(t, x, w[j].y, w[j].z);
          for (double lam : lambdas) {
            ++nodes;
            const double ym = lam * w[i].y + (1.0 - lam) * w[j].y;
            const Vec zm = lam * w[i].z + (1.0 - lam) * w[j].z;
            const double gm = g(t, x, ym, zm);
            const double combo = lam * g1 + (1.0 - lam) * g2;
            const auto node = node_str(
                {{"t", t}, {"x", x(0)}, {"y1", w[i].y}, {"y2", w[j].y}, {"lam", lam}});
            convex_margin = std::min(convex_margin, combo - gm);
            concave_margin = std::min(concave_margin, gm - combo);
            if (gm - combo > rel_tol(combo)) convex_viol.push_back({node, gm, combo});
            if (combo - gm > rel_tol(combo)) concave_viol.push_back({node, combo, gm});
          }
        }
      }
    }
  }
  rep.sampled_nodes = nodes;
  const bool conv_ok = convex_viol.empty();
  const bool conc_ok = concave_viol.empty();
  if (conv_ok && conc_ok) {
    rep.note = "convex and concave";
    rep.margin = std::max(convex_margin, concave_margin);
  } else if (conv_ok) {
    rep.note = "convex";
    rep.margin = convex_margin;
  } else if (conc_ok) {
    rep.note = "concave";
    rep.margin = concave_margin;
  } else {
    rep.note = "neither convex nor concave";
    rep.margin = std::max(convex_margin, concave_margin);
    rep.violations = convex_viol.size() < concave_viol.size() ? convex_viol : concave_viol;
  }
  return rep;
}

std::vector<ThetaTuple> default_theta_tuples(int dim_x, int dim_z, double t_max) {
  std::vector<ThetaTuple> out;
  const double thetas[] = {0.01, 0.1, 0.5, 0.9, 0.99};
  const double dys[] = {-3.0, -1.0, 0.5, 2.0, 4.0};
  const double ybars[] = {-3.0, -0.5, 0.0, 1.0, 3.0};
  const double zmags[] = {-4.0, -1.0, 0.0, 1.0, 4.0};
  const double txs[][2] = {{0.0, 0.0}, {0.5 * t_max, 1.0}, {t_max, -2.0}};
  for (const auto& tx : txs) {
    Vec x = Vec::Zero(dim_x);
    x(0) = tx[1];
    for (double th : thetas)
      for (double dy : dys)
        for (double yb : ybars)
          for (double dzm : zmags)
            for (double zbm : zmags) {
              ThetaTuple tup;
              tup.t = tx[0];
              tup.x = x;
              tup.dy = dy;
              tup.dz = Vec::Zero(dim_z);
              tup.dz(0) = dzm;
              tup.ybar = yb;
              tup.zbar = Vec::Zero(dim_z);
              tup.zbar(0) = zbm;
              tup.theta = th;
              out.push_back(std::move(tup));
            }
  }
  return out;
}

AssumptionReport check_H2_prime(const MarkovGenerator& g, const std::vector<ThetaTuple>& tuples) {
  AssumptionReport rep;
  rep.which = Assumption::H2Prime;
  // default to the one-sided-growth constants when nothing sharper is declared
  H2PrimeDecl d;
  if (g.h2p) {
    d = *g.h2p;
  } else {
    d.f0 = g.f0;
    d.fx_k = g.fx_k;
    d.fx_p = g.fx_p;
    d.k = 0.0;
    d.beta = g.declared.beta;
    d.gamma = g.declared.gamma;
    d.alpha = g.declared.alpha;
  }
  for (const auto& tp : tuples) {
    const bool active = d.mirrored ? tp.dy < 0.0 : tp.dy > 0.0;
    if (!active) {
      ++rep.sampled_nodes;
      continue;
    }
    const double th = tp.theta;
    const double y1 = (1.0 - th) * tp.dy + th * tp.ybar;
    const Vec z1 = (1.0 - th) * tp.dz + th * tp.zbar;
    const double diff = g(tp.t, tp.x, y1, z1) - th * g(tp.t, tp.x, tp.ybar, tp.zbar);
    const double lhs = (d.mirrored ? -diff : diff) / (1.0 - th);
    const double fx = d.f0 + (d.fx_k != 0.0 ? d.fx_k * std::pow(tp.x.norm(), d.fx_p) : 0.0);
    const double rhs = fx + d.k * std::abs(tp.ybar) + d.beta * std::abs(tp.dy) +
                       d.gamma * std::pow(tp.dz.norm(), d.alpha);
    record(rep, lhs, rhs,
           node_str({{"t", tp.t},
                     {"x", tp.x(0)},
                     {"dy", tp.dy},
                     {"ybar", tp.ybar},
                     {"theta", th}}));
  }
  rep.note = "sampled theta grid only; uniformity in theta is not certified";
  return rep;
}

AssumptionReport check_A2(const MarkovGenerator& g,
                          const std::function<double(const Vec&)>& terminal,
                          const SampleGrid& grid) {
  AssumptionReport rep;
  rep.which = Assumption::A2;
  if (!g.growth) throw std::invalid_argument("check_A2: generator lacks declared (p, k) growth");
  const double p = g.growth->p;
  const double k = g.growth->k;
  const double alpha = g.declared.alpha;
  const double q = g.declared.q();
  for (double t : grid.ts) {
    for (const Vec& x : grid.xs) {
      const double xp = std::pow(x.norm(), p);
      const double hx = std::abs(terminal(x));
      for (double y : grid.ys) {
        for (const Vec& z : grid.zs) {
          const double gv = g(t, x, y, z);
          const auto node = node_str({{"t", t}, {"x", x(0)}, {"y", y}, {"z", z(0)}});
          record(rep, sgn(y) * gv,
                 k * (1.0 + xp + std::abs(y) + std::pow(z.norm(), alpha)), node);
          const double expy = sat_exp(k * std::pow(std::abs(y), q)).value;
          record(rep, std::abs(gv) + hx, k * (1.0 + xp + expy + z.squaredNorm()), node);
        }
      }
    }
  }
  // theta-difference part with the same constants
  MarkovGenerator probe = g;
  probe.h2p = H2PrimeDecl{k, k, p, k, k, k, alpha, g.h2p ? g.h2p->mirrored : false};
  auto sub = check_H2_prime(probe, default_theta_tuples(static_cast<int>(grid.xs.front().size()),
                                                        static_cast<int>(grid.zs.front().size())));
  rep.sampled_nodes += sub.sampled_nodes;
  rep.margin = std::min(rep.margin, sub.margin);
  for (auto& v : sub.violations) rep.violations.push_back(std::move(v));
  return rep;
}

double truncate_scalar(double v, double n, double p) {
  return std::min(std::max(v, 0.0), n) - std::min(std::max(-v, 0.0), p);
}

TruncatedGenerator truncate(const MarkovGenerator& g, double n, double p) {
  if (!(n >= 1.0 && p >= 1.0))
    throw std::domain_error("truncate: caps must be at least 1");
  return TruncatedGenerator{g, n, p};
}

MarkovGenerator TruncatedGenerator::as_markov() const {
  MarkovGenerator out = base;
  out.name = base.name + "/trunc";
  const MarkovGenerator inner = base;
  const double nn = n, pp = p;
  out.eval = [inner, nn, pp](double t, const Vec& x, double y, const Vec& z) {
    return std::clamp(inner(t, x, y, z), -pp, nn);
  };
  return out;
}

Vec truncate_terminal(const Vec& xi, double n, double p) {
  if (!(n >= 1.0 && p >= 1.0))
    throw std::domain_error("truncate_terminal: caps must be at least 1");
  Vec out(xi.size());
  for (std::ptrdiff_t i = 0; i < xi.size(); ++i) out(i) = truncate_scalar(xi(i), n, p);
  return out;
}

ThetaDifferenceGenerator::ThetaDifferenceGenerator(MarkovGenerator g, MarkovGenerator g_prime,
                                                   double theta, FrozenPaths primal,
                                                   FrozenPaths primed, Mode mode)
    : g_(std::move(g)),
      gp_(std::move(g_prime)),
      theta_(theta),
      primal_(std::move(primal)),
      primed_(std::move(primed)),
      mode_(mode) {
  if (!(theta > 0.0 && theta < 1.0))
    throw std::domain_error("ThetaDifferenceGenerator: theta must lie in (0,1)");
  auto check = [](const FrozenPaths& fp, const char* which) {
    if (fp.times.size() != fp.y.rows() ||
        fp.z.size() + 1 != static_cast<std::size_t>(fp.times.size()))
      throw std::invalid_argument(std::string("ThetaDifferenceGenerator: misaligned ") + which +
                                  " paths");
  };
  check(primal_, "primal");
  check(primed_, "primed");
  if (primal_.times.size() != primed_.times.size() || primal_.y.cols() != primed_.y.cols())
    throw std::invalid_argument("ThetaDifferenceGenerator: primal/primed grids disagree");
}

double ThetaDifferenceGenerator::eval(int i, int j, double t, const Vec& x, double y,
                                      const Vec& z) const {
  const double om = 1.0 - theta_;
  const double yp = primed_.y(i, j);
  const Vec zp = primed_.z[static_cast<std::size_t>(i)].col(j);
  const double mismatch = g_(t, x, yp, zp) - gp_(t, x, yp, zp);
  if (mode_ == Mode::Convex) {
    const double shifted = g_(t, x, om * y + theta_ * yp, om * z + theta_ * zp);
    return (shifted - theta_ * g_(t, x, yp, zp)) / om + theta_ / om * mismatch;
  }
  const double ya = primal_.y(i, j);
  const Vec za = primal_.z[static_cast<std::size_t>(i)].col(j);
  const double shifted = g_(t, x, -om * y + theta_ * ya, -om * z + theta_ * za);
  return (theta_ * g_(t, x, ya, za) - shifted) / om + mismatch / om;
}

// ---------------------------------------------------------------------------
// inf-convolution

namespace {

struct EnvelopeTable {
  double lo = 0.0, step = 0.05;
  int n = 0;
  Mat value;       // n x n, value(iy, iz)
  Mat boundary;    // 1.0 where the minimizer chain touched the table edge

  double at(double y, double z, InfConvStats* stats) const {
    double fy = (y - lo) / step;
    double fz = (z - lo) / step;
    bool clipped = false;
    if (fy < 0.0 || fy > n - 1.0 || fz < 0.0 || fz > n - 1.0) clipped = true;
    fy = std::clamp(fy, 0.0, n - 1.0);
    fz = std::clamp(fz, 0.0, n - 1.0);
    const int iy = std::min(static_cast<int>(fy), n - 2);
    const int iz = std::min(static_cast<int>(fz), n - 2);
    const double wy = fy - iy, wz = fz - iz;
    if (stats) {
      ++stats->queries;
      if (clipped) ++stats->out_of_box;
      if (boundary(iy, iz) + boundary(iy + 1, iz) + boundary(iy, iz + 1) +
              boundary(iy + 1, iz + 1) >
          0.0)
        ++stats->boundary_hits;
    }
    return (1.0 - wy) * ((1.0 - wz) * value(iy, iz) + wz * value(iy, iz + 1)) +
           wy * ((1.0 - wz) * value(iy + 1, iz) + wz * value(iy + 1, iz + 1));
  }
};

// two-pass L1 transform along each row/column, carrying edge provenance
void l1_transform_rows(Mat& v, Mat& from_edge, double slope_step) {
  const int n = static_cast<int>(v.rows());
  for (int col = 0; col < v.cols(); ++col) {
    for (int i = 1; i < n; ++i) {
      const double relaxed = v(i - 1, col) + slope_step;
      if (relaxed < v(i, col)) {
        v(i, col) = relaxed;
        from_edge(i, col) = std::max(from_edge(i, col), from_edge(i - 1, col));
      }
    }
    for (int i = n - 2; i >= 0; --i) {
      const double relaxed = v(i + 1, col) + slope_step;
      if (relaxed < v(i, col)) {
        v(i, col) = relaxed;
        from_edge(i, col) = std::max(from_edge(i, col), from_edge(i + 1, col));
      }
    }
  }
}

EnvelopeTable build_table(const MarkovGenerator& g, bool positive_part, double slope,
                          const InfConvParams& box) {
  EnvelopeTable tab;
  tab.step = box.step;
  tab.lo = -box.half_width;
  tab.n = static_cast<int>(std::round(2.0 * box.half_width / box.step)) + 1;
  tab.value.resize(tab.n, tab.n);
  tab.boundary = Mat::Zero(tab.n, tab.n);
  const Vec x0 = Vec::Zero(1);
  Vec z(1);
  for (int iy = 0; iy < tab.n; ++iy) {
    const double y = tab.lo + tab.step * iy;
    for (int iz = 0; iz < tab.n; ++iz) {
      z(0) = tab.lo + tab.step * iz;
      const double v = g(0.0, x0, y, z);
      tab.value(iy, iz) = positive_part ? std::max(v, 0.0) : std::max(-v, 0.0);
    }
  }
  for (int i = 0; i < tab.n; ++i) {
    tab.boundary(0, i) = tab.boundary(tab.n - 1, i) = 1.0;
    tab.boundary(i, 0) = tab.boundary(i, tab.n - 1) = 1.0;
  }
  l1_transform_rows(tab.value, tab.boundary, slope * tab.step);
  Mat vt = tab.value.transpose();
  Mat bt = tab.boundary.transpose();
  l1_transform_rows(vt, bt, slope * tab.step);
  tab.value = vt.transpose();
  tab.boundary = bt.transpose();
  return tab;
}

double direct_scan(const MarkovGenerator& g, bool positive_part, double slope,
                   const InfConvParams& box, double t, const Vec& x, double y, double z,
                   InfConvStats* stats) {
  double best = std::numeric_limits<double>::infinity();
  bool best_on_edge = false;
  const int n = static_cast<int>(std::round(2.0 * box.half_width / box.step));
  Vec zq(1);
  for (int iy = 0; iy <= n; ++iy) {
    const double yq = y - box.half_width + box.step * iy;
    for (int iz = 0; iz <= n; ++iz) {
      zq(0) = z - box.half_width + box.step * iz;
      const double raw = g(t, x, yq, zq);
      const double part = positive_part ? std::max(raw, 0.0) : std::max(-raw, 0.0);
      const double v = part + slope * (std::abs(y - yq) + std::abs(z - zq(0)));
      if (v < best) {
        best = v;
        best_on_edge = iy == 0 || iy == n || iz == 0 || iz == n;
      }
    }
  }
  if (stats) {
    ++stats->queries;
    if (best_on_edge) ++stats->boundary_hits;
  }
  return best;
}

}  // namespace

MarkovGenerator inf_convolution(const MarkovGenerator& g, double m, double l,
                                const InfConvParams& box, std::shared_ptr<InfConvStats> stats) {
  if (!(m >= 1.0 && l >= 1.0)) throw std::domain_error("inf_convolution: slopes must be >= 1");
  MarkovGenerator out;
  out.name = g.name + "/lip";
  out.declared = g.declared;
  out.growth = g.growth;
  out.f0 = g.f0;
  out.fx_k = g.fx_k;
  out.fx_p = g.fx_p;
  out.xt_independent = g.xt_independent;
  if (g.xt_independent) {
    auto pos = std::make_shared<EnvelopeTable>(build_table(g, true, m, box));
    auto neg = std::make_shared<EnvelopeTable>(build_table(g, false, l, box));
    out.eval = [pos, neg, stats](double, const Vec&, double y, const Vec& z) {
      InfConvStats* st = stats ? stats.get() : nullptr;
      return pos->at(y, z(0), st) - neg->at(y, z(0), st);
    };
  } else {
    const MarkovGenerator base = g;
    const InfConvParams bx = box;
    const double mm = m, ll = l;
    out.eval = [base, bx, mm, ll, stats](double t, const Vec& x, double y, const Vec& z) {
      InfConvStats* st = stats ? stats.get() : nullptr;
      return direct_scan(base, true, mm, bx, t, x, y, z(0), st) -
             direct_scan(base, false, ll, bx, t, x, y, z(0), st);
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// registry

namespace {

double lq_l(double y, double M) { return M * std::clamp(y, -1.0, 1.0); }
double lq_q(double znorm, double M, double R) { return M * std::max(0.0, 1.0 - znorm / R); }

}  // namespace

MarkovGenerator make_generator(const std::string& name,
                               const std::map<std::string, double>& params) {
  MarkovGenerator g;
  g.name = name;
  const double shift = param(params, "shift", 0.0);

  if (name == "zero") {
    g.eval = [shift](double, const Vec&, double, const Vec&) { return shift; };
    g.declared = {param(params, "alpha", 1.5), 0.0, 1.0};
    g.f0 = std::abs(shift);
    g.h_of_y = [](double) { return 0.0; };
    g.c_quad = 1.0;
    g.flag_h1 = shift == 0.0;
    g.flag_h1dp = true;
    g.flag_h2 = true;
    g.flag_h2prime = true;
    g.convex = g.concave = true;
    g.xt_independent = true;
    g.growth = GrowthDecl{1.0, std::max(1.0, std::abs(shift))};
    g.h2p = H2PrimeDecl{std::abs(shift), 0.0, 1.0, 0.0, 0.0, 1.0, g.declared.alpha, false};
    return g;
  }
  if (name == "affine") {
    const double a = param(params, "a", 1.0);
    const double b = param(params, "b", 1.0);
    g.eval = [a, b, shift](double, const Vec&, double y, const Vec& z) {
      return a * y + b * z.sum() + shift;
    };
    g.declared = {param(params, "alpha", 1.5), std::abs(a), std::max(std::abs(b), 1e-12)};
    g.f0 = std::abs(b) + std::abs(shift);  // |b||z| <= |b| + |b||z|^alpha
    g.h_of_y = [a](double v) { return std::abs(a) * v; };
    g.c_quad = std::abs(b) + 1.0;
    g.flag_h1 = b == 0.0 && shift == 0.0;
    g.flag_h1dp = true;
    g.flag_h2 = true;
    g.flag_h2prime = true;
    g.convex = g.concave = true;
    g.xt_independent = true;
    g.growth = GrowthDecl{1.0, std::abs(a) + std::abs(b) + std::abs(shift) + 1.0};
    g.h2p = H2PrimeDecl{g.f0, 0.0, 1.0, 2.0 * std::abs(a), std::abs(a),
                        std::max(std::abs(b), 1e-12), g.declared.alpha, false};
    return g;
  }
  if (name == "abs_z_alpha") {
    const double gamma = param(params, "gamma", 1.0);
    const double alpha = param(params, "alpha", 1.5);
    g.eval = [gamma, alpha, shift](double, const Vec&, double, const Vec& z) {
      return gamma * std::pow(z.norm(), alpha) + shift;
    };
    g.declared = {alpha, 0.0, gamma};
    g.f0 = gamma + std::abs(shift);  // |z|^alpha <= 1 + |z|^2
    g.h_of_y = [](double) { return 0.0; };
    g.c_quad = gamma;
    g.flag_h1 = shift == 0.0;
    g.flag_h1dp = true;
    g.flag_h2 = true;
    g.flag_h2prime = true;
    g.convex = true;
    g.xt_independent = true;
    g.growth = GrowthDecl{1.0, gamma + std::abs(shift) + 1.0};
    g.h2p = H2PrimeDecl{std::abs(shift), 0.0, 1.0, 0.0, 0.0, gamma, alpha, false};
    return g;
  }
  if (name == "minus_y_cubed") {
    g.eval = [shift](double, const Vec&, double y, const Vec&) { return -y * y * y + shift; };
    g.declared = {param(params, "alpha", 1.5), 0.0, 1.0};
    g.f0 = std::abs(shift);
    g.h_of_y = [](double v) { return v * v * v; };
    g.c_quad = 1.0;
    g.flag_h1 = false;
    g.flag_h1dp = true;
    g.flag_h2 = false;
    g.flag_h2prime = false;
    g.xt_independent = true;
    g.growth = GrowthDecl{1.0, 1.0 + std::abs(shift)};
    return g;
  }
  if (name == "sin_y") {
    g.eval = [shift](double, const Vec&, double y, const Vec&) { return std::sin(y) + shift; };
    g.declared = {param(params, "alpha", 1.5), 1.0, 1.0};
    g.f0 = std::abs(shift);
    g.h_of_y = [](double v) { return std::min(v, 1.0); };
    g.c_quad = 1.0;
    g.flag_h1 = shift == 0.0;  // |sin y| <= |y|
    g.flag_h1dp = true;
    g.flag_h2 = false;
    g.flag_h2prime = true;
    g.xt_independent = true;
    g.growth = GrowthDecl{1.0, 1.0 + std::abs(shift)};
    g.h2p = H2PrimeDecl{std::abs(shift), 0.0, 1.0, 2.0, 1.0, 1.0, g.declared.alpha, false};
    return g;
  }
  if (name == "lq_product") {
    const double M = param(params, "M", 1.0);
    const double R = param(params, "R", 2.0);
    const double alpha = param(params, "alpha", 1.5);
    g.eval = [M, R, shift](double, const Vec&, double y, const Vec& z) {
      return lq_l(y, M) * lq_q(z.norm(), M, R) + shift;
    };
    // |l(y) q(z)| <= M^2 |y| since l passes through 0 with slope M
    g.declared = {alpha, M * M + std::abs(shift), 1.0};
    g.f0 = std::abs(shift);
    g.h_of_y = [M](double v) { return M * M * std::min(v, 1.0); };
    g.c_quad = 1.0;
    g.flag_h1 = true;
    g.flag_h1dp = true;
    g.flag_h2 = false;
    g.flag_h2prime = true;
    g.xt_independent = true;
    g.growth = GrowthDecl{1.0, M * M + std::abs(shift) + 1.0};
    const double lip_l = M, lip_q = M / R;
    g.h2p = H2PrimeDecl{M * (5.0 * M + 2.0 * lip_q * R + lip_q) + std::abs(shift),
                        0.0,
                        1.0,
                        M * lip_l,
                        M * lip_l,
                        M * lip_q,
                        alpha,
                        false};
    return g;
  }
  if (name == "composite_example") {
    const double p = param(params, "p", 1.2);
    const int m = static_cast<int>(param(params, "m", 1.0));
    const double alpha = param(params, "alpha", 1.5);
    const double M = param(params, "M", 1.0);
    const double R = param(params, "R", 2.0);
    g.eval = [p, m, alpha, M, R, shift](double, const Vec& x, double y, const Vec& z) {
      const double xn = x.norm();
      const double y2m = y <= 0.0 ? std::pow(y * y, m) : 0.0;
      return 1.0 + std::pow(xn, p) * std::sin(xn) + y2m + std::sin(y) +
             std::pow(z.norm(), alpha) + lq_l(y, M) * lq_q(z.norm(), M, R) + shift;
    };
    g.declared = {alpha, 0.0, 1.0};
    g.f0 = 2.0 + M * M + std::abs(shift);
    g.fx_k = 1.0;
    g.fx_p = p;
    g.h_of_y = [m](double v) { return std::pow(v * v, m) + v; };
    g.c_quad = 1.0;
    g.flag_h1 = false;
    g.flag_h1dp = true;
    g.flag_h2 = false;
    g.flag_h2prime = true;
    g.growth = GrowthDecl{p, 3.0 + M * M + std::abs(shift)};
    const double lip_q = M / R;
    g.h2p = H2PrimeDecl{g.f0 + M * (5.0 * M + 2.0 * lip_q * R + lip_q),
                        1.0 + M * (5.0 * M + 2.0 * lip_q * R + lip_q),
                        p,
                        2.0 + M * M,
                        1.0 + M * M,
                        1.0 + M * lip_q,
                        alpha,
                        false};
    return g;
  }
  if (name == "quadratic_z") {
    g.eval = [shift](double, const Vec&, double, const Vec& z) {
      return z.squaredNorm() + shift;
    };
    g.declared = {param(params, "alpha", 1.5), 0.0, 1.0};  // deliberately too small an exponent
    g.f0 = std::abs(shift);
    g.h_of_y = [](double) { return 0.0; };
    g.c_quad = 1.0;
    g.flag_h1 = false;
    g.flag_h1dp = false;  // quadratic z-growth breaks the signed sub-quadratic bound too
    g.flag_h2 = true;
    g.flag_h2prime = false;
    g.convex = true;
    g.xt_independent = true;
    g.growth = GrowthDecl{1.0, 1.0 + std::abs(shift)};
    return g;
  }
  throw std::invalid_argument("make_generator: unknown registry name '" + name + "'");
}

std::vector<std::string> generator_names() {
  return {"zero",   "affine",     "abs_z_alpha",       "minus_y_cubed",
          "sin_y",  "lq_product", "composite_example", "quadratic_z"};
}

std::function<double(const Vec&)> make_terminal(const std::string& name,
                                                const std::map<std::string, double>& params) {
  const double shift = param(params, "shift", 0.0);
  if (name == "constant") {
    const double c = param(params, "c", 0.0) + shift;
    return [c](const Vec&) { return c; };
  }
  if (name == "identity") {
    return [shift](const Vec& x) { return x(0) + shift; };
  }
  if (name == "square") {
    return [shift](const Vec& x) { return x(0) * x(0) + shift; };
  }
  if (name == "cos") {
    return [shift](const Vec& x) { return std::cos(x(0)) + shift; };
  }
  if (name == "abs") {
    return [shift](const Vec& x) { return x.norm() + shift; };
  }
  if (name == "abs_pow") {
    const double p = param(params, "p", 1.2);
    return [p, shift](const Vec& x) { return std::pow(x.norm(), p) + shift; };
  }
  if (name == "abs_pow_cos") {
    const double p = param(params, "p", 1.2);
    return [p, shift](const Vec& x) {
      const double xn = x.norm();
      return std::pow(xn, p) * std::cos(xn) + shift;
    };
  }
  throw std::invalid_argument("make_terminal: unknown terminal name '" + name + "'");
}

std::vector<std::string> terminal_names() {
  return {"constant", "identity", "square", "cos", "abs", "abs_pow", "abs_pow_cos"};
}

}  // namespace subq::gen
