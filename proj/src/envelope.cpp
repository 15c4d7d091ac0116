#include "subq/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace subq::envelope {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double golden_min(const std::function<double(double)>& f, double a, double b, int iters = 200) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters && (b - a) > 1e-14 * (1.0 + std::abs(a) + std::abs(b)); ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? c : d;
}

}  // namespace

void SubQuadParams::validate() const {
  if (!(alpha > 1.0 && alpha < 2.0))
    throw std::domain_error("SubQuadParams: alpha must lie in the open interval (1,2)");
  if (!(beta >= 0.0)) throw std::domain_error("SubQuadParams: beta must be nonnegative");
  if (!(gamma > 0.0)) throw std::domain_error("SubQuadParams: gamma must be positive");
}

double k_alpha_eps(double alpha, double eps) {
  if (!(alpha > 1.0 && alpha < 2.0))
    throw std::domain_error("k_alpha_eps: alpha must lie in (1,2)");
  if (!(eps > 0.0)) throw std::domain_error("k_alpha_eps: eps must be positive");
  const double qp = (2.0 - alpha) / alpha;
  const double wm1 = std::expm1(qp * std::log1p(eps));  // (1+eps)^qp - 1 > 0
  const double base = (1.0 + wm1) / (2.0 * (alpha - 1.0) * eps * wm1);
  return std::pow(base, alpha / (2.0 * (alpha - 1.0)));
}

double log_c_tilde(double alpha, double gamma) {
  const double two_m_a = 2.0 - alpha;
  return (2.0 / two_m_a) * std::log(alpha * gamma) - std::log(2.0) -
         (2.0 * (alpha - 1.0) / two_m_a) * std::log(2.0 * (alpha - 1.0) / alpha);
}

double log_c_bar(double alpha, double beta, double gamma) {
  if (!(beta > 0.0)) throw std::domain_error("c_bar requires a positive drift constant beta");
  const double two_m_a = 2.0 - alpha;
  return std::log(two_m_a) + (2.0 / two_m_a) * std::log(alpha * gamma) -
         std::log(4.0 * (alpha - 1.0) * beta) -
         (2.0 * (alpha - 1.0) / two_m_a) * std::log(2.0 * (alpha - 1.0) / alpha);
}

double c_tilde(double alpha, double gamma) { return std::exp(log_c_tilde(alpha, gamma)); }

double c_bar(double alpha, double beta, double gamma) {
  return std::exp(log_c_bar(alpha, beta, gamma));
}

StructuralConstants structural_constants(const SubQuadParams& p) {
  p.validate();
  StructuralConstants out{c_tilde(p.alpha, p.gamma), std::nullopt};
  if (p.beta > 0.0) out.c_bar = c_bar(p.alpha, p.beta, p.gamma);
  return out;
}

EnvelopeCurve::EnvelopeCurve(SubQuadParams params, double eps, double horizon, CurveKind kind)
    : params_(params), eps_(eps), horizon_(horizon), kind_(kind) {
  params_.validate();
  if (!(eps > 0.0)) throw std::domain_error("EnvelopeCurve: eps must be positive");
  if (!(horizon > 0.0)) throw std::domain_error("EnvelopeCurve: horizon must be positive");
  if (kind == CurveKind::BarWithDrift && !(params_.beta > 0.0))
    throw std::domain_error("EnvelopeCurve: the drift branch requires beta > 0");
  k_eps_ = k_alpha_eps(params_.alpha, eps_);
  log_c_ = kind == CurveKind::BarWithDrift ? log_c_bar(params_.alpha, params_.beta, params_.gamma)
                                           : log_c_tilde(params_.alpha, params_.gamma);
}

EnvelopeCurve EnvelopeCurve::make(SubQuadParams params, double eps, double horizon) {
  return EnvelopeCurve(params, eps, horizon,
                       params.beta > 0.0 ? CurveKind::BarWithDrift : CurveKind::TildeNoDrift);
}

void EnvelopeCurve::check_domain(double s) const {
  const double slack = 1e-9 * (1.0 + horizon_);
  if (s < -slack || s > horizon_ + slack)
    throw std::domain_error("EnvelopeCurve: s outside [0, horizon]");
}

double EnvelopeCurve::log_inner(double s) const {
  const double a = params_.alpha;
  const double m = a / (2.0 - a);  // exponent of eps in the inner quantity
  if (kind_ == CurveKind::TildeNoDrift) {
    const double lin = s > 0.0 ? log_c_ + std::log1p(eps_) + std::log(s) : -kInf;
    return log_sum_exp(lin, m * std::log(eps_));
  }
  const double r = 2.0 * (a - 1.0) * params_.beta / (2.0 - a);
  const double grown = m * std::log(eps_) + r * s;
  const double drift = std::log1p(eps_) + log_c_ + log_expm1(r * s);
  return log_sum_exp(grown, drift);
}

double EnvelopeCurve::mu(double s) const {
  check_domain(s);
  s = std::clamp(s, 0.0, horizon_);
  if (s == 0.0) return eps_;
  const double e = (2.0 - params_.alpha) / params_.alpha;
  return std::exp(e * log_inner(s));
}

double EnvelopeCurve::mu_prime(double s) const {
  check_domain(s);
  s = std::clamp(s, 0.0, horizon_);
  const double a = params_.alpha;
  const double e = (2.0 - a) / a;
  const double m = a / (2.0 - a);
  if (kind_ == CurveKind::TildeNoDrift) {
    const double ln = std::log(e) + (e - 1.0) * log_inner(s) + log_c_ + std::log1p(eps_);
    return std::exp(ln);
  }
  const double r = 2.0 * (a - 1.0) * params_.beta / (2.0 - a);
  const double log_a0 = log_sum_exp(m * std::log(eps_), std::log1p(eps_) + log_c_);
  const double ln = std::log(e) + (e - 1.0) * log_inner(s) + log_a0 + std::log(r) + r * s;
  return std::exp(ln);
}

double mu_zero(const SubQuadParams& p, double horizon) {
  p.validate();
  if (!(horizon > 0.0)) throw std::domain_error("mu_zero: horizon must be positive");
  const double e = (2.0 - p.alpha) / p.alpha;
  if (p.beta == 0.0) return std::exp(e * (log_c_tilde(p.alpha, p.gamma) + std::log(horizon)));
  const double r = 2.0 * (p.alpha - 1.0) * p.beta / (2.0 - p.alpha);
  return std::exp(e * (log_c_bar(p.alpha, p.beta, p.gamma) + log_expm1(r * horizon)));
}

double match_epsilon(const SubQuadParams& p, double horizon, double mu_target) {
  const double mu0 = mu_zero(p, horizon);
  if (!(mu_target > mu0)) {
    std::ostringstream os;
    os << "match_epsilon: target " << mu_target << " is not above the infimum " << mu0;
    throw InfeasibleError(os.str());
  }
  auto mu_at = [&](double eps) { return EnvelopeCurve::make(p, eps, horizon).mu(horizon); };

  double lo = 1e-16;
  if (mu_at(lo) >= mu_target) return lo;  // target indistinguishable from the infimum
  double hi = 1.0;
  while (mu_at(hi) < mu_target) {
    hi *= 2.0;
    if (hi > 1e9)
      throw InfeasibleError("match_epsilon: no bracket found below eps = 1e9");
  }
  // bisection on log(eps); the map is strictly increasing
  double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < 160; ++i) {
    const double mid = 0.5 * (llo + lhi);
    if (mu_at(std::exp(mid)) < mu_target)
      llo = mid;
    else
      lhi = mid;
  }
  return std::exp(0.5 * (llo + lhi));
}

TestFunction::TestFunction(EnvelopeCurve curve, double exp_cap)
    : curve_(std::move(curve)), cap_(exp_cap) {}

TestFunction::Ratios TestFunction::ratios(double s, double x) const {
  if (x < 0.0) throw std::domain_error("TestFunction: x must be nonnegative");
  const auto& p = curve_.params();
  const double q = p.q();
  const double u = x + curve_.k_eps();
  const double mu = curve_.mu(s);
  const double uq = std::pow(u, q);
  Ratios r;
  r.exponent = mu * uq;
  r.px = mu * q * std::pow(u, q - 1.0);
  r.pxx = r.px * r.px + mu * q * (q - 1.0) * std::pow(u, q - 2.0);
  r.ps = uq * curve_.mu_prime(s);
  return r;
}

PhiValues TestFunction::eval(double s, double x) const {
  const Ratios r = ratios(s, x);
  const SatValue p = sat_exp(r.exponent, cap_);
  return {p.value, p.value * r.px, p.value * r.pxx, p.value * r.ps, p.saturated};
}

SatValue psi(double x, double mu, const SubQuadParams& p, double cap) {
  if (x < 0.0) throw std::domain_error("psi: x must be nonnegative");
  if (mu < 0.0) throw std::domain_error("psi: mu must be nonnegative");
  if (x == 0.0 || mu == 0.0) return {1.0, false};
  return sat_exp(mu * std::pow(x, p.q()), cap);
}

double certify_delta(const EnvelopeCurve& curve) {
  const auto& p = curve.params();
  const double eps = curve.epsilon();
  const double k = curve.k_eps();
  const double q = p.q();
  const double a = p.alpha;
  const double log_coef = std::log(2.0 * (a - 1.0) * (a - 1.0) * eps / (a * a));

  auto log_bound = [&](double x) {
    const double u = x + k;
    return eps * std::pow(u, q) + log_coef - (2.0 / a) * std::log(u);
  };

  // the unconstrained stationary point sits at (x+k)^q = 1/(eps (alpha-1))
  const double u_stat = std::pow(1.0 / (eps * (a - 1.0)), 1.0 / q);
  double x_max = std::max({1.0, 4.0 * u_stat, 4.0 * k});

  const int grid_n = 400;
  for (int attempt = 0; attempt < 60; ++attempt) {
    const double x_lo = x_max * 1e-8;
    std::vector<double> xs;
    xs.reserve(grid_n + 1);
    xs.push_back(0.0);
    const double lr = std::log(x_max / x_lo) / (grid_n - 1);
    for (int i = 0; i < grid_n; ++i) xs.push_back(x_lo * std::exp(lr * i));

    std::size_t best = 0;
    double best_v = kInf;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double v = log_bound(xs[i]);
      if (v < best_v) {
        best_v = v;
        best = i;
      }
    }

    // monotone-tail certificate over the last decade of the grid
    bool tail_ok = true;
    for (std::size_t i = xs.size() - 40; i + 1 < xs.size(); ++i) {
      if (log_bound(xs[i + 1]) < log_bound(xs[i]) - 1e-12) {
        tail_ok = false;
        break;
      }
    }
    if (!tail_ok || best + 2 >= xs.size()) {
      x_max *= 4.0;
      continue;
    }

    const double lo = best == 0 ? 0.0 : xs[best - 1];
    const double hi = xs[best + 1];
    const double x_min = golden_min(log_bound, lo, hi);
    return std::exp(std::min(log_bound(x_min), best_v));
  }
  throw CertificationError("certify_delta: monotone tail never certified; bound appears unbounded below");
}

AprioriBound make_apriori_bound(const EnvelopeCurve& curve) {
  const double delta = certify_delta(curve);
  const double big_c =
      std::exp(curve.mu(curve.horizon()) * std::pow(curve.k_eps(), curve.params().q()));
  return {curve, delta, big_c};
}

MeanWithError apriori_rhs(const AprioriBound& bound, const Vec& xi_plus_g0) {
  if (xi_plus_g0.size() == 0) throw std::invalid_argument("apriori_rhs: empty sample");
  const double mu_t = bound.curve.mu(bound.curve.horizon());
  const auto& p = bound.curve.params();
  const std::ptrdiff_t n = xi_plus_g0.size();
  double mean = 0.0;
  std::size_t sat = 0;
  Vec vals(n);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const SatValue v = psi(std::abs(xi_plus_g0(i)), mu_t, p);
    vals(i) = v.value;
    sat += v.saturated ? 1 : 0;
    mean += v.value;
  }
  mean /= static_cast<double>(n);
  // deviations against the first sample so degenerate laws report zero error
  double var = 0.0;
  const double shift_mean = mean - vals(0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double d = (vals(i) - vals(0)) - shift_mean;
    var += d * d;
  }
  var = n > 1 ? var / static_cast<double>(n - 1) : 0.0;
  return {bound.big_c * mean, bound.big_c * std::sqrt(var / static_cast<double>(n)), sat};
}

namespace {

// zero node followed by count-1 log-spaced nodes up to hi
std::vector<double> log_nodes(double hi, int count) {
  std::vector<double> out;
  out.reserve(count);
  out.push_back(0.0);
  const double lo = hi * 1e-5;
  const double lr = count > 2 ? std::log(hi / lo) / (count - 2) : 0.0;
  for (int i = 0; i + 1 < count; ++i) out.push_back(lo * std::exp(lr * i));
  return out;
}

}  // namespace

EnvelopeCheck verify_envelope_inequality(const EnvelopeCurve& curve, double delta,
                                         const GridSpec& grid, double tol) {
  const auto& p = curve.params();
  const bool with_drift = curve.kind() == CurveKind::BarWithDrift;
  const TestFunction tf(curve);
  const double log_delta = std::log(delta);

  EnvelopeCheck out;
  const auto xs = log_nodes(grid.x_hi, grid.x_count);
  const auto zs = log_nodes(grid.z_hi, grid.z_count);
  for (int is = 0; is < grid.s_count; ++is) {
    const double s = curve.horizon() * is / (grid.s_count - 1);
    for (double x : xs) {
      const auto r = tf.ratios(s, x);
      // delta / phi, computed in logs so huge phi never overflows
      const double dscaled = std::exp(log_delta - r.exponent);
      for (double z : zs) {
        const double za = std::pow(z, p.alpha);
        const double drift_term = with_drift ? r.px * (p.beta * x + p.gamma * za)
                                             : r.px * p.gamma * za;
        const double lhs = -drift_term + 0.5 * (r.pxx - dscaled) * z * z + r.ps;
        ++out.nodes;
        if (lhs < out.min_residual) {
          out.min_residual = lhs;
          out.argmin = {s, x, z, lhs};
        }
        if (lhs < -tol) out.violations.push_back({s, x, z, lhs});
      }
    }
  }
  return out;
}

}  // namespace subq::envelope
