#pragma once

#include "subq/types.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace subq::envelope {

// Structural constants of a driver with (one-sided) linear growth in y and
// |z|^alpha growth in z, 1 < alpha < 2.  alpha_star is the conjugate of alpha;
// q() = 2/alpha_star is the power carried by the psi/phi exponents.
struct SubQuadParams {
  double alpha = 1.5;
  double beta = 0.0;
  double gamma = 1.0;

  double alpha_star() const { return alpha / (alpha - 1.0); }
  double q() const { return 2.0 * (alpha - 1.0) / alpha; }
  void validate() const;
};

/// Offset constant of the test function, finite and positive for eps > 0.
double k_alpha_eps(double alpha, double eps);

// Multiplicative constants of the two closed-form exponent curves.  The log
// versions stay finite for alpha close to 2 where the plain values overflow.
double log_c_tilde(double alpha, double gamma);
double log_c_bar(double alpha, double beta, double gamma);
double c_tilde(double alpha, double gamma);
double c_bar(double alpha, double beta, double gamma);  // requires beta > 0

struct StructuralConstants {
  double c_tilde;
  std::optional<double> c_bar;  // absent when beta == 0
};
StructuralConstants structural_constants(const SubQuadParams& p);

enum class CurveKind { TildeNoDrift, BarWithDrift };

// The nondecreasing exponent curve mu on [0,T] with mu(0) = eps, i.e. the
// closed-form solution of
//   mu' = 2(alpha-1) beta mu / alpha + C_{alpha,gamma} (1+eps) mu^{-2(alpha-1)/(2-alpha)}.
// Evaluation goes through logs so that alpha close to 2 (where the structural
// constant is astronomically large) stays finite.
class EnvelopeCurve {
 public:
  EnvelopeCurve(SubQuadParams params, double eps, double horizon, CurveKind kind);

  /// Picks the branch from params.beta.
  static EnvelopeCurve make(SubQuadParams params, double eps, double horizon);

  double mu(double s) const;
  double mu_prime(double s) const;

  double epsilon() const { return eps_; }
  double horizon() const { return horizon_; }
  double k_eps() const { return k_eps_; }
  CurveKind kind() const { return kind_; }
  const SubQuadParams& params() const { return params_; }
  double c_const() const { return std::exp(log_c_); }  // may overflow to +inf

 private:
  double log_inner(double s) const;
  void check_domain(double s) const;

  SubQuadParams params_;
  double eps_;
  double horizon_;
  CurveKind kind_;
  double k_eps_;
  double log_c_;
};

/// eps -> 0 limit of mu(T); the infimum of admissible integrability exponents.
double mu_zero(const SubQuadParams& p, double horizon);

// Inverts the strictly increasing map eps -> mu_eps(T) by bisection.
// Throws InfeasibleError when mu_target <= mu_zero(p, horizon).
double match_epsilon(const SubQuadParams& p, double horizon, double mu_target);

struct PhiValues {
  double phi;
  double phi_x;
  double phi_xx;
  double phi_s;
  bool saturated;
};

// phi(s,x) = exp(mu_s (x + k)^q) together with its partials.  ratios() exposes
// the exp-free quantities phi_x/phi, phi_xx/phi, phi_s/phi and the raw
// exponent, which is what the inequality grid check works with.
class TestFunction {
 public:
  explicit TestFunction(EnvelopeCurve curve, double exp_cap = kDefaultExpCap);

  PhiValues eval(double s, double x) const;

  struct Ratios {
    double exponent;  // mu_s (x+k)^q
    double px;        // phi_x / phi
    double pxx;       // phi_xx / phi
    double ps;        // phi_s / phi
  };
  Ratios ratios(double s, double x) const;

  const EnvelopeCurve& curve() const { return curve_; }

 private:
  EnvelopeCurve curve_;
  double cap_;
};

/// psi(x, mu) = exp(mu x^q) with saturation flag; psi(0,mu) = psi(x,0) = 1.
SatValue psi(double x, double mu, const SubQuadParams& p, double cap = kDefaultExpCap);

// Certified positive lower bound for phi_xx - (curvature slack): the infimum
// over x >= 0 of  exp(eps (x+k)^q) * 2 (alpha-1)^2 eps / (alpha^2 (x+k)^{2/alpha}).
// Computed on a log-spaced grid + golden-section refinement, with a
// monotone-tail certificate; throws CertificationError if the tail never
// certifies after expansion.
double certify_delta(const EnvelopeCurve& curve);

struct AprioriBound {
  EnvelopeCurve curve;
  double delta;  // certified |Z|^2 energy coefficient
  double big_c;  // exp(mu(T) k^q), the constant in front of the conditional mean
};
AprioriBound make_apriori_bound(const EnvelopeCurve& curve);

struct MeanWithError {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t saturated = 0;
};

// Right side of the a-priori bound at t = 0: big_c times the empirical mean of
// psi(sample_i, mu(T)), with its Monte-Carlo standard error.
MeanWithError apriori_rhs(const AprioriBound& bound, const Vec& xi_plus_g0);

struct GridSpec {
  int s_count = 50;
  int x_count = 50;
  int z_count = 50;
  double x_hi = 50.0;
  double z_hi = 100.0;
};

struct EnvelopeCheck {
  struct Node {
    double s = 0.0, x = 0.0, z = 0.0;
    double residual = 0.0;
  };
  double min_residual = std::numeric_limits<double>::infinity();
  Node argmin;
  std::size_t nodes = 0;
  std::vector<Node> violations;  // residual < -tol
  bool pass(double tol = 1e-9) const { return min_residual >= -tol; }
};

// Evaluates the drift inequality of the test function at every grid node and
// reports the minimum residual.  The residual is the left side divided by phi
// (same sign, but O(1) magnitudes, so the roundoff tolerance is meaningful).
EnvelopeCheck verify_envelope_inequality(const EnvelopeCurve& curve, double delta,
                                         const GridSpec& grid = {}, double tol = 1e-9);

}  // namespace subq::envelope
