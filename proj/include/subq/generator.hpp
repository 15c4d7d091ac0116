#pragma once

#include "subq/envelope.hpp"
#include "subq/types.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace subq::gen {

using envelope::SubQuadParams;

using GenFn = std::function<double(double t, const Vec& x, double y, const Vec& z)>;

/// Power envelope k (1 + |x|^p), the Markovian stand-in for the offset process.
struct GrowthDecl {
  double p = 1.0;
  double k = 0.0;
};

// Declared constants for the theta-difference growth condition: the offset is
// f(x) = f0 + fx_k |x|^{fx_p}.
struct H2PrimeDecl {
  double f0 = 0.0;
  double fx_k = 0.0;
  double fx_p = 1.0;
  double k = 0.0;
  double beta = 0.0;
  double gamma = 1.0;
  double alpha = 1.5;
  bool mirrored = false;  // check the lower-indicator variant instead
};

struct MarkovGenerator {
  std::string name = "custom";
  GenFn eval;
  SubQuadParams declared{1.5, 0.0, 1.0};

  std::optional<GrowthDecl> growth;  // x-growth constants (p, k)

  // one-sided / two-sided envelope declarations: f(x) = f0 + fx_k |x|^{fx_p},
  // |g| <= f + h(|y|) + c_quad |z|^2 with h nondecreasing, h(0) = 0
  double f0 = 0.0;
  double fx_k = 0.0;
  double fx_p = 1.0;
  std::function<double(double)> h_of_y;
  double c_quad = 0.0;

  std::optional<H2PrimeDecl> h2p;

  // declared analytic properties, checked for concordance against the sampled tests
  bool flag_h1 = false;
  bool flag_h1dp = false;
  bool flag_h2 = false;
  bool flag_h2prime = false;
  bool convex = false;
  bool concave = false;
  bool xt_independent = false;  // eval ignores (t, x); enables tabulated regularization

  double operator()(double t, const Vec& x, double y, const Vec& z) const {
    return eval(t, x, y, z);
  }
  double f_envelope(const Vec& x) const {
    return f0 + (fx_k != 0.0 ? fx_k * std::pow(x.norm(), fx_p) : 0.0);
  }
};

enum class Assumption { H1, H1Prime, H1DoublePrime, H2, H2Prime, A1, A2 };

std::string to_string(Assumption a);

struct Violation {
  std::string node;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct AssumptionReport {
  Assumption which = Assumption::H1;
  std::size_t sampled_nodes = 0;
  std::vector<Violation> violations;
  double margin = std::numeric_limits<double>::infinity();  // min(rhs - lhs)
  std::string note;
  bool pass() const { return violations.empty(); }
};

// Deterministic probe nodes for the sampled inequality checks.
struct SampleGrid {
  std::vector<double> ts;
  std::vector<Vec> xs;
  std::vector<double> ys;
  std::vector<Vec> zs;
};
SampleGrid default_sample_grid(int dim_x = 1, int dim_z = 1, double t_max = 1.0,
                               double x_hi = 2.0, double y_hi = 3.0, double z_cap = 5.0);

AssumptionReport check_H1(const MarkovGenerator& g, const SampleGrid& grid);

enum class OneSidedVariant { H1Prime, H1DoublePrime };
AssumptionReport check_H1_one_sided(const MarkovGenerator& g, const SampleGrid& grid,
                                    OneSidedVariant variant);

/// Midpoint convexity/concavity test over pairs drawn from the grid.
AssumptionReport check_H2(const MarkovGenerator& g, const SampleGrid& grid);

// Probe tuple for the theta-difference condition, expressed directly in the
// difference variables so that theta close to 1 stays well conditioned:
// y1 = (1-theta) dy + theta ybar,  z1 = (1-theta) dz + theta zbar.
struct ThetaTuple {
  double t = 0.0;
  Vec x;
  double dy = 0.0;
  Vec dz;
  double ybar = 0.0;
  Vec zbar;
  double theta = 0.5;
};
std::vector<ThetaTuple> default_theta_tuples(int dim_x = 1, int dim_z = 1, double t_max = 1.0);

AssumptionReport check_H2_prime(const MarkovGenerator& g, const std::vector<ThetaTuple>& tuples);

/// Sampled growth/regularity check pairing a generator with its terminal function.
AssumptionReport check_A2(const MarkovGenerator& g,
                          const std::function<double(const Vec&)>& terminal,
                          const SampleGrid& grid);

// Positive part capped at n, negative part capped at p: clamp(g, -p, n).
struct TruncatedGenerator {
  MarkovGenerator base;
  double n = 1.0;
  double p = 1.0;
  double operator()(double t, const Vec& x, double y, const Vec& z) const {
    return std::clamp(base(t, x, y, z), -p, n);
  }
  MarkovGenerator as_markov() const;
};
TruncatedGenerator truncate(const MarkovGenerator& g, double n, double p);
double truncate_scalar(double v, double n, double p);
Vec truncate_terminal(const Vec& xi, double n, double p);

// Frozen (Y, Z) path estimates on a time grid, as produced by the backward solver.
struct FrozenPaths {
  Vec times;            // N+1 grid points
  Mat y;                // (N+1) x paths
  std::vector<Mat> z;   // N entries of (d x paths)
};

// Difference generator of the theta-technique.  Convex mode shifts around the
// primed solution, Concave mode around the primal one.
class ThetaDifferenceGenerator {
 public:
  enum class Mode { Convex, Concave };

  ThetaDifferenceGenerator(MarkovGenerator g, MarkovGenerator g_prime, double theta,
                           FrozenPaths primal, FrozenPaths primed, Mode mode);

  /// Value at time-grid index i, path j, test point (y, z); t and x supplied by the caller.
  double eval(int i, int j, double t, const Vec& x, double y, const Vec& z) const;

  double theta() const { return theta_; }
  Mode mode() const { return mode_; }

 private:
  MarkovGenerator g_;
  MarkovGenerator gp_;
  double theta_;
  FrozenPaths primal_;
  FrozenPaths primed_;
  Mode mode_;
};

struct InfConvParams {
  double half_width = 10.0;
  double step = 0.05;
};

struct InfConvStats {
  std::size_t queries = 0;
  std::size_t boundary_hits = 0;  // inner minimizer pinned to the search box edge
  std::size_t out_of_box = 0;     // query clamped into the tabulated box
};

// Lipschitz regularization by double inf-convolution over a bounded search box
// (z restricted to one dimension).  Generators that ignore (t, x) get a
// precomputed table with separable two-pass transforms; everything else falls
// back to a direct grid scan per query.
MarkovGenerator inf_convolution(const MarkovGenerator& g, double m, double l,
                                const InfConvParams& box = {},
                                std::shared_ptr<InfConvStats> stats = nullptr);

// Named generator registry (selectable from experiment configs).
MarkovGenerator make_generator(const std::string& name,
                               const std::map<std::string, double>& params = {});
std::vector<std::string> generator_names();

// Terminal function registry.
std::function<double(const Vec&)> make_terminal(const std::string& name,
                                                const std::map<std::string, double>& params = {});
std::vector<std::string> terminal_names();

}  // namespace subq::gen
