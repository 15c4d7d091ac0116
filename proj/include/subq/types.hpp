#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace subq {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kDefaultExpCap = 700.0;

// Exponential that refuses to overflow: values whose exponent exceeds the cap
// are clamped and flagged so callers can count saturated samples instead of
// propagating inf through statistics.
struct SatValue {
  double value = 0.0;
  bool saturated = false;
};

inline SatValue sat_exp(double exponent, double cap = kDefaultExpCap) {
  if (exponent > cap) return {std::exp(cap), true};
  return {std::exp(exponent), false};
}

// log(exp(a) + exp(b)); tolerates -inf arguments.
inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// log(expm1(x)) for x >= 0; -inf at x = 0.
inline double log_expm1(double x) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  if (x > 30.0) return x + std::log1p(-std::exp(-x));
  return std::log(std::expm1(x));
}

inline double sgn(double x) { return x > 0.0 ? 1.0 : -1.0; }

class PicardDivergenceError : public std::runtime_error {
 public:
  explicit PicardDivergenceError(const std::string& what) : std::runtime_error(what) {}
};

class InstabilityError : public std::runtime_error {
 public:
  explicit InstabilityError(const std::string& what) : std::runtime_error(what) {}
};

class CertificationError : public std::runtime_error {
 public:
  explicit CertificationError(const std::string& what) : std::runtime_error(what) {}
};

class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

class PreconditionError : public std::runtime_error {
 public:
  explicit PreconditionError(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace subq
