#pragma once

#include "subq/types.hpp"

#include <string>
#include <vector>

namespace subq::bsde {

struct RegressionBasis {
  enum class Kind { Polynomial, PiecewiseConstantBins };
  Kind kind = Kind::Polynomial;
  int degree = 4;       // total degree across coordinates
  int n_bins = 32;      // per coordinate for the bin basis
  double clip_lo_q = 0.001;
  double clip_hi_q = 0.999;
};

struct SolveDiagnostics {
  int rank_fallbacks = 0;
  std::vector<std::string> notes;
};

// Per-time-step conditional-expectation estimator: least squares on basis
// functions of the state, evaluated back at the sample.  Coordinates are
// clipped at empirical quantiles and rescaled to [-1, 1] before the monomials
// are formed; rank-deficient designs fall back to a lower degree (or fewer
// bins) and the fallback is recorded.
class FittedBasis {
 public:
  FittedBasis(const Mat& states, const RegressionBasis& spec, SolveDiagnostics* diag);

  /// Least-squares fit of the targets, then prediction at the same sample points.
  Vec fit_predict(const Vec& targets) const;

  int n_columns() const;

 private:
  Vec fit_predict_bins(const Vec& targets) const;

  RegressionBasis spec_;
  bool constant_only_ = false;
  std::vector<int> active_dims_;
  Vec center_, halfwidth_;   // per active dim
  Mat design_;               // paths x columns (polynomial kind)
  Eigen::ColPivHouseholderQR<Mat> qr_;
  std::vector<int> bin_index_;  // per path (bin kind)
  int total_bins_ = 0;
  int n_paths_ = 0;
};

}  // namespace subq::bsde
