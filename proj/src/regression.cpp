#include "subq/regression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace subq::bsde {

namespace {

double quantile_sorted(std::vector<double>& work, double q) {
  std::sort(work.begin(), work.end());
  const double pos = q * (work.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, work.size() - 1);
  const double w = pos - lo;
  return (1.0 - w) * work[lo] + w * work[hi];
}

// multi-indices with total degree <= degree over `dims` coordinates
void enumerate_indices(int dims, int degree, std::vector<int>& cur,
                       std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == dims) {
    out.push_back(cur);
    return;
  }
  const int used = std::accumulate(cur.begin(), cur.end(), 0);
  for (int d = 0; d + used <= degree; ++d) {
    cur.push_back(d);
    enumerate_indices(dims, degree, cur, out);
    cur.pop_back();
  }
}

std::vector<std::vector<int>> multi_indices(int dims, int degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  enumerate_indices(dims, degree, cur, out);
  return out;
}

}  // namespace

FittedBasis::FittedBasis(const Mat& states, const RegressionBasis& spec, SolveDiagnostics* diag)
    : spec_(spec), n_paths_(static_cast<int>(states.cols())) {
  const int n = static_cast<int>(states.rows());
  std::vector<double> lo(n), hi(n);
  for (int c = 0; c < n; ++c) {
    std::vector<double> work(states.row(c).begin(), states.row(c).end());
    lo[c] = quantile_sorted(work, spec.clip_lo_q);
    hi[c] = quantile_sorted(work, spec.clip_hi_q);
    if (hi[c] - lo[c] > 1e-12) active_dims_.push_back(c);
  }
  if (active_dims_.empty()) {
    constant_only_ = true;
    return;
  }
  center_.resize(static_cast<int>(active_dims_.size()));
  halfwidth_.resize(static_cast<int>(active_dims_.size()));
  for (std::size_t a = 0; a < active_dims_.size(); ++a) {
    center_(static_cast<int>(a)) = 0.5 * (hi[active_dims_[a]] + lo[active_dims_[a]]);
    halfwidth_(static_cast<int>(a)) = 0.5 * (hi[active_dims_[a]] - lo[active_dims_[a]]);
  }
  const int adims = static_cast<int>(active_dims_.size());

  if (spec.kind == RegressionBasis::Kind::PiecewiseConstantBins) {
    int bins = std::max(1, spec.n_bins);
    for (;;) {
      total_bins_ = 1;
      for (int a = 0; a < adims; ++a) total_bins_ *= bins;
      if (total_bins_ > 65536)
        throw std::invalid_argument("FittedBasis: bin basis too large for this dimension");
      bin_index_.assign(static_cast<std::size_t>(n_paths_), 0);
      std::vector<int> counts(static_cast<std::size_t>(total_bins_), 0);
      for (int j = 0; j < n_paths_; ++j) {
        int idx = 0;
        for (int a = 0; a < adims; ++a) {
          const double v = states(active_dims_[static_cast<std::size_t>(a)], j);
          double u = (v - (center_(a) - halfwidth_(a))) / (2.0 * halfwidth_(a));
          u = std::clamp(u, 0.0, 1.0 - 1e-12);
          idx = idx * bins + static_cast<int>(u * bins);
        }
        bin_index_[static_cast<std::size_t>(j)] = idx;
        ++counts[static_cast<std::size_t>(idx)];
      }
      const bool any_empty = std::any_of(counts.begin(), counts.end(),
                                         [](int c) { return c == 0; });
      if (!any_empty || bins == 1) break;
      bins /= 2;
      if (diag) {
        ++diag->rank_fallbacks;
        diag->notes.push_back("bin basis fell back to " + std::to_string(bins) + " bins per dim");
      }
    }
    return;
  }

  int degree = std::max(0, spec.degree);
  for (;;) {
    const auto idx = multi_indices(adims, degree);
    design_.resize(n_paths_, static_cast<int>(idx.size()));
    Vec u(adims);
    for (int j = 0; j < n_paths_; ++j) {
      for (int a = 0; a < adims; ++a) {
        const double v = states(active_dims_[static_cast<std::size_t>(a)], j);
        u(a) = std::clamp((v - center_(a)) / halfwidth_(a), -1.0, 1.0);
      }
      for (std::size_t col = 0; col < idx.size(); ++col) {
        double prod = 1.0;
        for (int a = 0; a < adims; ++a)
          for (int rep = 0; rep < idx[col][static_cast<std::size_t>(a)]; ++rep) prod *= u(a);
        design_(j, static_cast<int>(col)) = prod;
      }
    }
    qr_.compute(design_);
    if (qr_.rank() == design_.cols() || degree == 0) {
      if (qr_.rank() < design_.cols()) {
        constant_only_ = true;  // pathological sample; fall back to the plain mean
        if (diag) {
          ++diag->rank_fallbacks;
          diag->notes.push_back("design rank-deficient at degree 0; using the sample mean");
        }
      }
      return;
    }
    --degree;
    if (diag) {
      ++diag->rank_fallbacks;
      diag->notes.push_back("polynomial basis fell back to degree " + std::to_string(degree));
    }
  }
}

int FittedBasis::n_columns() const {
  if (constant_only_) return 1;
  if (spec_.kind == RegressionBasis::Kind::PiecewiseConstantBins) return total_bins_;
  return static_cast<int>(design_.cols());
}

Vec FittedBasis::fit_predict_bins(const Vec& targets) const {
  std::vector<double> sums(static_cast<std::size_t>(total_bins_), 0.0);
  std::vector<int> counts(static_cast<std::size_t>(total_bins_), 0);
  for (int j = 0; j < n_paths_; ++j) {
    sums[static_cast<std::size_t>(bin_index_[static_cast<std::size_t>(j)])] += targets(j);
    ++counts[static_cast<std::size_t>(bin_index_[static_cast<std::size_t>(j)])];
  }
  Vec out(n_paths_);
  for (int j = 0; j < n_paths_; ++j) {
    const auto b = static_cast<std::size_t>(bin_index_[static_cast<std::size_t>(j)]);
    out(j) = sums[b] / counts[b];
  }
  return out;
}

Vec FittedBasis::fit_predict(const Vec& targets) const {
  if (targets.size() != n_paths_)
    throw std::invalid_argument("FittedBasis: target length mismatch");
  if (constant_only_) return Vec::Constant(n_paths_, targets.mean());
  if (spec_.kind == RegressionBasis::Kind::PiecewiseConstantBins)
    return fit_predict_bins(targets);
  return design_ * qr_.solve(targets);
}

}  // namespace subq::bsde
