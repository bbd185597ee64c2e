#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "qtasep/errors.hpp"

namespace qtasep {

/// Sorted sample.
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(std::vector<double> samples) : s_(std::move(samples)) {
    if (s_.empty()) throw ValidationError("EmpiricalDistribution needs at least one sample");
    for (double v : s_) {
      if (std::isnan(v)) throw ValidationError("EmpiricalDistribution: NaN sample");
    }
    std::sort(s_.begin(), s_.end());
  }

  std::size_t n() const { return s_.size(); }
  const std::vector<double>& samples() const { return s_; }

  double mean() const {
    double m = 0.0;
    for (double v : s_) m += v;
    return m / static_cast<double>(s_.size());
  }

  /// Unbiased sample variance (0 for a single sample).
  double variance() const {
    if (s_.size() < 2) return 0.0;
    const double m = mean();
    double acc = 0.0;
    for (double v : s_) acc += (v - m) * (v - m);
    return acc / static_cast<double>(s_.size() - 1);
  }

 private:
  std::vector<double> s_;
};

/// Right-continuous ECDF: fraction of samples <= x.
inline double ecdf(const EmpiricalDistribution& d, double x) {
  const auto& s = d.samples();
  return static_cast<double>(std::upper_bound(s.begin(), s.end(), x) - s.begin()) /
         static_cast<double>(s.size());
}

/// sup_i max(|i/n - F(x_i)|, |(i-1)/n - F(x_i)|) over the sorted sample.
template <typename Cdf>
double ks_statistic(const EmpiricalDistribution& d, Cdf&& cdf) {
  const auto& s = d.samples();
  const double n = static_cast<double>(s.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double F = cdf(s[i]);
    const double hi = static_cast<double>(i + 1) / n;
    const double lo = static_cast<double>(i) / n;
    worst = std::max({worst, std::abs(hi - F), std::abs(lo - F)});
  }
  return worst;
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace qtasep
