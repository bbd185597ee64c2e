#pragma once

// Hydrodynamic constants, phase classification, scaling plans and the
// stationary q-Geometric gap law of q-TASEP.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qtasep/errors.hpp"
#include "qtasep/qfun.hpp"
#include "qtasep/rng.hpp"

namespace qtasep {

/// One particle with a non-default jump rate.
struct RatePerturbation {
  std::size_t index;  // 1-based particle label
  double rate;
};

/// Finitely supported rate profile: listed particles carry their own rate,
/// every other particle has rate 1.
class RateProfile {
 public:
  RateProfile() = default;
  explicit RateProfile(std::vector<RatePerturbation> perturbations)
      : perturbations_(std::move(perturbations)) {
    std::set<std::size_t> seen;
    for (const auto& p : perturbations_) {
      if (p.index < 1) throw ProfileError("particle indices are 1-based");
      if (!(p.rate > 0.0) || !std::isfinite(p.rate)) {
        throw ProfileError("rates must be finite and strictly positive");
      }
      if (!seen.insert(p.index).second) {
        throw ProfileError("duplicate particle index " + std::to_string(p.index));
      }
    }
    std::sort(perturbations_.begin(), perturbations_.end(),
              [](const auto& a, const auto& b) { return a.index < b.index; });
  }

  /// First k particles get rate `rate` (the slow particles lead the pack).
  static RateProfile leading(std::size_t k, double rate) {
    std::vector<RatePerturbation> v;
    for (std::size_t i = 1; i <= k; ++i) v.push_back({i, rate});
    return RateProfile(std::move(v));
  }

  const std::vector<RatePerturbation>& perturbations() const { return perturbations_; }
  bool empty() const { return perturbations_.empty(); }

  double rate_of(std::size_t index) const {
    for (const auto& p : perturbations_) {
      if (p.index == index) return p.rate;
    }
    return 1.0;
  }

  std::size_t max_index() const {
    return perturbations_.empty() ? 0 : perturbations_.back().index;
  }

  /// Slowest rate, capped at 1.
  double alpha() const {
    double a = 1.0;
    for (const auto& p : perturbations_) a = std::min(a, p.rate);
    return a;
  }

  /// Number of particles at the slowest rate; 0 when alpha = 1.
  std::size_t k() const {
    const double a = alpha();
    if (a >= 1.0) return 0;
    return static_cast<std::size_t>(std::count_if(
        perturbations_.begin(), perturbations_.end(), [a](const auto& p) { return p.rate == a; }));
  }

  /// A = log_q(alpha) >= 0.
  double A(const QParams& q) const { return std::log(alpha()) / q.log(); }

 private:
  std::vector<RatePerturbation> perturbations_;
};

enum class Phase { GUE, Critical, Gaussian };

inline std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::GUE: return "GUE";
    case Phase::Critical: return "Critical";
    case Phase::Gaussian: return "Gaussian";
  }
  return "?";
}

inline void require_theta(double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw DomainError("theta must be > 0");
}

inline void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0,1]");
}

inline double kappa(const QParams& q, double theta) {
  require_theta(theta);
  return qdigamma_prime(theta, q) / (q.log() * q.log() * q.pow(theta));
}

inline double f(const QParams& q, double theta) {
  require_theta(theta);
  const double lq = q.log();
  return qdigamma_prime(theta, q) / (lq * lq) - qdigamma(theta, q) / lq - std::log1p(-q.value()) / lq;
}

inline double chi(const QParams& q, double theta) {
  require_theta(theta);
  return (qdigamma_prime(theta, q) * q.log() - qdigamma_second(theta, q)) / 2.0;
}

inline double g(const QParams& q, double theta, double alpha) {
  require_theta(theta);
  require_alpha(alpha);
  const double lq = q.log();
  const double A = std::log(alpha) / lq;
  return qdigamma_prime(theta, q) / (lq * lq) * alpha / q.pow(theta) - qdigamma(A, q) / lq -
         std::log1p(-q.value()) / lq;
}

inline double sigma(const QParams& q, double theta, double alpha) {
  require_theta(theta);
  require_alpha(alpha);
  const double A = std::log(alpha) / q.log();
  return qdigamma_prime(theta, q) * alpha / q.pow(theta) - qdigamma_prime(A, q);
}

struct HydroConstants {
  double kappa;
  double f;
  double chi;
  // Only defined when alpha < 1 (otherwise log_q(alpha) = 0 is a pole of Psi_q).
  std::optional<double> g;
  std::optional<double> sigma;
};

inline HydroConstants hydro_constants(const QParams& q, double theta, double alpha) {
  require_theta(theta);
  require_alpha(alpha);
  HydroConstants h{kappa(q, theta), f(q, theta), chi(q, theta), std::nullopt, std::nullopt};
  if (!(h.chi > 0.0)) throw ToleranceError("chi(q, theta) is not positive");
  if (alpha < 1.0) {
    h.g = g(q, theta, alpha);
    h.sigma = sigma(q, theta, alpha);
  }
  return h;
}

inline constexpr double kDefaultBoundaryTol = 1e-12;

/// Relative comparison of alpha against q^theta.
inline Phase classify_phase(const QParams& q, double theta, double alpha,
                            double boundary_tol = kDefaultBoundaryTol) {
  require_theta(theta);
  const double qt = q.pow(theta);
  const double tol = boundary_tol * qt;
  if (std::abs(qt - alpha) <= tol) return Phase::Critical;
  return qt < alpha ? Phase::GUE : Phase::Gaussian;
}

inline Phase classify_phase(const QParams& q, double theta, const RateProfile& profile,
                            double boundary_tol = kDefaultBoundaryTol) {
  return classify_phase(q, theta, profile.alpha(), boundary_tol);
}

/// Limit of X_N(kappa N)/N.
inline double lln_position(const QParams& q, double theta, double alpha) {
  require_theta(theta);
  require_alpha(alpha);
  if (alpha > q.pow(theta)) return f(q, theta) - 1.0;
  return g(q, theta, alpha) - 1.0;
}

/// Time horizon, centering and fluctuation scale for X_N at one (q, theta, c, N).
struct ScalingPlan {
  std::size_t N;
  double c;
  Phase phase;
  double tau;
  double p;
  double fluct_scale;  // negative: larger X means smaller xi

  double xi_of_position(double X) const { return (X - p) / fluct_scale; }
  double position_of_xi(double xi) const { return p + fluct_scale * xi; }
};

/// The KPZ-type plan (GUE and Critical phases): N^{2/3} time shift and
/// N^{1/3} fluctuations.
inline ScalingPlan kpz_scaling(const QParams& q, double theta, double c, std::size_t N, Phase phase) {
  const double n = static_cast<double>(N);
  const double k = kappa(q, theta);
  const double ff = f(q, theta);
  const double ch = chi(q, theta);
  const double lq = q.log();
  ScalingPlan s{N, c, phase, 0.0, 0.0, 0.0};
  s.tau = k * n + c / q.pow(theta) * std::cbrt(n * n);
  s.p = (ff - 1.0) * n + c * std::cbrt(n * n) - c * c * lq * lq * lq / (4.0 * ch) * std::cbrt(n);
  s.fluct_scale = std::cbrt(ch) / lq * std::cbrt(n);
  return s;
}

/// Shock-phase plan: N^{1/2} time shift and N^{1/2} fluctuations.
inline ScalingPlan gaussian_scaling(const QParams& q, double theta, double alpha, double c,
                                    std::size_t N) {
  const double n = static_cast<double>(N);
  ScalingPlan s{N, c, Phase::Gaussian, 0.0, 0.0, 0.0};
  s.tau = kappa(q, theta) * n + c * std::sqrt(n) / alpha;
  s.p = (g(q, theta, alpha) - 1.0) * n + c * std::sqrt(n);
  s.fluct_scale = std::sqrt(sigma(q, theta, alpha)) / q.log() * std::sqrt(n);
  return s;
}

inline ScalingPlan scaling_plan(const QParams& q, double theta, double c, std::size_t N,
                                const RateProfile& profile,
                                double boundary_tol = kDefaultBoundaryTol) {
  require_theta(theta);
  if (N < 1) throw DomainError("N must be >= 1");
  const Phase phase = classify_phase(q, theta, profile, boundary_tol);
  if (phase == Phase::Gaussian) return gaussian_scaling(q, theta, profile.alpha(), c, N);
  return kpz_scaling(q, theta, c, N, phase);
}

enum class ShapeBranch { Curved, Straight };

struct ShapePoint {
  double theta;
  double x;
  double y;
  ShapeBranch branch;
};

/// Limit shape of (X_N(tau)+N, N)/tau: (f/kappa, 1/kappa) outside the shock,
/// (g/kappa, 1/kappa) inside it.
inline std::vector<ShapePoint> limit_shape(const QParams& q, const RateProfile& profile,
                                           const std::vector<double>& theta_grid) {
  const double alpha = profile.alpha();
  std::vector<ShapePoint> out;
  out.reserve(theta_grid.size());
  double prev = 0.0;
  for (double th : theta_grid) {
    require_theta(th);
    if (th <= prev) throw DomainError("theta_grid must be strictly increasing");
    prev = th;
    const double k = kappa(q, th);
    if (alpha > q.pow(th)) {
      out.push_back({th, f(q, th) / k, 1.0 / k, ShapeBranch::Curved});
    } else {
      out.push_back({th, g(q, th, alpha) / k, 1.0 / k, ShapeBranch::Straight});
    }
  }
  return out;
}

/// mu_r(gap = k) = (r;q)_inf r^k / (q;q)_k.
inline double qgeom_pmf(double r, const QParams& q, std::size_t k) {
  if (!(r >= 0.0 && r < 1.0)) throw DomainError("q-Geometric parameter must lie in [0,1)");
  if (r == 0.0) return k == 0 ? 1.0 : 0.0;
  const double head = qpoch_inf(r, q).real();
  const double qq = qpoch_finite(q.value(), q, k).real();
  return head * std::pow(r, static_cast<double>(k)) / qq;
}

/// Inverse-CDF sampler for the q-Geometric law; the table stops once the
/// remaining tail mass is below 1e-14.
class QGeomSampler {
 public:
  QGeomSampler(double r, const QParams& q) {
    if (!(r >= 0.0 && r < 1.0)) throw DomainError("q-Geometric parameter must lie in [0,1)");
    const double head = r == 0.0 ? 1.0 : qpoch_inf(r, q).real();
    double term = head;  // pmf(0)
    double cum = 0.0;
    for (std::size_t k = 0;; ++k) {
      cum += term;
      cdf_.push_back(cum);
      if (1.0 - cum < 1e-14 || term == 0.0) break;
      if (k > 100000) throw NonConvergence("q-Geometric table did not close");
      // pmf(k+1) / pmf(k) = r / (1 - q^{k+1})
      term *= r / q.one_minus_pow(static_cast<double>(k + 1));
    }
    cdf_.back() = 1.0;
  }

  template <typename Rng>
  std::size_t operator()(Rng& rng) const {
    const double u = to_unit(rng());
    return static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
  }

  const std::vector<double>& cdf() const { return cdf_; }

 private:
  std::vector<double> cdf_;
};

template <typename Rng>
std::size_t qgeom_sample(double r, const QParams& q, Rng& rng) {
  return QGeomSampler(r, q)(rng);
}

/// Stationary density at macroscopic parameter theta (gap law with r = q^theta).
inline double density(const QParams& q, double theta) {
  require_theta(theta);
  const double lq = q.log();
  return lq / (lq + std::log1p(-q.value()) + qdigamma(theta, q));
}

}  // namespace qtasep
