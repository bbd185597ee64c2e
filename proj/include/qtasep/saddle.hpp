#pragma once

// The steepest-descent skeleton behind the limit theorem: the actions f0 and
// g0, their perturbations, the slow-particle factor phi, and numerical
// checks of the critical-point and monotonicity identities they satisfy.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include "qtasep/errors.hpp"
#include "qtasep/hydro.hpp"
#include "qtasep/qfun.hpp"

namespace qtasep {

namespace detail {

inline void require_right_half_plane(const cplx& Z) {
  if (!(Z.real() > 0.0)) throw DomainError("requires Re Z > 0");
}

// Psi_q extended to complex Z through its series.
inline cplx qdigamma_complex(const cplx& Z, const QParams& q) {
  const SeriesTolerance tol{};
  const cplx s = sum_q_series<cplx>(q, tol, [&](std::size_t k) {
    const cplx p = q.pow(Z + static_cast<double>(k));
    return p / (1.0 - p);
  });
  return -std::log1p(-q.value()) + q.log() * s;
}

}  // namespace detail

/// -X log q Z + kappa q^Z + log(q^Z; q)_inf with X = f (the action f0) or
/// X = g (the shock-phase action g0).
class Action {
 public:
  static Action f0(const QParams& q, double theta) {
    return Action(q, theta, kappa(q, theta), f(q, theta), theta);
  }
  static Action g0(const QParams& q, double theta, double alpha) {
    return Action(q, theta, kappa(q, theta), g(q, theta, alpha), std::log(alpha) / q.log());
  }

  cplx operator()(const cplx& Z) const {
    detail::require_right_half_plane(Z);
    const cplx qz = q_.pow(Z);
    return -lin_ * q_.log() * Z + kappa_ * qz + log_qpoch_inf(qz, q_);
  }

  /// Re of the action at a point given through both W and q^W. Valid for
  /// any W off the zeros of (q^W; q)_inf, including Re W <= 0.
  double real_part(const cplx& W, const cplx& qW) const {
    return -lin_ * q_.log() * W.real() + kappa_ * qW.real() +
           detail::log_qpoch_inf_raw(qW, q_, SeriesTolerance{}).real();
  }
  double real_part(const cplx& W) const { return real_part(W, q_.pow(W)); }

  /// The action at real Z = x > 0 in extended precision, for finite
  /// differences whose roundoff would otherwise swamp the identities.
  long double real_axis(long double x) const {
    if (!(x > 0)) throw DomainError("real_axis requires x > 0");
    const long double lq = q_.log();
    const long double qx = std::exp(x * lq);
    long double s = 0;
    long double t = qx;
    const long double qv = q_.value();
    for (std::size_t k = 0; t > 1e-22L * (1 - qv); ++k) {
      s += std::log1p(-t);
      t *= qv;
    }
    return -static_cast<long double>(lin_) * lq * x + static_cast<long double>(kappa_) * qx + s;
  }

  const QParams& q() const { return q_; }
  double theta() const { return theta_; }
  /// The real critical point: theta for f0, A for g0.
  double critical_point() const { return critical_; }
  double kappa_value() const { return kappa_; }
  double linear_coefficient() const { return lin_; }

 private:
  Action(const QParams& q, double theta, double k, double lin, double critical)
      : q_(q), theta_(theta), kappa_(k), lin_(lin), critical_(critical) {}

  QParams q_;
  double theta_;
  double kappa_;
  double lin_;
  double critical_;
};

inline cplx f0(const cplx& Z, const QParams& q, double theta) { return Action::f0(q, theta)(Z); }

inline cplx f1(const cplx& Z, const QParams& q, double theta, double c) {
  detail::require_right_half_plane(Z);
  return -c * q.log() * Z + c * q.pow(Z - theta);
}

inline cplx f2(const cplx& Z, const QParams& q, double theta, double c, double x) {
  detail::require_right_half_plane(Z);
  const double ch = chi(q, theta);
  const double lq2 = q.log() * q.log();
  return c * c * lq2 * lq2 / (4.0 * ch) * Z - std::cbrt(ch) * x * Z;
}

inline cplx g0(const cplx& Z, const QParams& q, double theta, double alpha) {
  return Action::g0(q, theta, alpha)(Z);
}

inline cplx g1(const cplx& Z, const QParams& q, double theta, double alpha, double c, double x) {
  detail::require_right_half_plane(Z);
  return -Z * q.log() * c - std::sqrt(sigma(q, theta, alpha)) * x * Z + c / alpha * q.pow(Z);
}

/// f0' through Psi_q: Psi'_q(theta)/log q (q^{Z-theta} - 1) + Psi_q(theta) - Psi_q(Z).
inline cplx f0_prime_psi(const cplx& Z, const QParams& q, double theta) {
  detail::require_right_half_plane(Z);
  return qdigamma_prime(theta, q) / q.log() * (q.pow(Z - theta) - 1.0) + qdigamma(theta, q) -
         detail::qdigamma_complex(Z, q);
}

/// f0' as the positive-weight series
/// -log q sum_k q^{2k} (q^theta - q^Z)^2 / ((1 - q^{theta+k})^2 (1 - q^{Z+k})).
inline cplx f0_prime_series(const cplx& Z, const QParams& q, double theta) {
  detail::require_right_half_plane(Z);
  const cplx diff = q.pow(theta) - q.pow(Z);
  const cplx d2 = diff * diff;
  const cplx s = detail::sum_q_series<cplx>(q, SeriesTolerance{}, [&](std::size_t k) {
    const double kk = static_cast<double>(k);
    const double a = q.one_minus_pow(theta + kk);
    return q.pow(2.0 * kk) * d2 / (a * a * (1.0 - q.pow(Z + kk)));
  });
  return -q.log() * s;
}

namespace detail {

// Fourth-order central differences, combined over steps h and h/2 by
// Richardson extrapolation. Arithmetic is carried in long double.
template <typename F>
double richardson(F&& fd, double h) {
  const long double a = fd(static_cast<long double>(h) / 2);
  const long double b = fd(static_cast<long double>(h));
  return static_cast<double>((16 * a - b) / 15);
}

template <typename F>
long double d1_central(F&& fn, long double x, long double h) {
  return (fn(x - 2 * h) - 8 * fn(x - h) + 8 * fn(x + h) - fn(x + 2 * h)) / (12 * h);
}

template <typename F>
long double d2_central(F&& fn, long double x, long double h) {
  return (-fn(x - 2 * h) + 16 * fn(x - h) - 30 * fn(x) + 16 * fn(x + h) - fn(x + 2 * h)) /
         (12 * h * h);
}

template <typename F>
long double d3_central(F&& fn, long double x, long double h) {
  return (fn(x - 3 * h) - 8 * fn(x - 2 * h) + 13 * fn(x - h) - 13 * fn(x + h) +
          8 * fn(x + 2 * h) - fn(x + 3 * h)) /
         (8 * h * h * h);
}

}  // namespace detail

enum class DerivativeSource { ActionValues, PrimePsi, PrimeSeries };

struct CriticalConstants {
  double d1;
  double d2;
  double d3;
};

/// Derivatives of f0 at theta by finite differences (step 1e-2 theta with
/// Richardson). Expected: d1 = d2 = 0 and d3 = 2 chi; throws ToleranceError
/// when |d1| > 1e-9, |d2| > 1e-8 or |d3 - 2chi| > 1e-6 |2chi|.
inline CriticalConstants critical_constants(const QParams& q, double theta,
                                            DerivativeSource source = DerivativeSource::ActionValues,
                                            bool enforce = true) {
  require_theta(theta);
  const double h = 1e-2 * theta;
  CriticalConstants out{};
  if (source == DerivativeSource::ActionValues) {
    const Action a = Action::f0(q, theta);
    auto fn = [&](long double x) { return a.real_axis(x); };
    out.d1 = detail::richardson([&](double s) { return detail::d1_central(fn, theta, s); }, h);
    out.d2 = detail::richardson([&](double s) { return detail::d2_central(fn, theta, s); }, h);
    out.d3 = detail::richardson([&](double s) { return detail::d3_central(fn, theta, s); }, h);
  } else {
    auto fp = [&](double x) {
      const cplx Z{x, 0.0};
      return (source == DerivativeSource::PrimePsi ? f0_prime_psi(Z, q, theta)
                                                   : f0_prime_series(Z, q, theta))
          .real();
    };
    out.d1 = fp(theta);
    out.d2 = detail::richardson([&](double s) { return detail::d1_central(fp, theta, s); }, h);
    out.d3 = detail::richardson([&](double s) { return detail::d2_central(fp, theta, s); }, h);
  }
  if (enforce) {
    const double two_chi = 2.0 * chi(q, theta);
    if (!(std::abs(out.d1) <= 1e-9) || !(std::abs(out.d2) <= 1e-8) ||
        !(std::abs(out.d3 - two_chi) <= 1e-6 * std::abs(two_chi))) {
      throw ToleranceError("critical-point identities of f0 violated");
    }
  }
  return out;
}

struct ShockCriticalConstants {
  double d1;
  double d2;
};

/// g0'(A) and g0''(A) by finite differences; expected 0 and sigma.
inline ShockCriticalConstants shock_critical_constants(const QParams& q, double theta,
                                                       double alpha, bool enforce = true) {
  const Action a = Action::g0(q, theta, alpha);
  const double A = a.critical_point();
  if (!(A > 0.0)) throw DomainError("shock constants need alpha < 1");
  auto fn = [&](long double x) { return a.real_axis(x); };
  const double h = 1e-2 * A;
  ShockCriticalConstants out{};
  out.d1 = detail::richardson([&](double s) { return detail::d1_central(fn, A, s); }, h);
  out.d2 = detail::richardson([&](double s) { return detail::d2_central(fn, A, s); }, h);
  if (enforce) {
    const double sg = sigma(q, theta, alpha);
    if (!(std::abs(out.d1) <= 1e-9) || !(std::abs(out.d2 - sg) <= 1e-8 * std::abs(sg))) {
      throw ToleranceError("critical-point identities of g0 violated");
    }
  }
  return out;
}

/// prod_j (q^Z/a_j; q)_inf / ((q^Z; q)_inf)^m over the perturbed particles.
inline cplx phi(const cplx& Z, const QParams& q, const RateProfile& profile) {
  detail::require_right_half_plane(Z);
  if (profile.empty()) return {1.0, 0.0};
  const cplx qz = q.pow(Z);
  if (std::abs(1.0 - qz) < 1e-10) throw PoleError("phi evaluated within 1e-10 of a pole");
  const cplx base = qpoch_inf(qz, q);
  cplx out{1.0, 0.0};
  for (const auto& p : profile.perturbations()) out *= qpoch_inf(qz / p.rate, q) / base;
  return out;
}

/// Ray pair through a real vertex. In the q-plane the ray is
/// q^vertex + |s| e^{i sgn(s) angle}; in the log-plane it is the image
/// W(s) = log_q of that point.
struct ContourRay {
  double vertex;
  double angle = std::numbers::pi / 4.0;

  cplx q_point(const QParams& q, double s) const {
    const double a = s >= 0.0 ? angle : -angle;
    return q.pow(vertex) + std::abs(s) * std::polar(1.0, a);
  }
  cplx w_point(const QParams& q, double s) const { return std::log(q_point(q, s)) / q.log(); }

  void validate() const {
    if (!(angle > 0.0 && angle <= std::numbers::pi / 2.0)) {
      throw ContourError("contour angle must lie in (0, pi/2]");
    }
  }
};

struct ScanReport {
  std::size_t points = 0;
  std::vector<double> violations;  // s values where monotonicity failed
  double worst_drop = 0.0;
  bool ok() const { return violations.empty(); }
};

/// Checks that s -> Re[action(W(s))] is nondecreasing for s >= 0 and
/// nonincreasing for s <= 0 on a sorted grid.
inline ScanReport steep_descent_scan(const Action& action, const ContourRay& contour,
                                     std::vector<double> s_grid) {
  contour.validate();
  std::sort(s_grid.begin(), s_grid.end());
  ScanReport rep;
  rep.points = s_grid.size();
  std::vector<double> vals(s_grid.size());
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    const cplx qw = contour.q_point(action.q(), s_grid[i]);
    vals[i] = action.real_part(std::log(qw) / action.q().log(), qw);
  }
  for (std::size_t i = 0; i + 1 < s_grid.size(); ++i) {
    const double slack = 64 * std::numeric_limits<double>::epsilon() *
                         std::max({1.0, std::abs(vals[i]), std::abs(vals[i + 1])});
    double drop = 0.0;
    if (s_grid[i] >= 0.0) {
      drop = vals[i] - vals[i + 1];
      if (drop > slack) rep.violations.push_back(s_grid[i + 1]);
    } else if (s_grid[i + 1] <= 0.0) {
      drop = vals[i + 1] - vals[i];
      if (drop > slack) rep.violations.push_back(s_grid[i]);
    }
    rep.worst_drop = std::max(rep.worst_drop, drop);
  }
  return rep;
}

inline std::vector<double> uniform_grid(double lo, double hi, double step) {
  std::vector<double> g;
  if (!(step > 0.0) || hi < lo) throw DomainError("uniform_grid needs step > 0 and hi >= lo");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) g.push_back(lo + step * static_cast<double>(i));
  return g;
}

struct PeriodicityReport {
  double period = 0.0;
  double max_period_error = 0.0;
  std::size_t monotone_violations = 0;
  bool zero_is_max = false;
  bool ok(double tol = 1e-10) const {
    return max_period_error <= tol && monotone_violations == 0 && zero_is_max;
  }
};

/// On the vertical line x + iR: Re[action] has period 2 pi/|log q|, is
/// maximal at t = 0 and decreases on [0, pi/|log q|].
inline PeriodicityReport vertical_periodicity_check(const Action& action, double x,
                                                    std::size_t samples = 400) {
  if (!(x > 0.0)) throw DomainError("vertical line must have positive real part");
  const double L = std::abs(action.q().log());
  PeriodicityReport rep;
  rep.period = 2.0 * std::numbers::pi / L;
  const double half = std::numbers::pi / L;
  auto re = [&](double t) { return action.real_part(cplx{x, t}); };
  const double at0 = re(0.0);
  rep.zero_is_max = true;
  double prev = at0;
  for (std::size_t i = 1; i <= samples; ++i) {
    const double t = half * static_cast<double>(i) / static_cast<double>(samples);
    const double v = re(t);
    const double scale = std::max(1.0, std::abs(v));
    rep.max_period_error = std::max(
        {rep.max_period_error, std::abs(v - re(t + rep.period)) / scale,
         std::abs(re(-t) - re(-t - rep.period)) / scale});
    if (v > prev + 64 * std::numeric_limits<double>::epsilon() * scale) ++rep.monotone_violations;
    if (v > at0 || re(-t) > at0) rep.zero_is_max = false;
    prev = v;
  }
  return rep;
}

}  // namespace qtasep
