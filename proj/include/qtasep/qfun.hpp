#pragma once

// q-series special functions: q-Pochhammer symbols, q-Gamma and the
// q-digamma family. Everything here is a pure function of its arguments.

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>

#include "qtasep/errors.hpp"

namespace qtasep {

using cplx = std::complex<double>;

/// Largest q for which the series truncation limits below are guaranteed.
inline constexpr double kQMax = 0.999;

/// The model parameter q, validated to lie in (0, kQMax].
class QParams {
 public:
  explicit QParams(double q) : q_(q) {
    if (!(q > 0.0 && q < 1.0)) {
      throw DomainError("q must lie strictly inside (0,1), got " + std::to_string(q));
    }
    if (q > kQMax) {
      throw DomainError("q above 0.999 is not supported, got " + std::to_string(q));
    }
    log_q_ = std::log(q);
  }

  double value() const { return q_; }
  /// log q, strictly negative.
  double log() const { return log_q_; }
  /// q^x for real x.
  double pow(double x) const { return std::exp(x * log_q_); }
  /// q^z for complex z.
  cplx pow(cplx z) const { return std::exp(z * log_q_); }
  /// 1 - q^x computed without cancellation for small x.
  double one_minus_pow(double x) const { return -std::expm1(x * log_q_); }

 private:
  double q_;
  double log_q_;
};

struct SeriesTolerance {
  double rel_tol = 1e-15;
  std::size_t max_terms = 1000000;

  void validate() const {
    if (!(rel_tol > 0.0)) throw DomainError("SeriesTolerance: rel_tol must be positive");
    if (max_terms < 1) throw DomainError("SeriesTolerance: max_terms must be >= 1");
  }
};

namespace detail {

inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const cplx& z) { return std::abs(z); }

// Sums term(k) for k = 0, 1, ... until the current term is below
// rel_tol * |sum| and q^k < rel_tol.
template <typename T, typename Term>
T sum_q_series(const QParams& q, const SeriesTolerance& tol, Term&& term) {
  T sum{};
  double qk = 1.0;
  for (std::size_t k = 0; k < tol.max_terms; ++k) {
    const T t = term(k);
    sum += t;
    if (magnitude(t) <= tol.rel_tol * magnitude(sum) && qk < tol.rel_tol) return sum;
    qk *= q.value();
  }
  throw NonConvergence("q-series did not converge within max_terms");
}

// log(1 - w), accurate for small |w|.
inline cplx log1m(const cplx& w) {
  if (std::abs(w) < 1e-5) {
    const cplx w2 = w * w;
    return -(w + w2 / 2.0 + w2 * w / 3.0 + w2 * w2 / 4.0);
  }
  return std::log(1.0 - w);
}

// Sum of principal logarithms log(1 - z q^k) with no domain check. The real
// part equals log|(z;q)_inf| for every z off the zero set.
inline cplx log_qpoch_inf_raw(const cplx& z, const QParams& q, const SeriesTolerance& tol) {
  cplx sum{0.0, 0.0};
  if (z == cplx{0.0, 0.0}) return sum;
  cplx zk = z;
  for (std::size_t k = 0; k < tol.max_terms; ++k) {
    sum += log1m(zk);
    if (std::abs(zk) < tol.rel_tol) return sum;
    zk *= q.value();
  }
  throw NonConvergence("log q-Pochhammer did not converge within max_terms");
}

}  // namespace detail

/// (z; q)_n = prod_{j<n} (1 - z q^j). Exact finite product.
inline cplx qpoch_finite(const cplx& z, const QParams& q, std::size_t n) {
  cplx prod{1.0, 0.0};
  cplx zj = z;
  for (std::size_t j = 0; j < n; ++j) {
    prod *= 1.0 - zj;
    zj *= q.value();
  }
  return prod;
}

/// (z; q)_inf, truncated once |z q^K| < rel_tol. With tail_correction the
/// neglected factors are approximated by exp(-z q^K / (1 - q)).
inline cplx qpoch_inf(const cplx& z, const QParams& q, const SeriesTolerance& tol = {},
                      bool tail_correction = false) {
  tol.validate();
  if (std::abs(z) >= 10.0) throw DomainError("qpoch_inf requires |z| < 10");
  cplx prod{1.0, 0.0};
  if (z == cplx{0.0, 0.0}) return prod;
  cplx zk = z;
  for (std::size_t k = 0; k < tol.max_terms; ++k) {
    if (std::abs(zk) < tol.rel_tol) {
      if (tail_correction) prod *= std::exp(-zk / (1.0 - q.value()));
      return prod;
    }
    prod *= 1.0 - zk;
    zk *= q.value();
  }
  throw NonConvergence("qpoch_inf did not converge within max_terms");
}

/// Natural-branch log of (z; q)_inf for |z| < 1: sum of per-factor
/// principal logarithms, each of which has Re(1 - z q^k) > 0.
inline cplx log_qpoch_inf(const cplx& z, const QParams& q, const SeriesTolerance& tol = {}) {
  tol.validate();
  if (!(std::abs(z) < 1.0)) throw DomainError("log_qpoch_inf requires |z| < 1");
  return detail::log_qpoch_inf_raw(z, q, tol);
}

/// Gamma_q(z) = (1-q)^{1-z} (q;q)_inf / (q^z;q)_inf.
inline double qgamma(double z, const QParams& q) {
  if (!(z > 0.0)) throw DomainError("qgamma requires z > 0");
  const SeriesTolerance tol{};
  const double num = qpoch_inf(q.value(), q, tol).real();
  const double den = qpoch_inf(q.pow(z), q, tol).real();
  return std::pow(1.0 - q.value(), 1.0 - z) * num / den;
}

/// Psi_q(theta) = -log(1-q) + log q * sum_k q^{theta+k} / (1 - q^{theta+k}).
inline double qdigamma(double theta, const QParams& q, const SeriesTolerance& tol = {}) {
  if (!(theta > 0.0)) throw DomainError("qdigamma requires theta > 0");
  const double s = detail::sum_q_series<double>(q, tol, [&](std::size_t k) {
    const double x = theta + static_cast<double>(k);
    return q.pow(x) / q.one_minus_pow(x);
  });
  return -std::log1p(-q.value()) + q.log() * s;
}

/// Psi'_q(theta) = (log q)^2 sum_k q^{theta+k} / (1 - q^{theta+k})^2.
inline double qdigamma_prime(double theta, const QParams& q, const SeriesTolerance& tol = {}) {
  if (!(theta > 0.0)) throw DomainError("qdigamma_prime requires theta > 0");
  const double s = detail::sum_q_series<double>(q, tol, [&](std::size_t k) {
    const double x = theta + static_cast<double>(k);
    const double d = q.one_minus_pow(x);
    return q.pow(x) / (d * d);
  });
  return q.log() * q.log() * s;
}

/// Psi''_q(theta) = (log q)^3 sum_k q^{theta+k} (1 + q^{theta+k}) / (1 - q^{theta+k})^3,
/// the term-wise derivative of the Psi'_q series.
inline double qdigamma_second(double theta, const QParams& q, const SeriesTolerance& tol = {}) {
  if (!(theta > 0.0)) throw DomainError("qdigamma_second requires theta > 0");
  const double s = detail::sum_q_series<double>(q, tol, [&](std::size_t k) {
    const double x = theta + static_cast<double>(k);
    const double p = q.pow(x);
    const double d = q.one_minus_pow(x);
    return p * (1.0 + p) / (d * d * d);
  });
  return q.log() * q.log() * q.log() * s;
}

}  // namespace qtasep
