#pragma once

// Limit laws as Fredholm determinants on L^2(x, +inf): GUE Tracy-Widom
// (Airy kernel), rank-k BBP and the k x k GUE largest eigenvalue (Hermite
// kernel), plus a Monte-Carlo sampler for the latter.
//
// The Airy and BBP kernels are double contour integrals
//
//   K(u,v) = (2 pi i)^{-2} int dw int dz  e^{z^3/3 - zu} / e^{w^3/3 - wv}
//            * 1/(z - w) * prod_i (z - b_i)/(w - b_i)
//
// with z on rays at +-pi/3 and w on rays at +-2pi/3. The quadrature is
// factorized: K = Re(Z C W^T) with Z and W holding the exponential weights
// at the z and w nodes and C_ab = 1/(z_a - w_b). The w contour is kept near
// the origin, where the integrand is well scaled; poles b_i it would have to
// pass on the left are accounted for by their residues, which factor into a
// rank-(mult) term sum_j H_j(v) J_j(u).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/legendre.hpp>

#include "qtasep/errors.hpp"
#include "qtasep/qfun.hpp"
#include "qtasep/rng.hpp"

namespace qtasep {

struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule mapped to [a, b].
inline Quadrature gauss_legendre(std::size_t n, double a, double b) {
  if (n < 1) throw DomainError("gauss_legendre: n must be >= 1");
  const int ni = static_cast<int>(n);
  const std::vector<double> pos = boost::math::legendre_p_zeros<double>(ni);
  std::vector<double> t;
  for (double z : pos) {
    if (z != 0.0) t.push_back(-z);
  }
  for (auto it = pos.rbegin(); it != pos.rend(); ++it) t.push_back(*it);
  std::sort(t.begin(), t.end());
  Quadrature q;
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  for (double ti : t) {
    const double dp = boost::math::legendre_p_prime(ni, ti);
    q.nodes.push_back(mid + half * ti);
    q.weights.push_back(half * 2.0 / ((1.0 - ti * ti) * dp * dp));
  }
  return q;
}

enum class KernelKind { Airy, BBP, Hermite };

struct ContourParams {
  std::optional<double> z_vertex;  // default: w_vertex + 1
  std::optional<double> w_vertex;  // default: chosen near -1/2, away from every b_i
  double L_ray = 10.0;
  std::size_t M_ray = 64;
  double ray_tol = 1e-8;
};

struct NystromParams {
  double L_dom = 14.0;
  std::size_t m = 48;
  double self_convergence_tol = 1e-7;
  // Hermite only: the domain reaches at least this far right.
  double hermite_min_upper = 12.0;
};

struct KernelSpec {
  KernelKind kind = KernelKind::Airy;
  std::vector<double> b;  // BBP perturbation vector
  std::size_t k = 0;      // Hermite rank
  ContourParams contour;
  NystromParams nystrom;

  static KernelSpec airy() { return {}; }
  static KernelSpec bbp(std::vector<double> b) {
    KernelSpec s;
    s.kind = KernelKind::BBP;
    s.b = std::move(b);
    return s;
  }
  static KernelSpec hermite(std::size_t k) {
    KernelSpec s;
    s.kind = KernelKind::Hermite;
    s.k = k;
    return s;
  }

  void validate() const {
    if (kind == KernelKind::Hermite && k < 1) throw DomainError("Hermite kernel requires k >= 1");
    for (double bi : b) {
      if (!std::isfinite(bi)) throw DomainError("BBP parameters must be finite");
    }
    if (!(contour.L_ray > 0.0) || contour.M_ray < 2) throw DomainError("bad ray parameters");
    if (!(nystrom.L_dom > 0.0) || nystrom.m < 2) throw DomainError("bad Nystrom parameters");
  }

  /// Short file-safe identifier: "F_GUE", "F_BBP_k1", "G_2".
  std::string label() const {
    switch (kind) {
      case KernelKind::Airy: return "F_GUE";
      case KernelKind::BBP: return "F_BBP_k" + std::to_string(b.size());
      case KernelKind::Hermite: return "G_" + std::to_string(k);
    }
    return "?";
  }

  /// Exact textual identity of every parameter that affects the values.
  std::string fingerprint() const {
    std::ostringstream os;
    os << std::hexfloat << "kind=" << static_cast<int>(kind) << ";k=" << k << ";b=";
    for (double bi : b) os << bi << ",";
    os << ";z=" << (contour.z_vertex ? *contour.z_vertex : NAN)
       << ";w=" << (contour.w_vertex ? *contour.w_vertex : NAN) << ";L_ray=" << contour.L_ray
       << ";M_ray=" << contour.M_ray << ";L_dom=" << nystrom.L_dom << ";m=" << nystrom.m
       << ";hmin=" << nystrom.hermite_min_upper;
    return os.str();
  }
};

namespace detail {

// Nodes and measures dz/(2 pi i) of a contour made of two rays leaving
// `vertex` at angles +-angle, oriented from the lower ray to the upper one.
struct ContourNodes {
  std::vector<cplx> z;
  std::vector<cplx> dz;
};

inline ContourNodes two_ray_contour(cplx vertex, double angle, double L, std::size_t M) {
  const Quadrature gl = gauss_legendre(M, 0.0, L);
  const cplx up = std::polar(1.0, angle);
  const cplx down = std::conj(up);
  const cplx inv2pii = 1.0 / cplx(0.0, 2.0 * std::numbers::pi);
  ContourNodes c;
  for (std::size_t i = 0; i < M; ++i) {
    const double r = gl.nodes[i];
    const double w = gl.weights[i];
    c.z.push_back(vertex + r * up);
    c.dz.push_back(w * up * inv2pii);
    c.z.push_back(vertex + r * down);
    c.dz.push_back(-w * down * inv2pii);
  }
  return c;
}

struct PoleGroup {
  double b;
  int mult;
};

inline std::vector<PoleGroup> group_poles(std::vector<double> b) {
  std::sort(b.begin(), b.end());
  std::vector<PoleGroup> g;
  for (double bi : b) {
    if (!g.empty() && g.back().b == bi) {
      ++g.back().mult;
    } else {
      g.push_back({bi, 1});
    }
  }
  return g;
}

// Truncated power series in t, coefficients c[0..n).
using Series = std::vector<double>;

inline Series series_mul(const Series& a, const Series& b) {
  Series c(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; i + j < a.size(); ++j) c[i + j] += a[i] * b[j];
  }
  return c;
}

// exp(P(t)) for a polynomial P given by its coefficients, truncated to n terms.
inline Series series_exp(const std::vector<double>& P, std::size_t n) {
  Series e(n, 0.0);
  e[0] = std::exp(P[0]);
  for (std::size_t m = 1; m < n; ++m) {
    double s = 0.0;
    for (std::size_t j = 1; j <= m && j < P.size(); ++j) s += static_cast<double>(j) * P[j] * e[m - j];
    e[m] = s / static_cast<double>(m);
  }
  return e;
}

inline double default_w_vertex(const std::vector<PoleGroup>& poles) {
  for (double w : {-0.5, -0.75, -0.25, -1.0, 0.0, -1.25}) {
    bool ok = true;
    for (const auto& p : poles) ok = ok && std::abs(p.b - w) >= 0.2;
    if (ok) return w;
  }
  return -1.5;
}

}  // namespace detail

/// Airy kernel with an optional BBP factor prod_i (z - b_i)/(w - b_i),
/// evaluated at one ray resolution M.
class AiryFamilyKernel {
 public:
  AiryFamilyKernel(const std::vector<double>& b, const ContourParams& cp, std::size_t M)
      : poles_(detail::group_poles(b)), L_(cp.L_ray), M_(M) {
    w0_ = cp.w_vertex ? *cp.w_vertex : detail::default_w_vertex(poles_);
    z0_ = cp.z_vertex ? *cp.z_vertex : w0_ + 1.0;
    if (!(z0_ > w0_)) throw ContourError("z vertex must lie to the right of the w vertex");
    for (const auto& p : poles_) {
      if (std::abs(p.b - w0_) < 1e-3) throw ContourError("w vertex too close to a pole b_i");
      if (p.b > w0_) residues_.push_back(p);
    }
    const auto zc = detail::two_ray_contour(z0_, std::numbers::pi / 3.0, L_, M_);
    const auto wc = detail::two_ray_contour(w0_, 2.0 * std::numbers::pi / 3.0, L_, M_);
    const auto nz = static_cast<Eigen::Index>(zc.z.size());
    const auto nw = static_cast<Eigen::Index>(wc.z.size());
    z_ = Eigen::Map<const Eigen::VectorXcd>(zc.z.data(), nz);
    w_ = Eigen::Map<const Eigen::VectorXcd>(wc.z.data(), nw);
    z_pre_.resize(nz);
    w_pre_.resize(nw);
    for (Eigen::Index a = 0; a < nz; ++a) {
      const cplx z = z_(a);
      z_pre_(a) = zc.dz[static_cast<std::size_t>(a)] * std::exp(z * z * z / 3.0) * poly(z);
    }
    for (Eigen::Index c = 0; c < nw; ++c) {
      const cplx w = w_(c);
      w_pre_(c) = wc.dz[static_cast<std::size_t>(c)] * std::exp(-w * w * w / 3.0) / poly(w);
    }
    C_.resize(nz, nw);
    for (Eigen::Index a = 0; a < nz; ++a) {
      for (Eigen::Index c = 0; c < nw; ++c) C_(a, c) = 1.0 / (z_(a) - w_(c));
    }
  }

  double z_vertex() const { return z0_; }
  double w_vertex() const { return w0_; }

  /// K(u_i, v_j).
  Eigen::MatrixXd matrix(const std::vector<double>& u, const std::vector<double>& v) const {
    const auto nu = static_cast<Eigen::Index>(u.size());
    const auto nv = static_cast<Eigen::Index>(v.size());
    Eigen::MatrixXcd Z(nu, z_.size());
    Eigen::MatrixXcd W(nv, w_.size());
    for (Eigen::Index i = 0; i < nu; ++i) {
      Z.row(i) = (z_pre_.array() * (-z_.array() * u[static_cast<std::size_t>(i)]).exp()).transpose();
    }
    for (Eigen::Index j = 0; j < nv; ++j) {
      W.row(j) = (w_pre_.array() * (w_.array() * v[static_cast<std::size_t>(j)]).exp()).transpose();
    }
    Eigen::MatrixXd K = (Z * C_ * W.transpose()).real();
    for (const auto& p : residues_) add_residue(K, p, u, v);
    return K;
  }

  double operator()(double u, double v) const { return matrix({u}, {v})(0, 0); }

 private:
  cplx poly(const cplx& z) const {
    cplx p{1.0, 0.0};
    for (const auto& g : poles_) p *= std::pow(z - g.b, g.mult);
    return p;
  }

  // Residue at w = b of the pole group p (order mult):
  //   sum_{i<mult} H_i(v) J_i(u),
  //   H_i(v) = [t^i] e^{-(b+t)^3/3 + (b+t)v} prod_{o != p} (b + t - b_o)^{-m_o},
  //   J_i(u) = (2 pi i)^{-1} int dz e^{z^3/3 - zu} (z - b)^i prod_{o != p} (z - b_o)^{m_o}.
  void add_residue(Eigen::MatrixXd& K, const detail::PoleGroup& p, const std::vector<double>& u,
                   const std::vector<double>& v) const {
    const auto n = static_cast<std::size_t>(p.mult);
    detail::Series others(n, 0.0);
    others[0] = 1.0;
    for (const auto& o : poles_) {
      if (o.b == p.b) continue;
      const double d = p.b - o.b;
      detail::Series inv(n);
      for (std::size_t i = 0; i < n; ++i) inv[i] = ((i % 2) ? -1.0 : 1.0) / std::pow(d, static_cast<double>(i + 1));
      for (int r = 0; r < o.mult; ++r) others = detail::series_mul(others, inv);
    }
    const double b = p.b;
    std::vector<std::vector<double>> Ju;
    for (double ui : u) Ju.push_back(residue_z_integrals(p, ui));
    for (std::size_t j = 0; j < v.size(); ++j) {
      // -(b+t)^3/3 + (b+t) v
      const std::vector<double> P{-b * b * b / 3.0 + b * v[j], -b * b + v[j], -b, -1.0 / 3.0};
      const detail::Series H = detail::series_mul(detail::series_exp(P, n), others);
      for (std::size_t i = 0; i < u.size(); ++i) {
        const std::vector<double>& J = Ju[i];
        double s = 0.0;
        for (std::size_t t = 0; t < n; ++t) s += H[t] * J[t];
        K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += s;
      }
    }
  }

  // J with exponent e = 0..mult-1 on (z - b), on a contour through the
  // real saddle of e^{z^3/3 - zu} when there is one.
  std::vector<double> residue_z_integrals(const detail::PoleGroup& p, double u) const {
    const double vertex = std::sqrt(std::max(u, 0.0));
    const auto zc = detail::two_ray_contour(vertex, std::numbers::pi / 3.0, L_, M_);
    std::vector<double> J(static_cast<std::size_t>(p.mult), 0.0);
    for (std::size_t a = 0; a < zc.z.size(); ++a) {
      const cplx z = zc.z[a];
      cplx base = zc.dz[a] * std::exp(z * z * z / 3.0 - z * u);
      for (const auto& o : poles_) {
        if (o.b != p.b) base *= std::pow(z - o.b, o.mult);
      }
      cplx zp{1.0, 0.0};
      for (std::size_t e = 0; e < J.size(); ++e) {
        J[e] += (base * zp).real();
        zp *= z - p.b;
      }
    }
    return J;
  }

  std::vector<detail::PoleGroup> poles_;
  std::vector<detail::PoleGroup> residues_;
  double L_;
  std::size_t M_;
  double z0_ = 0.0;
  double w0_ = 0.0;
  Eigen::VectorXcd z_, w_, z_pre_, w_pre_;
  Eigen::MatrixXcd C_;
};

namespace detail {

inline double ray_checked(const std::vector<double>& b, const ContourParams& cp, double u, double v) {
  const double coarse = AiryFamilyKernel(b, cp, cp.M_ray)(u, v);
  const double fine = AiryFamilyKernel(b, cp, 2 * cp.M_ray)(u, v);
  if (!(std::abs(coarse - fine) <= cp.ray_tol)) {
    throw QuadratureError("contour quadrature not converged at (u,v)=(" + std::to_string(u) + "," +
                          std::to_string(v) + ")");
  }
  return fine;
}

}  // namespace detail

/// K_Ai(u, v) from the double contour integral.
inline double airy_kernel(double u, double v, const ContourParams& cp = {}) {
  return detail::ray_checked({}, cp, u, v);
}

/// K_BBP(u, v) for the perturbation vector b; equals airy_kernel for empty b.
inline double bbp_kernel(double u, double v, const std::vector<double>& b,
                         const ContourParams& cp = {}) {
  return detail::ray_checked(b, cp, u, v);
}

/// Orthonormal Hermite functions' polynomial part p_0..p_n at t for the
/// weight e^{-t^2/2}: p_n = He_n / ((2 pi)^{1/4} sqrt(n!)).
inline std::vector<double> hermite_orthonormal(std::size_t n, double t) {
  std::vector<double> p(n + 1);
  p[0] = 1.0 / std::pow(2.0 * std::numbers::pi, 0.25);
  if (n >= 1) p[1] = t * p[0];
  for (std::size_t j = 1; j < n; ++j) {
    const double dj = static_cast<double>(j);
    p[j + 1] = (t * p[j] - std::sqrt(dj) * p[j - 1]) / std::sqrt(dj + 1.0);
  }
  return p;
}

/// Christoffel-Darboux form of H_k(u, v); the diagonal uses the derivative
/// limit, and pairs closer than 1e-6 fall back to the defining sum.
inline double hermite_kernel(double u, double v, std::size_t k) {
  if (k < 1) throw DomainError("hermite_kernel requires k >= 1");
  const double damp = std::exp(-(u * u + v * v) / 4.0);
  const auto pu = hermite_orthonormal(k, u);
  const double sk = std::sqrt(static_cast<double>(k));
  if (u == v) {
    // p_n' = sqrt(n) p_{n-1}
    const double dk = sk * pu[k - 1];
    const double dkm1 = k >= 2 ? std::sqrt(static_cast<double>(k - 1)) * pu[k - 2] : 0.0;
    return sk * (dk * pu[k - 1] - dkm1 * pu[k]) * damp;
  }
  const auto pv = hermite_orthonormal(k, v);
  if (std::abs(u - v) < 1e-6) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += pu[j] * pv[j];
    return s * damp;
  }
  return sk * (pu[k] * pv[k - 1] - pu[k - 1] * pv[k]) / (u - v) * damp;
}

/// H_k(u, v) from its double contour integral: z rays at +-(pi/2 - gamma)
/// from z_vertex, w rays at +-(pi - phi) from w_vertex (> 0), factor (z/w)^k.
/// The integral itself is the conjugate H_k(u, v) e^{(v^2 - u^2)/4}, which has
/// the same Fredholm determinant; the factor is removed before returning.
inline double hermite_kernel_contour(double u, double v, std::size_t k, double phi = std::numbers::pi / 8,
                                     double gamma = std::numbers::pi / 8, double w_vertex = 0.5,
                                     double z_vertex = 1.5, double L = 10.0, std::size_t M = 256) {
  if (k < 1) throw DomainError("hermite_kernel_contour requires k >= 1");
  const double quarter = std::numbers::pi / 4.0;
  if (!(phi > 0.0 && phi < quarter && gamma > 0.0 && gamma < quarter)) {
    throw ContourError("phi and gamma must lie in (0, pi/4)");
  }
  if (!(w_vertex > 0.0 && z_vertex > w_vertex)) throw ContourError("need 0 < w_vertex < z_vertex");
  const auto zc = detail::two_ray_contour(z_vertex, std::numbers::pi / 2.0 - gamma, L, M);
  const auto wc = detail::two_ray_contour(w_vertex, std::numbers::pi - phi, L, M);
  const int ki = static_cast<int>(k);
  cplx sum{0.0, 0.0};
  for (std::size_t a = 0; a < zc.z.size(); ++a) {
    const cplx z = zc.z[a];
    const cplx fz = zc.dz[a] * std::exp(z * z / 2.0 - z * u) * std::pow(z, ki);
    for (std::size_t c = 0; c < wc.z.size(); ++c) {
      const cplx w = wc.z[c];
      sum += fz * wc.dz[c] * std::exp(-w * w / 2.0 + w * v) / std::pow(w, ki) / (z - w);
    }
  }
  return sum.real() * std::exp((u * u - v * v) / 4.0);
}

struct FredholmValue {
  double value;
  double err_est;
};

namespace detail {

inline double nystrom_det(const Eigen::MatrixXd& K, const Quadrature& q) {
  const auto m = static_cast<Eigen::Index>(q.nodes.size());
  Eigen::VectorXd s(m);
  for (Eigen::Index i = 0; i < m; ++i) s(i) = std::sqrt(q.weights[static_cast<std::size_t>(i)]);
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(m, m) - s.asDiagonal() * K * s.asDiagonal();
  return Eigen::FullPivLU<Eigen::MatrixXd>(A).determinant();
}

inline Eigen::MatrixXd hermite_matrix(const std::vector<double>& s, std::size_t k) {
  const auto m = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd K(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      K(i, j) = hermite_kernel(s[static_cast<std::size_t>(i)], s[static_cast<std::size_t>(j)], k);
    }
  }
  return K;
}

inline double domain_upper(const KernelSpec& spec, double x) {
  double hi = x + spec.nystrom.L_dom;
  if (spec.kind == KernelKind::Hermite) hi = std::max(hi, spec.nystrom.hermite_min_upper);
  return hi;
}

inline double det_at(const KernelSpec& spec, double x, std::size_t m, std::size_t M_ray) {
  const Quadrature q = gauss_legendre(m, x, domain_upper(spec, x));
  if (spec.kind == KernelKind::Hermite) return nystrom_det(hermite_matrix(q.nodes, spec.k), q);
  const AiryFamilyKernel kern(spec.kind == KernelKind::BBP ? spec.b : std::vector<double>{},
                              spec.contour, M_ray);
  return nystrom_det(kern.matrix(q.nodes, q.nodes), q);
}

}  // namespace detail

/// det(I - K) on (x, +inf) with m and 2m Nystrom nodes (and, for contour
/// kernels, M and 2M ray nodes). Returns the finest value; err_est is the
/// largest of the observed changes.
inline FredholmValue fredholm_eval(const KernelSpec& spec, double x) {
  spec.validate();
  if (!std::isfinite(x)) throw DomainError("fredholm_cdf: x must be finite");
  const std::size_t m = spec.nystrom.m;
  const std::size_t M = spec.contour.M_ray;
  const double coarse = detail::det_at(spec, x, m, M);
  const double fine = detail::det_at(spec, x, 2 * m, M);
  double err = std::abs(fine - coarse);
  if (spec.kind != KernelKind::Hermite) {
    err = std::max(err, std::abs(detail::det_at(spec, x, m, 2 * M) - coarse));
  }
  if (!(err <= spec.nystrom.self_convergence_tol)) {
    throw QuadratureError("Fredholm determinant not self-convergent at x=" + std::to_string(x) +
                          " (change " + std::to_string(err) + ")");
  }
  return {fine, err};
}

inline double fredholm_cdf(const KernelSpec& spec, double x) { return fredholm_eval(spec, x).value; }

inline double gue_cdf(double x) { return fredholm_cdf(KernelSpec::airy(), x); }

inline double bbp_cdf(const std::vector<double>& b, double x) {
  return fredholm_cdf(KernelSpec::bbp(b), x);
}

/// G_k(x) = det(I - H_k) on (x, +inf).
inline double gk_cdf(std::size_t k, double x) { return fredholm_cdf(KernelSpec::hermite(k), x); }

/// Largest eigenvalue of a k x k Hermitian matrix with N(0,1) diagonal and
/// (X + iY)/sqrt(2) off-diagonal entries; its eigenvalue density is
/// proportional to Delta(lambda)^2 prod e^{-lambda_i^2/2}.
template <typename Rng>
double gue_largest_eig_sample(std::size_t k, Rng& rng) {
  if (k < 1 || k > 8) throw DomainError("gue_largest_eig_sample supports 1 <= k <= 8");
  if (k == 1) return rng.normal();
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  if (k == 2) {
    const double a = rng.normal();
    const double d = rng.normal();
    const double re = rng.normal() * inv_sqrt2;
    const double im = rng.normal() * inv_sqrt2;
    const double h = 0.5 * (a - d);
    return 0.5 * (a + d) + std::sqrt(h * h + re * re + im * im);
  }
  const auto n = static_cast<Eigen::Index>(k);
  Eigen::MatrixXcd H(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    H(i, i) = rng.normal();
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double re = rng.normal() * inv_sqrt2;
      const double im = rng.normal() * inv_sqrt2;
      H(i, j) = cplx(re, im);
      H(j, i) = cplx(re, -im);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(n - 1);
}

}  // namespace qtasep
