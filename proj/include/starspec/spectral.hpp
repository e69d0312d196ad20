#pragma once

// Linearised radial dynamics about an equilibrium:
//   M u'' + D u' + K u = 0,
// with M, D, K the Galerkin matrices of the weighted inner product int rho r^2 u v dr, the
// viscous form and the stiffness form. Assembly uses piecewise-linear hats with the centre
// node removed (u(0) = 0); the stress-free condition at R is natural and not imposed.
//
// Two independent assemblies are provided: in the radius r (unknown u) and in the enclosed
// mass x (unknown theta = r^2 u). With theta = r^2 u each mass-coordinate form equals the
// radial form divided by 4 pi, so both pencils share their eigenvalues.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "starspec/equilibrium.hpp"
#include "starspec/error.hpp"
#include "starspec/linalg.hpp"
#include "starspec/parallel.hpp"

namespace starspec {

enum class Coordinate { eulerian, mass };

inline const char* to_string(Coordinate c) { return c == Coordinate::eulerian ? "eulerian" : "mass"; }

struct OperatorTriple {
  Coordinate coordinate = Coordinate::eulerian;
  std::vector<double> grid;  // r nodes (eulerian) or x nodes (mass), node 0 included
  std::vector<double> radii;  // r nodes in both cases
  SymTridiag Mmat, Dmat, Kmat;  // unknowns are nodes 1..n
  double nu1 = 0.0, nu2 = 0.0;
  double mu = 0.0;

  std::size_t size() const { return Mmat.size(); }
  double nu() const { return 4.0 / 3.0 * nu1 + nu2; }
};

namespace detail {

struct GaussRule {
  std::vector<double> x, w;  // on [-1, 1]
};

// Gauss-Legendre nodes by Newton iteration on P_n.
inline GaussRule gauss_legendre(int n) {
  GaussRule g;
  g.x.resize(static_cast<std::size_t>(n));
  g.w.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5)), dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    g.x[static_cast<std::size_t>(i)] = -z;
    g.w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return g;
}

inline const GaussRule& gauss3() {
  static const GaussRule g{{-std::sqrt(0.6), 0.0, std::sqrt(0.6)}, {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0}};
  return g;
}
inline const GaussRule& gauss8() {
  static const GaussRule g = gauss_legendre(8);
  return g;
}

struct QPoint {
  double r = 0.0, w = 0.0;  // radius and dr-weight
  ProfilePoint f;
  double xpart = 0.0;  // mass between the cell's left end and r
};

struct Cell {
  double a = 0.0, b = 0.0, dx = 0.0;
  std::array<QPoint, 3> q;
};

// Cell map: affine on interior cells; r = R - (R - a) s^2 on the last one, which makes the
// degenerate weight (R - r)^{1/(gamma1-1)} smooth in s.
struct CellMap {
  double a, b, R;
  bool last;
  // r and dr/dt for t in [0, 1]; t = 0 is the left end.
  std::pair<double, double> operator()(double t) const {
    if (!last) return {a + (b - a) * t, b - a};
    const double s = 1.0 - t;
    return {R - (R - a) * s * s, 2.0 * (R - a) * s};
  }
};

inline double shell_mass(const StarProfile& p, const CellMap& map, double t0, double t1) {
  const auto& g = gauss8();
  double s = 0.0;
  for (std::size_t k = 0; k < g.x.size(); ++k) {
    const double t = t0 + (t1 - t0) * 0.5 * (1.0 + g.x[k]);
    const auto [r, drdt] = map(t);
    s += g.w[k] * 0.5 * (t1 - t0) * drdt * 4.0 * std::numbers::pi * r * r * p.query(r).rho;
  }
  return s;
}

inline std::vector<Cell> build_cells(const StarProfile& p, const std::vector<double>& r) {
  const auto& g = gauss3();
  std::vector<Cell> cells(r.size() - 1);
  for (std::size_t c = 0; c + 1 < r.size(); ++c) {
    Cell& cell = cells[c];
    cell.a = r[c];
    cell.b = r[c + 1];
    const CellMap map{cell.a, cell.b, p.radius(), c + 2 == r.size()};
    cell.dx = shell_mass(p, map, 0.0, 1.0);
    for (std::size_t k = 0; k < 3; ++k) {
      const double t = 0.5 * (1.0 + g.x[k]);
      const auto [rq, drdt] = map(t);
      QPoint& q = cell.q[k];
      q.r = rq;
      q.w = 0.5 * g.w[k] * drdt;
      q.f = p.query(rq);
      if (!(q.f.rho >= 0.0)) throw NumericalError("assembly: negative density from interpolation");
      q.xpart = shell_mass(p, map, 0.0, t);
    }
  }
  return cells;
}

struct FormCoef {
  double A = 0.0, B = 0.0, C = 0.0;  // A u'v' + B (u v' + u' v) + C u v
};

struct Basis {
  double lv, rv, ld, rd;  // left/right values and derivatives
};

template <class Coefs, class BasisFn>
void assemble(const std::vector<Cell>& cells, Coefs&& coefs, BasisFn&& basis, SymTridiag& M, SymTridiag& D,
              SymTridiag& K) {
  const std::size_t n = cells.size();
  M = SymTridiag(n);
  D = SymTridiag(n);
  K = SymTridiag(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::array<std::array<double, 3>, 3> e{};  // [form][ll, lr, rr]
    for (const auto& q : cells[c].q) {
      const Basis bs = basis(cells[c], q);
      const std::array<FormCoef, 3> f = coefs(q);
      for (int k = 0; k < 3; ++k) {
        const auto& [A, B, C] = f[static_cast<std::size_t>(k)];
        auto bil = [&](double uv, double ud, double vv, double vd) {
          return A * ud * vd + B * (uv * vd + ud * vv) + C * uv * vv;
        };
        e[k][0] += q.w * bil(bs.lv, bs.ld, bs.lv, bs.ld);
        e[k][1] += q.w * bil(bs.lv, bs.ld, bs.rv, bs.rd);
        e[k][2] += q.w * bil(bs.rv, bs.rd, bs.rv, bs.rd);
      }
    }
    // Unknown j corresponds to node j + 1; cell c joins nodes c and c + 1.
    SymTridiag* mats[3] = {&M, &D, &K};
    for (int k = 0; k < 3; ++k) {
      SymTridiag& m = *mats[k];
      m.d[c] += e[k][2];
      if (c > 0) {
        m.d[c - 1] += e[k][0];
        m.e[c - 1] += e[k][1];
      }
    }
  }
}

}  // namespace detail

/// Galerkin matrices in the radial coordinate on a cosine-graded grid of n_cells cells.
inline OperatorTriple assemble_eulerian(const StarProfile& profile, double nu1, double nu2, int n_cells) {
  if (n_cells < 16) throw DomainError("assemble: need at least 16 cells");
  if (!(nu1 > 0.0 && nu2 > 0.0)) throw DomainError("assemble: viscosities must be positive");
  constexpr double pi = std::numbers::pi;
  OperatorTriple t;
  t.coordinate = Coordinate::eulerian;
  t.radii = cosine_grid(profile.radius(), n_cells);
  t.grid = t.radii;
  t.nu1 = nu1;
  t.nu2 = nu2;
  t.mu = profile.mu();
  const auto cells = detail::build_cells(profile, t.radii);
  const double s1 = 4.0 * nu1 / 3.0;

  auto coefs = [&](const detail::QPoint& q) {
    const double r = q.r, rho = q.f.rho, m = q.f.m, Pp = q.f.Pprime;
    // Phi''/r^2 |d(r^2 rho u)|^2 expanded with hydrostatic balance rho' = -m/(r^2 Phi'').
    const double grav = q.f.phi2 < HUGE_VAL ? m * m / (r * r * q.f.phi2) : 0.0;
    return std::array<detail::FormCoef, 3>{{
        {0.0, 0.0, rho * r * r},
        {(nu2 + s1) * r * r, 2.0 * nu2 * r - s1 * r, 4.0 * nu2 + s1},
        {rho * r * r * Pp, rho * (2.0 * r * Pp - m), rho * (4.0 * Pp - 4.0 * m / r - 4.0 * pi * r * r * rho) + grav},
    }};
  };
  auto basis = [](const detail::Cell& c, const detail::QPoint& q) {
    const double h = c.b - c.a;
    return detail::Basis{(c.b - q.r) / h, (q.r - c.a) / h, -1.0 / h, 1.0 / h};
  };
  detail::assemble(cells, coefs, basis, t.Mmat, t.Dmat, t.Kmat);
  return t;
}

/// Galerkin matrices in the enclosed-mass coordinate for theta = r^2 u, hats in x on the
/// images x_i = m(r_i) of the same cosine radial grid. Cell masses come from local quadrature
/// so that the tiny shells next to the vacuum keep full relative accuracy.
inline OperatorTriple assemble_mass_coord(const StarProfile& profile, double nu1, double nu2, int n_cells) {
  if (n_cells < 16) throw DomainError("assemble: need at least 16 cells");
  if (!(nu1 > 0.0 && nu2 > 0.0)) throw DomainError("assemble: viscosities must be positive");
  constexpr double pi = std::numbers::pi;
  OperatorTriple t;
  t.coordinate = Coordinate::mass;
  t.radii = cosine_grid(profile.radius(), n_cells);
  t.nu1 = nu1;
  t.nu2 = nu2;
  t.mu = profile.mu();
  const auto cells = detail::build_cells(profile, t.radii);
  t.grid.assign(1, 0.0);
  for (const auto& c : cells) t.grid.push_back(t.grid.back() + c.dx);
  const double nu = t.nu();

  // Forms integrated in r with dx = 4 pi r^2 rho dr and d_x P = -x / (4 pi r^4):
  //   m:  theta^2 / (16 pi^2 r^4) dx
  //   D:  nu2 rho (theta')^2 dx + (4 nu1/3) rho |r^3 (theta / r^3)'|^2 dx
  //   K:  P' rho^2 (theta')^2 dx + d_x P / (pi r^3) theta^2 dx
  auto coefs = [&](const detail::QPoint& q) {
    const double r = q.r, rho = q.f.rho, x = q.f.m, Pp = q.f.Pprime;
    const double r2 = r * r;
    return std::array<detail::FormCoef, 3>{{
        {0.0, 0.0, rho / (4.0 * pi * r2)},
        {4.0 * pi * r2 * rho * rho * nu, -4.0 * nu1 * rho / r, 3.0 * nu1 / (pi * r2 * r2)},
        {4.0 * pi * r2 * rho * rho * rho * Pp, 0.0, -x * rho / (pi * r2 * r2 * r)},
    }};
  };
  auto basis = [](const detail::Cell& c, const detail::QPoint& q) {
    const double fr = q.xpart / c.dx;
    return detail::Basis{1.0 - fr, fr, -1.0 / c.dx, 1.0 / c.dx};
  };
  detail::assemble(cells, coefs, basis, t.Mmat, t.Dmat, t.Kmat);
  return t;
}

/// Nodal radial displacement u at r_1..r_n from a coefficient vector of the triple.
inline std::vector<double> to_displacement(const OperatorTriple& t, std::vector<double> c) {
  if (t.coordinate == Coordinate::mass) {
    for (std::size_t i = 0; i < c.size(); ++i) c[i] /= t.radii[i + 1] * t.radii[i + 1];
  }
  return c;
}

/// Coefficient vector for the triple from nodal displacements u at r_1..r_n.
inline std::vector<double> from_displacement(const OperatorTriple& t, std::vector<double> u) {
  if (t.coordinate == Coordinate::mass) {
    for (std::size_t i = 0; i < u.size(); ++i) u[i] *= t.radii[i + 1] * t.radii[i + 1];
  }
  return u;
}

struct Inertia {
  int n_minus = 0;
  double ker_margin = 0.0;  // smallest |eigenvalue| of the pencil (K, M)
  bool degenerate = false;   // ker_margin below the kernel threshold
  bool dense_fallback = false;
};

namespace detail {
inline std::vector<double> diag_sqrt(const SymTridiag& m) {
  std::vector<double> s(m.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(m.d[i] > 0.0)) throw NumericalError("mass matrix is not positive definite");
    s[i] = std::sqrt(m.d[i]);
  }
  return s;
}
}  // namespace detail

/// Kernel threshold on the pencil eigenvalue nearest zero, relative to the gravitational scale
/// 4 pi mu (pencil eigenvalues are squared frequencies). Matrix norms are unsuitable here: they
/// grow like the inverse square of the smallest cell.
inline double kernel_threshold(const OperatorTriple& t) { return 1e-8 * 4.0 * std::numbers::pi * t.mu; }

/// n^-(K) by Sylvester inertia of the LDL^T pivots (valid for the pencil since M > 0) and the
/// distance of the pencil spectrum from zero by Sturm bisection.
inline Inertia inertia_nminus(const OperatorTriple& t) {
  Inertia out;
  const auto s = detail::diag_sqrt(t.Mmat);
  const SymTridiag Ms = t.Mmat.scaled(s), Ks = t.Kmat.scaled(s);
  if (auto np = negative_pivots(Ks, Ms, 0.0)) {
    out.n_minus = *np;
  } else {
    out.dense_fallback = true;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Ks.dense(), Ms.dense(), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("inertia: dense eigensolver failed");
    out.n_minus = static_cast<int>((es.eigenvalues().array() < 0.0).count());
  }
  double margin = HUGE_VAL;
  if (out.n_minus > 0) margin = std::abs(pencil_eigenvalue(Ks, Ms, out.n_minus - 1));
  if (static_cast<std::size_t>(out.n_minus) < t.size()) {
    margin = std::min(margin, std::abs(pencil_eigenvalue(Ks, Ms, out.n_minus)));
  }
  out.ker_margin = margin;
  out.degenerate = margin < kernel_threshold(t);
  return out;
}

struct QepResult {
  double tau = 1.0;
  double shift = 0.0;
  std::vector<std::complex<double>> eigenvalues;  // finite ones, by decreasing real part
  std::size_t dropped = 0;                         // eigenvalues beyond the resolvable range
  std::vector<std::complex<double>> unstable;      // Re > threshold
  std::vector<std::vector<double>> vectors;        // coefficient vectors for real unstable ones
  double threshold = 0.0;

  bool all_real(double rel = 1e-8) const {
    for (const auto& l : unstable) {
      if (!(std::abs(l.imag()) < rel * std::abs(l))) return false;
    }
    return true;
  }
};

namespace detail {

// Positive root of a l^2 + b l + c = 0 (a > 0, c < 0), written to avoid cancellation.
inline double positive_root(double a, double b, double c) {
  const double disc = std::sqrt(std::max(0.0, b * b - 4.0 * a * c));
  return b >= 0.0 ? -2.0 * c / (b + disc) : (-b + disc) / (2.0 * a);
}

// Inverse iteration on Q(l) = l^2 M + l D + K with the scalar Rayleigh update.
inline std::pair<double, std::vector<double>> refine_real_mode(const SymTridiag& M, const SymTridiag& D,
                                                               const SymTridiag& K, double lambda) {
  const std::size_t n = M.size();
  std::vector<double> x(n, 1.0);
  double l = lambda;
  for (int it = 0; it < 8; ++it) {
    // An exact root gives an exactly zero pivot; a shift by a few ulps keeps the solve defined
    // and still amplifies the null direction.
    double shift = l;
    for (int tries = 0;; ++tries) {
      try {
        x = TridiagLU(combine(shift * shift, M, shift, D, 1.0, &K)).solve(x);
        break;
      } catch (const NumericalError&) {
        if (tries == 4) throw;
        shift = l * (1.0 + 1e-13 * std::pow(10.0, tries));
      }
    }
    double nrm = 0.0;
    for (double v : x) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (!(nrm > 0.0) || !std::isfinite(nrm)) throw NumericalError("qep: inverse iteration broke down");
    for (double& v : x) v /= nrm;
    const double a = M.form(x), b = D.form(x), c = K.form(x);
    if (!(c < 0.0)) break;
    const double next = positive_root(a, b, c);
    const bool done = std::abs(next - l) <= 1e-14 * std::abs(l);
    l = next;
    if (done) break;
  }
  return {l, x};
}

}  // namespace detail

/// Quadratic eigenproblem l^2 M u + l tau D u + K u = 0.
///
/// The companion pencil is solved through the shift-invert operator (A - sigma B)^{-1} B,
/// formed column by column from tridiagonal solves with Q(sigma) = sigma^2 M + sigma tau D + K,
/// after symmetric diagonal scaling by diag(M)^{1/2}. A real shift with sigma^2 above the most
/// negative pencil eigenvalue keeps Q(sigma) positive definite.
inline QepResult solve_qep(const OperatorTriple& t, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("solve_qep: tau must lie in [0, 1]");
  QepResult out;
  out.tau = tau;
  const std::size_t n = t.size();
  const auto s = detail::diag_sqrt(t.Mmat);
  const SymTridiag Ms = t.Mmat.scaled(s), Ks = t.Kmat.scaled(s);
  SymTridiag Ds = t.Dmat.scaled(s);
  for (double& v : Ds.d) v *= tau;
  for (double& v : Ds.e) v *= tau;

  const double scale = std::sqrt(Ks.frobenius() / Ms.frobenius());
  out.threshold = 1e-8 * scale;
  const double s0 = pencil_eigenvalue(Ks, Ms, 0);
  double sigma = 1.5 * std::sqrt(std::abs(s0));
  if (!(sigma > 1e-6 * scale)) sigma = 1e-3 * scale;
  out.shift = sigma;

  const SymTridiag Q = combine(sigma * sigma, Ms, sigma, Ds, 1.0, &Ks);
  const TridiagLU lu(Q);
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd X1 = -(Ds.dense() + sigma * Ms.dense());
  Eigen::MatrixXd X2 = -Ms.dense();
  lu.solve(X1.data(), static_cast<int>(n));
  lu.solve(X2.data(), static_cast<int>(n));
  Eigen::MatrixXd C(2 * N, 2 * N);
  C.topLeftCorner(N, N) = X1;
  C.topRightCorner(N, N) = X2;
  C.bottomLeftCorner(N, N) = sigma * X1 + Eigen::MatrixXd::Identity(N, N);
  C.bottomRightCorner(N, N) = sigma * X2;
  if (!C.allFinite()) throw NumericalError("solve_qep: non-finite shift-invert operator");

  const auto theta = dense_eigenvalues(C);
  double tmax = 0.0;
  for (const auto& z : theta) tmax = std::max(tmax, std::abs(z));
  for (const auto& z : theta) {
    if (std::abs(z) <= 1e-12 * tmax) {
      ++out.dropped;
      continue;
    }
    out.eigenvalues.push_back(sigma + 1.0 / z);
  }
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end(),
            [](auto a, auto b) { return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag(); });
  for (const auto& l : out.eigenvalues) {
    if (l.real() > out.threshold) out.unstable.push_back(l);
  }
  for (auto& l : out.unstable) {
    if (l.imag() != 0.0) continue;
    auto [lr, x] = detail::refine_real_mode(Ms, Ds, Ks, l.real());
    if (std::abs(lr - l.real()) <= 1e-3 * std::abs(l.real())) l = lr;
    for (std::size_t i = 0; i < n; ++i) x[i] /= s[i];
    out.vectors.push_back(std::move(x));
  }
  return out;
}

/// k-th largest real root (k >= 1) of det(l^2 M + l D + K) = 0 on l > 0, with its vector.
///
/// For l > 0 the pencil Q(l) = l^2 M + l D + K increases with l, so its negative count drops by
/// one at each real root; the root is located by bisection on that count and polished by inverse
/// iteration. Costs O(n) per count, so it serves grids too large for the dense solve.
inline std::optional<std::pair<double, std::vector<double>>> real_unstable_root(const OperatorTriple& t, int k = 1) {
  if (k < 1) throw DomainError("real_unstable_root: k must be >= 1");
  const auto s = detail::diag_sqrt(t.Mmat);
  const SymTridiag Ms = t.Mmat.scaled(s), Ds = t.Dmat.scaled(s), Ks = t.Kmat.scaled(s);
  const SymTridiag zero(t.size());
  auto neg = [&](double l) { return sturm_count(combine(l * l, Ms, l, Ds, 1.0, &Ks), zero, 0.0); };
  if (neg(0.0) < k) return std::nullopt;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; neg(hi) >= k; ++i) {
    if (i > 200) throw NumericalError("real_unstable_root: no upper bracket");
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (neg(mid) >= k ? lo : hi) = mid;
  }
  auto [l, x] = detail::refine_real_mode(Ms, Ds, Ks, 0.5 * (lo + hi));
  if (!(std::abs(l - 0.5 * (lo + hi)) <= 1e-6 * hi)) l = 0.5 * (lo + hi);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] /= s[i];
  return std::pair{l, std::move(x)};
}

/// Growth rates of the inviscid problem: l = sqrt(-s) for each negative eigenvalue s of K u = s M u.
inline std::vector<double> euler_poisson_spectrum(const OperatorTriple& t) {
  const auto sc = detail::diag_sqrt(t.Mmat);
  const SymTridiag Ms = t.Mmat.scaled(sc), Ks = t.Kmat.scaled(sc);
  const int nneg = sturm_count(Ks, Ms, 0.0);
  std::vector<double> rates;
  for (int k = 0; k < nneg; ++k) rates.push_back(std::sqrt(-pencil_eigenvalue(Ks, Ms, k)));
  return rates;  // largest first, since pencil eigenvalues ascend
}

struct SpectrumReport {
  double mu = 0.0;
  int cells = 0;
  double nu1 = 0.0, nu2 = 0.0;
  Coordinate coordinate = Coordinate::eulerian;
  int n_minus = 0;
  double ker_margin = 0.0;
  bool degenerate = false;
  std::vector<std::complex<double>> unstable_eigenvalues;  // at tau = 1
  std::vector<std::vector<double>> unstable_vectors;       // nodal displacements u(r_1..r_n)
  std::vector<double> ep_unstable_eigenvalues;
  std::vector<std::pair<double, int>> homotopy_counts;
  bool real_unstable = true;
  std::optional<bool> ktc_verified;  // empty when the kernel is degenerate
  std::vector<double> radii;

  double most_unstable() const {
    double best = 0.0;
    for (const auto& l : unstable_eigenvalues) best = std::max(best, l.real());
    return best;
  }
};

inline std::vector<double> default_tau_grid() { return {0.0, 0.25, 0.5, 0.75, 1.0}; }

/// Inertia, QEP at each tau and the inviscid spectrum, with the count agreement verdict.
inline SpectrumReport verify_ktc(const OperatorTriple& t, std::vector<double> tau_grid = default_tau_grid(),
                                 unsigned threads = worker_count()) {
  if (tau_grid.empty()) throw DomainError("verify_ktc: empty tau grid");
  SpectrumReport rep;
  rep.mu = t.mu;
  rep.cells = static_cast<int>(t.size());
  rep.nu1 = t.nu1;
  rep.nu2 = t.nu2;
  rep.coordinate = t.coordinate;
  rep.radii = t.radii;
  const Inertia in = inertia_nminus(t);
  rep.n_minus = in.n_minus;
  rep.ker_margin = in.ker_margin;
  rep.degenerate = in.degenerate;
  rep.ep_unstable_eigenvalues = euler_poisson_spectrum(t);

  if (std::find(tau_grid.begin(), tau_grid.end(), 1.0) == tau_grid.end()) tau_grid.push_back(1.0);
  std::vector<QepResult> res(tau_grid.size());
  parallel_for(tau_grid.size(), [&](std::size_t i) { res[i] = solve_qep(t, tau_grid[i]); }, threads);

  bool agree = static_cast<int>(rep.ep_unstable_eigenvalues.size()) == rep.n_minus;
  for (const auto& r : res) {
    rep.homotopy_counts.emplace_back(r.tau, static_cast<int>(r.unstable.size()));
    agree = agree && static_cast<int>(r.unstable.size()) == rep.n_minus;
    rep.real_unstable = rep.real_unstable && r.all_real();
    if (r.tau == 1.0) {
      rep.unstable_eigenvalues = r.unstable;
      for (const auto& v : r.vectors) rep.unstable_vectors.push_back(to_displacement(t, v));
    }
  }
  if (!rep.degenerate) rep.ktc_verified = agree && rep.real_unstable;
  return rep;
}

struct LinearSample {
  double t = 0.0;
  double kinetic = 0.0;    // v.Mv
  double potential = 0.0;  // u.Ku
  double norm = 0.0;       // u.Mu
  double dissipated = 0.0; // 2 int v.Dv dt (trapezoid in time)
  double energy() const { return kinetic + potential; }
};

struct LinearSeries {
  double dt = 0.0;
  std::vector<LinearSample> rows;

  /// Accumulated energy-identity residual |E(T) - E(0) + dissipated(T)| divided by the span T.
  double residual_rate() const {
    if (rows.size() < 2) return 0.0;
    const auto& a = rows.front();
    const auto& b = rows.back();
    return std::abs(b.energy() - a.energy() + b.dissipated) / (b.t - a.t);
  }
};

/// Trapezoidal integration of M u'' + D u' + K u = 0 from coefficient vectors (u0, v0).
/// Each step solves (M + dt/2 D + dt^2/4 K) v1 = (M - dt/2 D - dt^2/4 K) v0 - dt K u0.
inline LinearSeries evolve_linear(const OperatorTriple& t, const std::vector<double>& u0, const std::vector<double>& v0,
                                  double tmax, double dt, double sample_dt = 0.0) {
  if (!(dt > 0.0)) throw DomainError("evolve_linear: dt must be positive");
  if (!(tmax >= 0.0)) throw DomainError("evolve_linear: tmax must be nonnegative");
  const std::size_t n = t.size();
  if (u0.size() != n || v0.size() != n) throw DomainError("evolve_linear: initial data size mismatch");
  const auto s = detail::diag_sqrt(t.Mmat);
  const SymTridiag Ms = t.Mmat.scaled(s), Ds = t.Dmat.scaled(s), Ks = t.Kmat.scaled(s);
  std::vector<double> u(n), v(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = u0[i] * s[i], v[i] = v0[i] * s[i];

  const TridiagLU lhs(combine(1.0, Ms, 0.5 * dt, Ds, 0.25 * dt * dt, &Ks));
  const SymTridiag rhs = combine(1.0, Ms, -0.5 * dt, Ds, -0.25 * dt * dt, &Ks);

  LinearSeries ts;
  ts.dt = dt;
  const auto steps = static_cast<long>(std::llround(tmax / dt));
  const long every = sample_dt > 0.0 ? std::max(1L, std::lround(sample_dt / dt)) : 1L;
  double diss = 0.0, vdv = Ds.form(v);
  auto record = [&](double time) { ts.rows.push_back({time, Ms.form(v), Ks.form(u), Ms.form(u), diss}); };
  record(0.0);
  for (long k = 1; k <= steps; ++k) {
    auto b = rhs.apply(v);
    const auto ku = Ks.apply(u);
    for (std::size_t i = 0; i < n; ++i) b[i] -= dt * ku[i];
    const auto v1 = lhs.solve(std::move(b));
    for (std::size_t i = 0; i < n; ++i) u[i] += 0.5 * dt * (v[i] + v1[i]);
    v = v1;
    const double vdv1 = Ds.form(v);
    diss += dt * (vdv + vdv1);
    vdv = vdv1;
    if (k % every == 0 || k == steps) record(k * dt);
  }
  return ts;
}

}  // namespace starspec
