#pragma once

// Symmetric tridiagonal matrices and the few LAPACK calls the spectral code needs.

#include <lapacke.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "starspec/error.hpp"

namespace starspec {

/// Symmetric tridiagonal matrix: diagonal d (size n) and off-diagonal e (size n-1).
struct SymTridiag {
  std::vector<double> d, e;

  SymTridiag() = default;
  explicit SymTridiag(std::size_t n) : d(n, 0.0), e(n > 0 ? n - 1 : 0, 0.0) {}

  std::size_t size() const { return d.size(); }

  std::vector<double> apply(const std::vector<double>& x) const {
    const std::size_t n = size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = d[i] * x[i];
      if (i > 0) s += e[i - 1] * x[i - 1];
      if (i + 1 < n) s += e[i] * x[i + 1];
      y[i] = s;
    }
    return y;
  }

  double form(const std::vector<double>& x, const std::vector<double>& y) const {
    const auto ax = apply(x);
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += ax[i] * y[i];
    return s;
  }
  double form(const std::vector<double>& x) const { return form(x, x); }

  double frobenius() const {
    double s = 0.0;
    for (double v : d) s += v * v;
    for (double v : e) s += 2 * v * v;
    return std::sqrt(s);
  }

  Eigen::MatrixXd dense() const {
    const auto n = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      a(i, i) = d[static_cast<std::size_t>(i)];
      if (i + 1 < n) a(i, i + 1) = a(i + 1, i) = e[static_cast<std::size_t>(i)];
    }
    return a;
  }

  /// S^{-1} A S^{-1} for diagonal S = diag(s).
  SymTridiag scaled(const std::vector<double>& s) const {
    SymTridiag r = *this;
    for (std::size_t i = 0; i < size(); ++i) r.d[i] /= s[i] * s[i];
    for (std::size_t i = 0; i + 1 < size(); ++i) r.e[i] /= s[i] * s[i + 1];
    return r;
  }
};

/// a A + b B + c C, all of the same size.
inline SymTridiag combine(double a, const SymTridiag& A, double b, const SymTridiag& B, double c = 0.0,
                          const SymTridiag* C = nullptr) {
  SymTridiag r(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) r.d[i] = a * A.d[i] + b * B.d[i] + (C ? c * C->d[i] : 0.0);
  for (std::size_t i = 0; i < A.e.size(); ++i) r.e[i] = a * A.e[i] + b * B.e[i] + (C ? c * C->e[i] : 0.0);
  return r;
}

/// Negative pivots of the LDL^T factorisation of A - s B. Returns nullopt on an exact zero pivot.
inline std::optional<int> negative_pivots(const SymTridiag& A, const SymTridiag& B, double s) {
  int neg = 0;
  double prev = 1.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    double p = A.d[i] - s * B.d[i];
    if (i > 0) {
      const double off = A.e[i - 1] - s * B.e[i - 1];
      p -= off * off / prev;
    }
    if (p == 0.0) return std::nullopt;
    if (p < 0.0) ++neg;
    prev = p;
  }
  return neg;
}

/// Sturm count: number of pencil eigenvalues below s. A zero pivot is nudged, as is standard
/// for bisection, since it only moves s by a rounding unit.
inline int sturm_count(const SymTridiag& A, const SymTridiag& B, double s) {
  int neg = 0;
  double prev = 1.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    double p = A.d[i] - s * B.d[i];
    if (i > 0) {
      const double off = A.e[i - 1] - s * B.e[i - 1];
      p -= off * off / prev;
    }
    if (p == 0.0) p = -1e-300;
    if (p < 0.0) ++neg;
    prev = p;
  }
  return neg;
}

/// k-th smallest eigenvalue (0-based) of the definite pencil (A, B) by bisection.
inline double pencil_eigenvalue(const SymTridiag& A, const SymTridiag& B, int k) {
  double lo = -1.0, hi = 1.0;
  for (int i = 0; sturm_count(A, B, lo) > k; ++i) {
    if (i > 2000) throw NumericalError("pencil_eigenvalue: no lower bracket");
    lo *= 2.0;
  }
  for (int i = 0; sturm_count(A, B, hi) <= k; ++i) {
    if (i > 2000) throw NumericalError("pencil_eigenvalue: no upper bracket");
    hi *= 2.0;
  }
  for (int i = 0; i < 400; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (sturm_count(A, B, mid) > k ? hi : lo) = mid;
    if (hi - lo <= 1e-15 * std::max(std::abs(lo), std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

/// LU factorisation of a (general) tridiagonal matrix, reused across many solves.
class TridiagLU {
 public:
  explicit TridiagLU(const SymTridiag& a) : dl_(a.e), d_(a.d), du_(a.e), du2_(a.size()), ipiv_(a.size()) {
    const auto n = static_cast<lapack_int>(a.size());
    const lapack_int info = LAPACKE_dgttrf(n, dl_.data(), d_.data(), du_.data(), du2_.data(), ipiv_.data());
    if (info != 0) throw NumericalError("tridiagonal factorisation failed (info=" + std::to_string(info) + ")");
  }

  /// Solves in place for nrhs column-major right-hand sides of leading dimension n.
  void solve(double* b, int nrhs = 1) const {
    const auto n = static_cast<lapack_int>(d_.size());
    const lapack_int info = LAPACKE_dgttrs(LAPACK_COL_MAJOR, 'N', n, nrhs, dl_.data(), d_.data(), du_.data(),
                                           du2_.data(), ipiv_.data(), b, n);
    if (info != 0) throw NumericalError("tridiagonal solve failed (info=" + std::to_string(info) + ")");
  }

  std::vector<double> solve(std::vector<double> b) const {
    solve(b.data());
    return b;
  }

 private:
  std::vector<double> dl_, d_, du_, du2_;
  std::vector<lapack_int> ipiv_;
};

/// Eigenvalues of a dense general matrix (column-major, overwritten).
inline std::vector<std::complex<double>> dense_eigenvalues(Eigen::MatrixXd& a) {
  const auto n = static_cast<lapack_int>(a.rows());
  std::vector<double> wr(static_cast<std::size_t>(n)), wi(static_cast<std::size_t>(n));
  const lapack_int info =
      LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', n, a.data(), n, wr.data(), wi.data(), nullptr, 1, nullptr, 1);
  if (info != 0) throw NumericalError("dense eigensolver failed to converge (info=" + std::to_string(info) + ")");
  std::vector<std::complex<double>> w(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = {wr[i], wi[i]};
  return w;
}

}  // namespace starspec
