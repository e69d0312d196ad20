#pragma once

// Static spherically symmetric equilibria:
//   dm/dr = 4 pi r^2 rho(h),   dh/dr = -m / r^2,
// with h the specific enthalpy, started from the centre series and stopped where h
// first reaches zero (the vacuum boundary R).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "starspec/eos.hpp"
#include "starspec/error.hpp"
#include "starspec/ode.hpp"

namespace starspec {

struct ProfileOptions {
  int nodes = 800;             // resampled grid size
  double radius_cap = 1e4;     // in units of sqrt(h_c / mu); beyond this the star is non-compact
};

/// Pointwise state of an equilibrium.
struct ProfilePoint {
  double rho = 0.0;
  double drho = 0.0;
  double m = 0.0;
  double h = 0.0;
  double P = 0.0;
  double Pprime = 0.0;
  double phi2 = 0.0;  // HUGE_VAL at vacuum unless gamma1 = 2
};

class StarProfile {
 public:
  StarProfile(EquationOfState eos, double mu, double R, double M, std::vector<double> r, std::vector<double> h,
              std::vector<double> m)
      : eos_(std::move(eos)), mu_(mu), R_(R), M_(M), r_(std::move(r)), h_(std::move(h)), m_(std::move(m)) {
    rho_.resize(r_.size());
    drho_.resize(r_.size());
    for (std::size_t i = 0; i < r_.size(); ++i) {
      rho_[i] = eos_.rho_from_enthalpy_unchecked(h_[i]);
      drho_[i] = density_gradient(r_[i], rho_[i], m_[i]);
    }
    rho_.front() = mu_;
    rho_.back() = 0.0;
  }

  const EquationOfState& eos() const { return eos_; }
  double mu() const { return mu_; }
  double radius() const { return R_; }
  double mass() const { return M_; }
  const std::vector<double>& grid() const { return r_; }
  const std::vector<double>& rho() const { return rho_; }
  const std::vector<double>& drho() const { return drho_; }
  const std::vector<double>& m() const { return m_; }
  const std::vector<double>& h() const { return h_; }

  /// Interpolated profile fields. h and m use cubic Hermite interpolation with their exact
  /// derivatives (-m/r^2 and 4 pi r^2 rho); rho is recovered through the enthalpy inverse so
  /// that the near-vacuum power law is preserved.
  ProfilePoint query(double r) const {
    if (!(r >= 0.0 && r <= R_)) throw DomainError("profile_query: r outside [0, R]");
    ProfilePoint p;
    if (r == R_) {
      p.m = M_;
      p.drho = drho_.back();
      p.phi2 = eos_.phi2_at_vacuum();
      return p;
    }
    if (r == 0.0) {
      p.rho = mu_;
      p.h = h_.front();
      p.P = eos_.pressure(mu_);
      p.Pprime = eos_.dpressure(mu_);
      p.phi2 = eos_.phi2(mu_);
      return p;
    }
    const auto it = std::upper_bound(r_.begin(), r_.end(), r);
    const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(it - r_.begin()), r_.size() - 1);
    const std::size_t i = j - 1;
    const double r0 = r_[i], r1 = r_[j], dr = r1 - r0;
    const double s = (r - r0) / dr;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    const double dh0 = r0 > 0.0 ? -m_[i] / (r0 * r0) : 0.0;
    const double dh1 = -m_[j] / (r1 * r1);
    const double dm0 = 4.0 * std::numbers::pi * r0 * r0 * rho_[i];
    const double dm1 = 4.0 * std::numbers::pi * r1 * r1 * rho_[j];
    p.h = std::max(0.0, h00 * h_[i] + h10 * dr * dh0 + h01 * h_[j] + h11 * dr * dh1);
    p.m = std::clamp(h00 * m_[i] + h10 * dr * dm0 + h01 * m_[j] + h11 * dr * dm1, 0.0, M_);
    p.rho = eos_.rho_from_enthalpy_unchecked(p.h);
    p.drho = density_gradient(r, p.rho, p.m);
    if (p.rho > 0.0) {
      p.P = eos_.pressure(p.rho);
      p.Pprime = eos_.dpressure_unchecked(p.rho);
      p.phi2 = eos_.phi2_unchecked(p.rho);
    } else {
      p.phi2 = eos_.phi2_at_vacuum();
    }
    return p;
  }

  /// Radius enclosing mass x, by bisection on the interpolated m(r).
  double radius_of_mass(double x) const {
    if (!(x >= 0.0 && x <= M_)) throw DomainError("radius_of_mass: mass outside [0, M]");
    if (x == 0.0) return 0.0;
    if (x == M_) return R_;
    const auto it = std::lower_bound(m_.begin(), m_.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - m_.begin());
    double lo = r_[j - 1], hi = r_[j];
    for (int k = 0; k < 200 && hi - lo > 1e-15 * R_; ++k) {
      const double mid = 0.5 * (lo + hi);
      (query(mid).m < x ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  // Hydrostatic balance P'(rho) drho/dr = -rho m / r^2, written through Phi'' = P'/rho.
  double density_gradient(double r, double rho, double m) const {
    if (r == 0.0) return 0.0;
    const double phi2 = rho > 0.0 ? eos_.phi2_unchecked(rho) : eos_.phi2_at_vacuum();
    return -m / (r * r * phi2);
  }

  EquationOfState eos_;
  double mu_, R_, M_;
  std::vector<double> r_, h_, m_, rho_, drho_;
};

/// Cosine-clustered nodes on [0, R], dense toward both ends.
inline std::vector<double> cosine_grid(double R, int cells) {
  std::vector<double> r(static_cast<std::size_t>(cells) + 1);
  for (int i = 0; i <= cells; ++i) {
    r[static_cast<std::size_t>(i)] = 0.5 * R * (1.0 - std::cos(std::numbers::pi * i / cells));
  }
  r.front() = 0.0;
  r.back() = R;
  return r;
}

/// Hydrostatic equilibrium with centre density mu, integrated to relative tolerance tol.
inline StarProfile solve_profile(const EquationOfState& eos, double mu, double tol = 1e-10,
                                 const ProfileOptions& opts = {}) {
  if (!(mu > 0.0)) throw DomainError("solve_profile: centre density must be positive");
  if (!(tol > 0.0 && tol < 1e-2)) throw DomainError("solve_profile: tolerance must be in (0, 1e-2)");
  if (opts.nodes < 8) throw DomainError("solve_profile: need at least 8 nodes");
  constexpr double pi = std::numbers::pi;

  // Work in scaled variables r = L s, h = h_c y, m = mu L^3 q with L = sqrt(h_c / mu), so that
  //   dq/ds = 4 pi s^2 rho / mu,  dy/ds = -q / s^2,  y(0) = 1.
  const double hc = eos.enthalpy(mu);
  const double L = std::sqrt(hc / mu);
  auto rhs = [&](double s, const ode::State<2>& y, ode::State<2>& dy) {
    const double rho = eos.rho_from_enthalpy_unchecked(hc * y[1]);
    dy[0] = 4.0 * pi * s * s * rho / mu;
    dy[1] = -y[0] / (s * s);
  };
  const double s_start = 1e-4;
  const auto series = [&](double s) {
    return ode::State<2>{4.0 * pi / 3.0 * s * s * s, 1.0 - 2.0 * pi / 3.0 * s * s};
  };

  const double rtol = tol, atol = tol * 1e-3;
  ode::State<2> y = series(s_start), trial{};
  double s = s_start, ds = 1e-3;
  double s_root = -1.0;
  ode::State<2> y_root{};
  for (std::size_t steps = 0;; ++steps) {
    if (steps > 2000000) throw NumericalError("solve_profile: step budget exhausted");
    if (s > opts.radius_cap) {
      throw NumericalError("non-compact star: enthalpy did not vanish before radius cap (gamma1 too close to 6/5?)");
    }
    const auto res = ode::dopri_step<2>(rhs, s, y, ds, trial, rtol, atol);
    if (res.error_norm > 1.0) {
      ds = ode::next_step(ds, res.error_norm);
      if (ds < 1e-14 * s) throw NumericalError("solve_profile: step size underflow");
      continue;
    }
    if (trial[1] > 0.0) {
      s += ds;
      y = trial;
      ds = ode::next_step(ds, res.error_norm);
      continue;
    }
    // Vacuum crossed inside this step: bisect on the step length.
    double lo = 0.0, hi = ds;
    bool converged = false;
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (lo + hi);
      ode::dopri_step<2>(rhs, s, y, mid, trial, rtol, atol);
      if (std::abs(trial[1]) <= 1e-12) {
        s_root = s + mid;
        y_root = trial;
        converged = true;
        break;
      }
      (trial[1] > 0.0 ? lo : hi) = mid;
      if (hi - lo <= 1e-16 * (s + hi)) break;
    }
    if (!converged) throw NumericalError("solve_profile: vacuum bisection did not reach tolerance");
    break;
  }

  const double R = s_root * L;
  const double M = y_root[0] * mu * L * L * L;

  // Second pass: march through the graded grid.
  std::vector<double> r = cosine_grid(R, opts.nodes - 1);
  std::vector<double> h(r.size()), m(r.size());
  y = series(s_start);
  s = s_start;
  ds = 1e-3;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double target = r[i] / L;
    if (i + 1 == r.size()) {
      h[i] = 0.0;
      m[i] = M;
    } else if (target <= s_start) {
      const auto ys = series(target);
      h[i] = hc * ys[1];
      m[i] = mu * L * L * L * ys[0];
    } else {
      ode::integrate<2>(rhs, s, target, y, ds, rtol, atol);
      s = target;
      h[i] = hc * std::max(0.0, y[1]);
      m[i] = mu * L * L * L * y[0];
    }
  }
  // Enforce monotone enclosed mass against round-off at the clustered ends.
  m.back() = M;
  for (std::size_t i = 1; i < m.size(); ++i) m[i] = std::min(std::max(m[i], m[i - 1]), M);
  h.front() = hc;
  return StarProfile(eos, mu, R, M, std::move(r), std::move(h), std::move(m));
}

}  // namespace starspec
