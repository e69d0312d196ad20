#pragma once

// Mass-radius curve mu -> (M(mu), R(mu)) and the turning point count of unstable modes.
//
// The count at small mu is fixed by gamma1 (1 below 4/3, 0 above) and changes only at
// mass extrema: +1 where the oriented (R, M) curve bends counterclockwise (M'R' goes
// from negative to positive), -1 where it bends clockwise.

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "starspec/equilibrium.hpp"
#include "starspec/error.hpp"
#include "starspec/parallel.hpp"

namespace starspec {

enum class ExtremumKind { mass_max, mass_min };
enum class Bend { counterclockwise, clockwise, degenerate };

inline const char* to_string(ExtremumKind k) { return k == ExtremumKind::mass_max ? "mass-max" : "mass-min"; }
inline const char* to_string(Bend b) {
  switch (b) {
    case Bend::counterclockwise: return "counterclockwise";
    case Bend::clockwise: return "clockwise";
    default: return "degenerate";
  }
}

struct CurveExtremum {
  double mu_star = 0.0;
  double mu_lo = 0.0, mu_hi = 0.0;  // final bracket
  ExtremumKind kind = ExtremumKind::mass_max;
  Bend bend = Bend::degenerate;
};

struct CurveSegment {
  double mu_lo = 0.0, mu_hi = 0.0;
  int n_unstable = 0;
};

struct MassRadiusCurve {
  std::vector<double> mus, M, R, dM, dR;  // dM, dR are derivatives with respect to mu
  std::vector<CurveExtremum> extrema;      // ordered by mu
  std::vector<CurveSegment> counts;        // filled by turning_point_counts

  /// Unstable count on the segment containing mu (segments are closed on the left).
  int count_at(double mu) const {
    if (counts.empty()) throw DomainError("count_at: counts not computed");
    for (const auto& s : counts) {
      if (mu < s.mu_hi) return s.n_unstable;
    }
    return counts.back().n_unstable;
  }
};

/// (M, R) for a given centre density.
using MassRadiusFn = std::function<std::pair<double, double>(double)>;

namespace detail {

// d/d(log mu) by fourth-order differences on a uniform log grid, one-sided near the ends.
inline std::vector<double> log_derivative(const std::vector<double>& f, double dl) {
  const std::size_t n = f.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= 2 && i + 2 < n) {
      d[i] = (-f[i + 2] + 8 * f[i + 1] - 8 * f[i - 1] + f[i - 2]) / (12 * dl);
    } else if (i == 0) {
      d[i] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * dl);
    } else if (i == 1) {
      d[i] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * dl);
    } else if (i == n - 2) {
      d[i] = (3 * f[n - 1] + 10 * f[n - 2] - 18 * f[n - 3] + 6 * f[n - 4] - f[n - 5]) / (12 * dl);
    } else {
      d[i] = (25 * f[n - 1] - 48 * f[n - 2] + 36 * f[n - 3] - 16 * f[n - 4] + 3 * f[n - 5]) / (12 * dl);
    }
  }
  return d;
}

inline int sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace detail

/// Sweep a generic (M, R) family. Samples are log-spaced; every sign change of dM is refined
/// by bisection in mu until the extremum is bracketed to 1e-3 relative.
inline MassRadiusCurve sweep_curve(const MassRadiusFn& fn, double mu_min, double mu_max, int n_points,
                                   unsigned threads = worker_count()) {
  if (!(mu_min > 0.0 && mu_max > mu_min)) throw DomainError("sweep_curve: need 0 < mu_min < mu_max");
  if (n_points < 8) throw DomainError("sweep_curve: need at least 8 points");
  const std::size_t n = static_cast<std::size_t>(n_points);
  const double dl = std::log(mu_max / mu_min) / (n - 1);

  MassRadiusCurve c;
  c.mus.resize(n);
  c.M.resize(n);
  c.R.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.mus[i] = mu_min * std::exp(dl * i);
  c.mus.back() = mu_max;
  parallel_for(n, [&](std::size_t i) { std::tie(c.M[i], c.R[i]) = fn(c.mus[i]); }, threads);

  const auto dMl = detail::log_derivative(c.M, dl), dRl = detail::log_derivative(c.R, dl);
  c.dM.resize(n);
  c.dR.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.dM[i] = dMl[i] / c.mus[i];
    c.dR[i] = dRl[i] / c.mus[i];
  }

  double mmax = 0.0;
  for (double m : c.M) mmax = std::max(mmax, std::abs(m));
  const double flat = 1e-6 * mmax * dl;  // |d M / d log mu| below this is a candidate extremum

  // Local log-derivatives at an arbitrary mu, five-point stencil.
  const double dlocal = dl / 4;
  auto local = [&](double mu) {
    std::array<std::pair<double, double>, 4> s;
    const std::array<double, 4> off{-2, -1, 1, 2};
    parallel_for(4, [&](std::size_t k) { s[k] = fn(mu * std::exp(off[k] * dlocal)); }, threads);
    const double dm = (-s[3].first + 8 * s[2].first - 8 * s[1].first + s[0].first) / (12 * dlocal);
    const double dr = (-s[3].second + 8 * s[2].second - 8 * s[1].second + s[0].second) / (12 * dlocal);
    return std::pair{dm, dr};
  };

  // Walk the signed samples; a flat stretch between two of them is bracketed as a whole.
  std::size_t i = 0;
  while (i < n && std::abs(dMl[i]) < flat) ++i;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && std::abs(dMl[j]) < flat) ++j;
    if (j == n) break;
    const int s0 = detail::sign(dMl[i]);
    if (detail::sign(dMl[j]) == s0) {
      i = j;
      continue;
    }
    double lo = c.mus[i], hi = c.mus[j];
    auto [dm_lo, dr_lo] = std::pair{dMl[i], dRl[i]};
    auto [dm_hi, dr_hi] = std::pair{dMl[j], dRl[j]};
    while (hi / lo - 1.0 > 1e-3) {
      const double mid = std::sqrt(lo * hi);
      const auto [dm, dr] = local(mid);
      if (detail::sign(dm) == s0) {
        lo = mid, dm_lo = dm, dr_lo = dr;
      } else {
        hi = mid, dm_hi = dm, dr_hi = dr;
      }
    }
    CurveExtremum e;
    e.mu_lo = lo;
    e.mu_hi = hi;
    e.mu_star = std::sqrt(lo * hi);
    e.kind = s0 > 0 ? ExtremumKind::mass_max : ExtremumKind::mass_min;
    const int before = detail::sign(dm_lo) * detail::sign(dr_lo);
    const int after = detail::sign(dm_hi) * detail::sign(dr_hi);
    if (before < 0 && after > 0) {
      e.bend = Bend::counterclockwise;
    } else if (before > 0 && after < 0) {
      e.bend = Bend::clockwise;
    } else {
      e.bend = Bend::degenerate;
    }
    c.extrema.push_back(e);
    i = j;
  }
  return c;
}

/// Sweep of equilibria for an equation of state. Failures name the offending mu.
inline MassRadiusCurve sweep_curve(const EquationOfState& eos, double mu_min, double mu_max, int n_points,
                                   double tol = 1e-10, unsigned threads = worker_count()) {
  MassRadiusFn fn = [&eos, tol](double mu) {
    char tag[64];
    std::snprintf(tag, sizeof tag, "mu=%.17g: ", mu);
    try {
      const auto p = solve_profile(eos, mu, tol);
      return std::pair{p.mass(), p.radius()};
    } catch (const DomainError& e) {
      throw DomainError(tag + std::string(e.what()));
    } catch (const NumericalError& e) {
      throw NumericalError(tag + std::string(e.what()));
    }
  };
  return sweep_curve(fn, mu_min, mu_max, n_points, threads);
}

/// Fill curve.counts from gamma1 and the classified extrema.
inline MassRadiusCurve turning_point_counts(MassRadiusCurve curve, double gamma1) {
  if (!(gamma1 > 1.2 && gamma1 < 2.0 + 1e-15)) throw DomainError("turning_point_counts: gamma1 outside (6/5, 2)");
  if (std::abs(gamma1 - 4.0 / 3.0) < 1e-12) {
    throw DomainError("mass-critical exponent gamma1 = 4/3: small-mu count undefined");
  }
  if (curve.mus.size() < 2) throw DomainError("turning_point_counts: empty curve");

  std::vector<double> cuts{curve.mus.front()};
  for (const auto& e : curve.extrema) cuts.push_back(e.mu_star);
  cuts.push_back(curve.mus.back());

  double mmax = 0.0;
  for (double m : curve.M) mmax = std::max(mmax, std::abs(m));
  curve.counts.clear();
  int count = gamma1 < 4.0 / 3.0 ? 1 : 0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    if (k > 0) {
      const auto& e = curve.extrema[k - 1];
      if (e.bend == Bend::degenerate) {
        throw NumericalError("degenerate curve: bend direction undefined at mu=" + std::to_string(e.mu_star));
      }
      count += e.bend == Bend::counterclockwise ? 1 : -1;
      if (count < 0) throw NumericalError("turning_point_counts: negative count after mu=" + std::to_string(e.mu_star));
    }
    // The turning point principle needs M' != 0 somewhere inside each segment.
    bool any = false, sampled = false;
    for (std::size_t i = 0; i < curve.mus.size(); ++i) {
      const double mu = curve.mus[i];
      if (mu < cuts[k] || mu > cuts[k + 1]) continue;
      sampled = true;
      if (std::abs(curve.dM[i] * mu) > 1e-6 * mmax) any = true;
    }
    if (sampled && !any) throw NumericalError("degenerate curve: M' vanishes over a whole segment");
    curve.counts.push_back({cuts[k], cuts[k + 1], count});
  }
  return curve;
}

}  // namespace starspec
