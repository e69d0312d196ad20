#pragma once

// Nonlinear free-boundary evolution in the Lagrangian particle coordinate x in [0, R].
//
// Semi-discrete scheme on x_n = n h, for the interior nodes n = 1..N-1:
//   rho_n (x_n/r_n)^2 dv_n/dt = (G_{n+1} - G_n)/h + q_n (x_n^4/r_n^4 - 1) + (Pi_{n+1} - Pi_n)/h,
//   G_n  = B_n + 4 nu1 v_{n-1}/r_{n-1},
//   B_n  = nu (v_n - v_{n-1})/(r_n - r_{n-1}) + (2 nu2 - 4 nu1/3) v_{n-1}/r_{n-1},
//   Pi_n = P(rho_n) - P(x_{n-1}^2 rho_n h / (r_{n-1}^2 (r_n - r_{n-1}))),
// with v_0 = 0, B_N = 0, dr_n/dt = v_n and r_N given by the integrated form of B_N = 0.
// At the centre v_0/r_0 and x_0/r_0 are replaced by their limits v_1/r_1 and x_1/r_1.
//
// The state stores the displacement w = r - x, so that r - x, cell widths h + w_n - w_{n-1}
// and x/r = 1/(1 + w/x) are exact at rest and keep full precision for tiny perturbations.

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "starspec/equilibrium.hpp"
#include "starspec/error.hpp"
#include "starspec/spectral.hpp"

namespace starspec {

enum class PerturbKind { none, displacement, velocity, eigenmode };

inline const char* to_string(PerturbKind k) {
  switch (k) {
    case PerturbKind::displacement: return "displacement";
    case PerturbKind::velocity: return "velocity";
    case PerturbKind::eigenmode: return "eigenmode";
    default: return "none";
  }
}

/// displacement: r0 = x (1 + a sin(k pi x / R)); velocity: v0 = a x;
/// eigenmode: v0 = a phi / max|phi| with phi the k-th most unstable mode (k = 1 the fastest).
struct Perturbation {
  PerturbKind kind = PerturbKind::none;
  double amplitude = 0.0;
  int mode = 1;
};

/// Parses "kind:amp[:mode]", e.g. "displacement:1e-3:2" or "none".
inline Perturbation parse_perturbation(const std::string& spec) {
  Perturbation p;
  const auto c1 = spec.find(':');
  const std::string kind = spec.substr(0, c1);
  if (kind == "none") {
    p.kind = PerturbKind::none;
  } else if (kind == "displacement") {
    p.kind = PerturbKind::displacement;
  } else if (kind == "velocity") {
    p.kind = PerturbKind::velocity;
  } else if (kind == "eigenmode") {
    p.kind = PerturbKind::eigenmode;
  } else {
    throw DomainError("unknown perturbation kind '" + kind + "' (none|displacement|velocity|eigenmode)");
  }
  if (c1 == std::string::npos) {
    if (p.kind != PerturbKind::none) throw DomainError("perturbation '" + spec + "' needs an amplitude");
    return p;
  }
  const auto c2 = spec.find(':', c1 + 1);
  try {
    std::size_t used = 0;
    const std::string amp = spec.substr(c1 + 1, c2 == std::string::npos ? std::string::npos : c2 - c1 - 1);
    p.amplitude = std::stod(amp, &used);
    if (used != amp.size()) throw std::invalid_argument(amp);
    if (c2 != std::string::npos) {
      const std::string mode = spec.substr(c2 + 1);
      p.mode = std::stoi(mode, &used);
      if (used != mode.size()) throw std::invalid_argument(mode);
    }
  } catch (const std::logic_error&) {
    throw DomainError("malformed perturbation '" + spec + "' (expected kind:amp[:mode])");
  }
  if (!std::isfinite(p.amplitude)) throw DomainError("perturbation amplitude must be finite");
  if (p.mode < 1) throw DomainError("perturbation mode must be >= 1");
  return p;
}

struct SimState {
  double t = 0.0;
  int N = 0;
  double h = 0.0;
  std::vector<double> x, rho_ref, P_ref, q;  // reference grid, rho_mu(x_n), P(rho_n), (P(rho_mu))'(x_n)
  std::vector<double> w, v;                  // displacement r - x and velocity, n = 0..N
  std::vector<double> w0;                    // initial displacement, for the boundary closure
  double nu1 = 0.0, nu2 = 0.0, nu = 0.0, beta = 0.0;
  double gamma = 0.0;  // exponent in the weighted terms of E_N
  EquationOfState eos = EquationOfState::polytrope(1.0, 1.5);

  double r(std::size_t n) const { return x[n] + w[n]; }
  std::vector<double> radii() const {
    std::vector<double> r(x.size());
    for (std::size_t n = 0; n < r.size(); ++n) r[n] = x[n] + w[n];
    return r;
  }
};

namespace detail {

// r_n - r_{n-1}, n >= 1.
inline double width(const SimState& s, std::size_t n) { return s.h + (s.w[n] - s.w[n - 1]); }

// (x_n / r_n)^2 with the centre limit.
inline double x_over_r2(const SimState& s, std::size_t n) {
  if (n == 0) n = 1;
  const double a = 1.0 / (1.0 + s.w[n] / s.x[n]);
  return a * a;
}

inline void check_widths(const SimState& s) {
  for (std::size_t n = 1; n < s.x.size(); ++n) {
    const double d = width(s, n);
    if (!(d > 0.0)) {
      throw NumericalError("shell crossing between nodes " + std::to_string(n - 1) + " and " + std::to_string(n) +
                           " at t=" + std::to_string(s.t));
    }
  }
}

// Cell density over rho_n for the cell (x_{n-1}, x_n).
inline double density_ratio(const SimState& s, std::size_t n) { return x_over_r2(s, n - 1) * s.h / width(s, n); }

// Pressure and gravity part of the right-hand side (everything but the viscous fluxes).
inline std::vector<double> force(const SimState& s) {
  const std::size_t N = static_cast<std::size_t>(s.N);
  std::vector<double> Pi(N + 1, 0.0);
  for (std::size_t n = 1; n <= N; ++n) {
    if (s.rho_ref[n] > 0.0) Pi[n] = s.P_ref[n] - s.eos.pressure(s.rho_ref[n] * density_ratio(s, n));
  }
  std::vector<double> f(N + 1, 0.0);
  for (std::size_t n = 1; n < N; ++n) {
    const double x4r4 = std::expm1(-4.0 * std::log1p(s.w[n] / s.x[n]));  // x^4/r^4 - 1
    f[n] = s.q[n] * x4r4 + (Pi[n + 1] - Pi[n]) / s.h;
  }
  return f;
}

// Tridiagonal viscous operator (V v)_n = (G_{n+1} - G_n)/h on the unknowns v_1..v_{N-1},
// stored as (sub, diag, sup) of size N-1.
struct Tri {
  std::vector<double> lo, d, up;
};

inline Tri viscous_operator(const SimState& s) {
  const std::size_t N = static_cast<std::size_t>(s.N), m = N - 1;
  // G_n = a_n v_n + b_n v_{n-1}.
  std::vector<double> a(N + 1, 0.0), b(N + 1, 0.0);
  a[1] = 3.0 * s.nu / s.r(1);
  for (std::size_t n = 2; n < N; ++n) {
    const double dr = width(s, n);
    a[n] = s.nu / dr;
    b[n] = -s.nu / dr + 2.0 * s.nu / s.r(n - 1);
  }
  b[N] = 4.0 * s.nu1 / s.r(N - 1);
  Tri t{std::vector<double>(m - 1, 0.0), std::vector<double>(m, 0.0), std::vector<double>(m - 1, 0.0)};
  for (std::size_t n = 1; n < N; ++n) {
    const std::size_t i = n - 1;
    // G_{n+1} = a_{n+1} v_{n+1} + b_{n+1} v_n,  G_n = a_n v_n + b_n v_{n-1}.
    t.d[i] = (b[n + 1] - a[n]) / s.h;
    if (n + 1 < N) t.up[i] = a[n + 1] / s.h;
    if (n > 1) t.lo[i - 1] = -b[n] / s.h;
  }
  return t;
}

inline std::vector<double> apply(const Tri& t, const std::vector<double>& v) {
  const std::size_t m = t.d.size();
  std::vector<double> y(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = t.d[i] * v[i];
    if (i > 0) s += t.lo[i - 1] * v[i - 1];
    if (i + 1 < m) s += t.up[i] * v[i + 1];
    y[i] = s;
  }
  return y;
}

inline double closure_power(const SimState& s, std::size_t n) {
  // (r0_{N-1} / r_{N-1})^beta - 1
  const double lr = std::log1p((s.w0[n] - s.w[n]) / s.r(n));
  return std::expm1(s.beta * lr);
}

// Sets w_N and v_N from the integrated and differentiated boundary condition B_N = 0.
inline void apply_closure(SimState& s) {
  const std::size_t N = static_cast<std::size_t>(s.N);
  const double dw0 = s.w0[N] - s.w0[N - 1];
  const double pm1 = closure_power(s, N - 1);
  // r_N = r_{N-1} + (h + dw0)(1 + pm1), written as a displacement.
  s.w[N] = s.w[N - 1] + dw0 * (1.0 + pm1) + s.h * pm1;
  s.v[N] = s.v[N - 1] * (1.0 - s.beta * (s.h + dw0) * (1.0 + pm1) / s.r(N - 1));
}

}  // namespace detail

/// |r_N - closure formula|, evaluated directly in radii.
inline double closure_residual(const SimState& s) {
  const std::size_t N = static_cast<std::size_t>(s.N);
  const double r0N = s.x[N] + s.w0[N], r0m = s.x[N - 1] + s.w0[N - 1];
  const double rN = s.r(N - 1) + (r0N - r0m) * std::pow(r0m / s.r(N - 1), s.beta);
  return std::abs(s.r(N) - rN);
}

/// Seeds the Lagrangian state. The eigenmode kind needs `mode_shape`: nodal displacements
/// u(radii[1..]) on `mode_radii` (as in SpectrumReport), sampled at x_n by linear interpolation.
inline SimState init_sim(const StarProfile& profile, int N, double nu1, double nu2, const Perturbation& pert,
                         const std::vector<double>& mode_radii = {}, const std::vector<double>& mode_shape = {}) {
  if (N < 32) throw DomainError("init_sim: need N >= 32");
  if (!(nu1 > 0.0 && nu2 > 0.0)) throw DomainError("init_sim: viscosities must be positive");
  SimState s;
  s.N = N;
  s.h = profile.radius() / N;
  s.nu1 = nu1;
  s.nu2 = nu2;
  s.nu = 4.0 * nu1 / 3.0 + nu2;
  s.beta = 2.0 * nu2 / s.nu - 4.0 * nu1 / (3.0 * s.nu);
  s.eos = profile.eos();
  s.gamma = s.eos.gamma1();
  const std::size_t n1 = static_cast<std::size_t>(N) + 1;
  s.x.resize(n1);
  s.rho_ref.resize(n1);
  s.P_ref.resize(n1);
  s.q.assign(n1, 0.0);
  for (std::size_t n = 0; n < n1; ++n) {
    s.x[n] = static_cast<double>(n) * s.h;
    const auto pt = profile.query(n + 1 == n1 ? profile.radius() : s.x[n]);
    s.rho_ref[n] = pt.rho;
    s.P_ref[n] = s.eos.pressure(pt.rho);
    if (n > 0) s.q[n] = -pt.rho * pt.m / (s.x[n] * s.x[n]);
  }
  s.rho_ref.back() = 0.0;
  s.P_ref.back() = 0.0;
  s.w.assign(n1, 0.0);
  s.v.assign(n1, 0.0);

  const double a = pert.amplitude, R = profile.radius();
  switch (pert.kind) {
    case PerturbKind::none: break;
    case PerturbKind::displacement:
      for (std::size_t n = 1; n < n1; ++n) s.w[n] = a * s.x[n] * std::sin(pert.mode * std::numbers::pi * s.x[n] / R);
      s.w.back() = 0.0;
      break;
    case PerturbKind::velocity:
      for (std::size_t n = 1; n < n1; ++n) s.v[n] = a * s.x[n];
      break;
    case PerturbKind::eigenmode: {
      if (mode_shape.empty() || mode_radii.size() != mode_shape.size() + 1) {
        throw DomainError("init_sim: eigenmode perturbation needs an unstable mode shape");
      }
      double peak = 0.0;
      for (double u : mode_shape) peak = std::max(peak, std::abs(u));
      if (!(peak > 0.0)) throw DomainError("init_sim: zero mode shape");
      // Nodal values on mode_radii, with u(0) = 0.
      std::vector<double> u(mode_radii.size(), 0.0);
      std::copy(mode_shape.begin(), mode_shape.end(), u.begin() + 1);
      for (std::size_t n = 1; n < n1; ++n) {
        const double xn = std::min(s.x[n], mode_radii.back());
        auto it = std::upper_bound(mode_radii.begin(), mode_radii.end(), xn);
        const std::size_t j = std::clamp<std::size_t>(static_cast<std::size_t>(it - mode_radii.begin()), 1,
                                                       mode_radii.size() - 1);
        const double th = (xn - mode_radii[j - 1]) / (mode_radii[j] - mode_radii[j - 1]);
        s.v[n] = a * ((1 - th) * u[j - 1] + th * u[j]) / peak;
      }
      break;
    }
  }
  s.w0 = s.w;
  for (std::size_t n = 1; n < n1; ++n) {
    if (!(detail::width(s, n) > 0.0)) throw DomainError("init_sim: perturbation breaks monotonicity of r0");
  }
  detail::apply_closure(s);
  s.w0[n1 - 1] = s.w[n1 - 1];
  return s;
}

/// dv_n/dt for n = 0..N (zero at both ends; v_N follows from the closure).
inline std::vector<double> rhs(const SimState& s) {
  detail::check_widths(s);
  const std::size_t N = static_cast<std::size_t>(s.N);
  auto f = detail::force(s);
  const auto V = detail::viscous_operator(s);
  const std::vector<double> vin(s.v.begin() + 1, s.v.begin() + static_cast<std::ptrdiff_t>(N));
  const auto vv = detail::apply(V, vin);
  std::vector<double> acc(N + 1, 0.0);
  for (std::size_t n = 1; n < N; ++n) acc[n] = (f[n] + vv[n - 1]) / (s.rho_ref[n] * detail::x_over_r2(s, n));
  return acc;
}

/// One IMEX step: explicit pressure and gravity at the midpoint predictor r* = r + dt/2 v,
/// trapezoidal viscous fluxes at frozen r*, then r advanced with the mean velocity.
inline SimState step(const SimState& s, double dt) {
  if (!(dt > 0.0)) throw DomainError("step: dt must be positive");
  const std::size_t N = static_cast<std::size_t>(s.N), m = N - 1;
  SimState mid = s;
  for (std::size_t n = 1; n < N; ++n) mid.w[n] += 0.5 * dt * s.v[n];
  detail::apply_closure(mid);
  detail::check_widths(mid);

  const auto f = detail::force(mid);
  const auto V = detail::viscous_operator(mid);
  const std::vector<double> v0(s.v.begin() + 1, s.v.begin() + static_cast<std::ptrdiff_t>(N));
  auto b = detail::apply(V, v0);
  std::vector<double> lo(m - 1), d(m), up(m - 1);
  for (std::size_t i = 0; i < m; ++i) {
    const double A = s.rho_ref[i + 1] * detail::x_over_r2(mid, i + 1);
    b[i] = A * v0[i] + 0.5 * dt * b[i] + dt * f[i + 1];
    d[i] = A - 0.5 * dt * V.d[i];
    if (i + 1 < m) {
      lo[i] = -0.5 * dt * V.lo[i];
      up[i] = -0.5 * dt * V.up[i];
    }
  }
  const lapack_int info = LAPACKE_dgtsv(LAPACK_COL_MAJOR, static_cast<lapack_int>(m), 1, lo.data(), d.data(),
                                        up.data(), b.data(), static_cast<lapack_int>(m));
  if (info != 0) throw NumericalError("step: singular implicit viscous system at t=" + std::to_string(s.t));

  SimState out = s;
  out.t = s.t + dt;
  for (std::size_t n = 1; n < N; ++n) {
    out.v[n] = b[n - 1];
    out.w[n] = s.w[n] + 0.5 * dt * (s.v[n] + out.v[n]);
  }
  detail::apply_closure(out);
  detail::check_widths(out);
  for (std::size_t n = 1; n <= N; ++n) {
    if (!std::isfinite(out.w[n]) || !std::isfinite(out.v[n])) {
      throw NumericalError("step: non-finite state at t=" + std::to_string(out.t));
    }
  }
  return out;
}

/// Discrete energy E_N with dv/dt supplied per node (n = 0..N).
inline double discrete_energy(const SimState& s, const std::vector<double>& dvdt) {
  const std::size_t N = static_cast<std::size_t>(s.N);
  const double h = s.h;
  double mx = 0.0;
  for (std::size_t n = 1; n <= N; ++n) {
    const double a = (s.w[n] - s.w[n - 1]) / h, b = (s.v[n] - s.v[n - 1]) / h;
    mx = std::max(mx, a * a + b * b);
  }
  double acc = 0.0, curv = 0.0;
  for (std::size_t n = 1; n < N; ++n) {
    acc += s.rho_ref[n] * dvdt[n] * dvdt[n];
    const double d2 = (s.w[n + 1] - 2 * s.w[n] + s.w[n - 1]) / (h * h);
    const double prev = n == 1 ? s.w[1] / s.x[1] : s.w[n - 1] / s.x[n - 1];
    const double d1 = (s.w[n] / s.x[n] - prev) / h;
    curv += std::pow(s.rho_ref[n], 2 * s.gamma - 1) * (d2 * d2 + d1 * d1);
  }
  return mx + h * acc + h * curv;
}

/// E_N with dv/dt from the right-hand side.
inline double discrete_energy(const SimState& s) { return discrete_energy(s, rhs(s)); }

/// E_N with dv/dt from the difference of two consecutive states.
inline double discrete_energy(const SimState& s, const SimState& prev, double dt) {
  std::vector<double> a(s.v.size());
  for (std::size_t n = 0; n < a.size(); ++n) a[n] = (s.v[n] - prev.v[n]) / dt;
  return discrete_energy(s, a);
}

/// Mass-coordinate energies E^{0,sigma} and E^{0,v}, with sigma/rho_mu = f/rho_mu - 1 per cell.
inline std::pair<double, double> reference_energies(const SimState& s) {
  const std::size_t N = static_cast<std::size_t>(s.N);
  const double c = 4.0 * std::numbers::pi * s.h;
  double es = 0.0, ev = 0.0;
  for (std::size_t n = 1; n <= N; ++n) {
    const double rho = s.rho_ref[n];
    if (rho <= 0.0) continue;
    const double dm = c * s.x[n] * s.x[n] * rho;
    const double ratio = detail::density_ratio(s, n);
    const double sg = ratio - 1.0;
    es += 0.5 * dm * s.eos.dpressure(rho) / ratio * sg * sg;
    if (n < N) ev += 0.5 * dm * s.v[n] * s.v[n];
  }
  return {es, ev};
}

/// sup over cells of |f/rho_mu - 1|.
inline double sup_relative_density(const SimState& s) {
  double mx = 0.0;
  for (std::size_t n = 1; n <= static_cast<std::size_t>(s.N); ++n) {
    mx = std::max(mx, std::abs(detail::density_ratio(s, n) - 1.0));
  }
  return mx;
}

/// Total mass from the cell densities, sum of 4 pi f r_{n-1}^2 (r_n - r_{n-1}); independent of the state.
inline double lagrangian_mass(const SimState& s) {
  double m = 0.0;
  for (std::size_t n = 2; n <= static_cast<std::size_t>(s.N); ++n) {
    const double f = s.rho_ref[n] * detail::density_ratio(s, n);
    m += 4.0 * std::numbers::pi * f * s.r(n - 1) * s.r(n - 1) * detail::width(s, n);
  }
  return m;
}

struct SimRow {
  double t = 0.0;
  double E_N = 0.0;
  double sup_r_err = 0.0;
  double sup_v = 0.0;
  double E0_sigma = 0.0;
  double E0_v = 0.0;
  double r_N = 0.0;
  double sup_sigma = 0.0;
  std::string status = "ok";
  double E0() const { return E0_sigma + E0_v; }
};

struct FitResult {
  std::string kind;
  double t0 = 0.0, t1 = 0.0;
  double value = 0.0;      // decay exponent p or growth rate lambda
  double intercept = 0.0;  // of the fitted line
  double residual = 0.0;   // rms of the fit
  bool ok = false;
  bool super_polynomial = false;  // decay fits only
};

struct TimeSeries {
  std::vector<SimRow> rows;
  std::string status = "ok";  // terminal status: ok, stopped, or the abort reason
  double max_energy_ratio = 0.0;   // max E_N(t)/E_N(0), the measured C'
  double max_closure_residual = 0.0;
  std::vector<FitResult> fits;
  std::vector<double> dump_r, dump_v;  // state at abort
};

struct SimConfig {
  int N = 200;
  double nu1 = 0.1, nu2 = 0.1;
  Perturbation perturbation;
  double tmax = 10.0;
  double dt = 1e-3;
  double output_dt = 0.1;
  double smallness = 0.1;                  // sup |sigma/rho_mu| above this flags a row "large"
  std::optional<double> stop_amplitude;    // stop once sqrt(E0) reaches this value
};

inline SimRow observe(const SimState& s, double smallness = 0.1) {
  SimRow row;
  row.t = s.t;
  row.E_N = discrete_energy(s);
  for (std::size_t n = 0; n < s.w.size(); ++n) {
    row.sup_r_err = std::max(row.sup_r_err, std::abs(s.w[n]));
    row.sup_v = std::max(row.sup_v, std::abs(s.v[n]));
  }
  std::tie(row.E0_sigma, row.E0_v) = reference_energies(s);
  row.r_N = s.r(static_cast<std::size_t>(s.N));
  row.sup_sigma = sup_relative_density(s);
  if (row.sup_sigma > smallness) row.status = "large";
  return row;
}

/// Steps an initial state to cfg.tmax, recording a row every cfg.output_dt. Failures end the
/// series with an aborted row and a dump of the last good state instead of throwing.
inline TimeSeries run(SimState s, const SimConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw DomainError("run: dt must be positive");
  if (!(cfg.tmax >= 0.0)) throw DomainError("run: tmax must be nonnegative");
  if (!(cfg.output_dt > 0.0)) throw DomainError("run: output interval must be positive");
  TimeSeries ts;
  const long steps = std::lround(cfg.tmax / cfg.dt);
  const long every = std::max(1L, std::lround(cfg.output_dt / cfg.dt));
  const double t_start = s.t;
  auto record = [&](const SimState& st) {
    ts.rows.push_back(observe(st, cfg.smallness));
    ts.max_closure_residual = std::max(ts.max_closure_residual, closure_residual(st));
  };
  record(s);
  const double E0N = ts.rows.front().E_N;
  auto ratio = [&](double e) { return E0N > 0.0 ? e / E0N : (e > 0.0 ? HUGE_VAL : 0.0); };
  for (long k = 1; k <= steps; ++k) {
    try {
      s = step(s, cfg.dt);
      s.t = t_start + static_cast<double>(k) * cfg.dt;
      ts.max_closure_residual = std::max(ts.max_closure_residual, closure_residual(s));
      if (k % every == 0 || k == steps) {
        record(s);
        ts.max_energy_ratio = std::max(ts.max_energy_ratio, ratio(ts.rows.back().E_N));
        if (cfg.stop_amplitude && std::sqrt(ts.rows.back().E0()) >= *cfg.stop_amplitude) {
          ts.status = "stopped";
          break;
        }
      }
    } catch (const NumericalError& e) {
      SimRow last = ts.rows.back();
      last.t = s.t + cfg.dt;
      last.status = std::string("aborted: ") + e.what();
      ts.rows.push_back(last);
      ts.status = last.status;
      ts.dump_r = s.radii();
      ts.dump_v = s.v;
      break;
    }
  }
  return ts;
}

/// Builds the initial state (computing the eigenmode from the Eulerian spectrum when needed) and runs.
inline TimeSeries run(const StarProfile& profile, const SimConfig& cfg) {
  std::vector<double> radii, shape;
  if (cfg.perturbation.kind == PerturbKind::eigenmode) {
    const auto t = assemble_eulerian(profile, cfg.nu1, cfg.nu2, cfg.N);
    const auto root = real_unstable_root(t, cfg.perturbation.mode);
    if (!root) {
      throw DomainError("eigenmode perturbation: fewer than " + std::to_string(cfg.perturbation.mode) +
                        " unstable mode(s)");
    }
    radii = t.radii;
    shape = to_displacement(t, root->second);
  }
  return run(init_sim(profile, cfg.N, cfg.nu1, cfg.nu2, cfg.perturbation, radii, shape), cfg);
}

namespace detail {

struct LineFit {
  double slope = 0.0, intercept = 0.0, rms = 0.0;
  std::size_t count = 0;
};

inline LineFit least_squares(const std::vector<double>& X, const std::vector<double>& Y) {
  LineFit f;
  f.count = X.size();
  if (X.size() < 2) return f;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) mx += X[i], my += Y[i];
  mx /= X.size();
  my /= Y.size();
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) sxx += (X[i] - mx) * (X[i] - mx), sxy += (X[i] - mx) * (Y[i] - my);
  if (sxx <= 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double r = Y[i] - (f.intercept + f.slope * X[i]);
    ss += r * r;
  }
  f.rms = std::sqrt(ss / X.size());
  return f;
}

template <class Get>
void collect(const TimeSeries& ts, double t0, double t1, Get&& get, std::vector<double>& X, std::vector<double>& Y,
             bool& bad) {
  for (const auto& row : ts.rows) {
    if (row.t < t0 || row.t > t1 || row.status.rfind("aborted", 0) == 0) continue;
    const auto [xv, yv] = get(row);
    if (!std::isfinite(yv)) {
      bad = true;
      continue;
    }
    X.push_back(xv);
    Y.push_back(yv);
  }
}

}  // namespace detail

/// Decay exponent p from log sup|r - x| ~ -p log(1 + t) over [t0, t1].
inline FitResult fit_decay(const TimeSeries& ts, double t0, double t1) {
  if (!(t1 > t0)) throw DomainError("fit_decay: empty window");
  FitResult f{"decay", t0, t1};
  std::vector<double> X, Y;
  bool bad = false;
  detail::collect(
      ts, t0, t1, [](const SimRow& r) { return std::pair{std::log1p(r.t), std::log(r.sup_r_err)}; }, X, Y, bad);
  if (bad || X.size() < 3) return f;
  const auto all = detail::least_squares(X, Y);
  f.value = -all.slope;
  f.intercept = all.intercept;
  f.residual = all.rms;
  f.ok = true;
  // A power law has the same exponent on both halves; faster decay steepens in log-log.
  const std::size_t h = X.size() / 2;
  const auto a = detail::least_squares({X.begin(), X.begin() + h}, {Y.begin(), Y.begin() + h});
  const auto b = detail::least_squares({X.begin() + h, X.end()}, {Y.begin() + h, Y.end()});
  f.super_polynomial = -b.slope > 1.1 * -a.slope + 1e-6;
  return f;
}

/// Growth rate lambda from (1/2) log E0 ~ lambda t + c over [t0, t1].
inline FitResult fit_growth(const TimeSeries& ts, double t0, double t1) {
  if (!(t1 > t0)) throw DomainError("fit_growth: empty window");
  FitResult f{"growth", t0, t1};
  std::vector<double> X, Y;
  bool bad = false;
  detail::collect(
      ts, t0, t1, [](const SimRow& r) { return std::pair{r.t, 0.5 * std::log(r.E0())}; }, X, Y, bad);
  if (bad || X.size() < 3) return f;
  const auto l = detail::least_squares(X, Y);
  f.value = l.slope;
  f.intercept = l.intercept;
  f.residual = l.rms;
  f.ok = true;
  return f;
}

/// Time at which the fitted growth sqrt(E0) = exp(lambda t + c) reaches theta0.
inline double predicted_time(const FitResult& growth, double theta0) {
  if (!growth.ok || !(growth.value > 0.0)) throw DomainError("predicted_time: no positive growth fit");
  return (std::log(theta0) - growth.intercept) / growth.value;
}

/// First recorded time with sqrt(E0) >= theta0 (linear interpolation in log E0), if any.
inline std::optional<double> reach_time(const TimeSeries& ts, double theta0) {
  for (std::size_t i = 1; i < ts.rows.size(); ++i) {
    const double a = std::sqrt(ts.rows[i - 1].E0()), b = std::sqrt(ts.rows[i].E0());
    if (b >= theta0 && a < theta0) {
      const double s = (std::log(theta0) - std::log(a)) / (std::log(b) - std::log(a));
      return ts.rows[i - 1].t + s * (ts.rows[i].t - ts.rows[i - 1].t);
    }
  }
  return std::nullopt;
}

}  // namespace starspec
