#pragma once

// Embedded Dormand-Prince 5(4) Runge-Kutta with standard PI-free step control.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

#include "starspec/error.hpp"

namespace starspec::ode {

template <std::size_t N>
using State = std::array<double, N>;

struct StepResult {
  double error_norm = 0.0;  // scaled error, accept if <= 1
};

/// One Dormand-Prince step of size dt from (t, y). Writes the 5th-order solution to y_out.
template <std::size_t N, class Rhs>
StepResult dopri_step(const Rhs& f, double t, const State<N>& y, double dt, State<N>& y_out, double rtol,
                      double atol) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  State<N> k1, k2, k3, k4, k5, k6, k7, tmp;
  f(t, y, k1);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + dt * a21 * k1[i];
  f(t + c2 * dt, tmp, k2);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + dt * (a31 * k1[i] + a32 * k2[i]);
  f(t + c3 * dt, tmp, k3);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + dt * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
  f(t + c4 * dt, tmp, k4);
  for (std::size_t i = 0; i < N; ++i)
    tmp[i] = y[i] + dt * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
  f(t + c5 * dt, tmp, k5);
  for (std::size_t i = 0; i < N; ++i)
    tmp[i] = y[i] + dt * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
  f(t + dt, tmp, k6);
  for (std::size_t i = 0; i < N; ++i)
    y_out[i] = y[i] + dt * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
  f(t + dt, y_out, k7);

  double err = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double e = dt * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(y_out[i]));
    err = std::max(err, std::abs(e) / sc);
  }
  return {err};
}

inline double next_step(double dt, double err) {
  const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
  return dt * fac;
}

/// Adaptive integration from t0 to t1 (t1 > t0). dt is the suggested first step and is updated.
template <std::size_t N, class Rhs>
void integrate(const Rhs& f, double t0, double t1, State<N>& y, double& dt, double rtol, double atol,
               std::size_t max_steps = 1000000) {
  double t = t0;
  State<N> trial;
  std::size_t steps = 0;
  while (t < t1) {
    if (++steps > max_steps) throw NumericalError("ode: step budget exhausted");
    const bool last = t + dt >= t1;
    const double h = last ? t1 - t : dt;
    const auto res = dopri_step<N>(f, t, y, h, trial, rtol, atol);
    if (res.error_norm <= 1.0) {
      t = last ? t1 : t + h;
      y = trial;
      if (!last) dt = next_step(h, res.error_norm);
    } else {
      dt = next_step(h, res.error_norm);
      if (dt < 1e-14 * std::max(1.0, std::abs(t))) throw NumericalError("ode: step size underflow");
    }
  }
}

}  // namespace starspec::ode
