#pragma once

// Barotropic equations of state P(rho) for self-gravitating gas spheres.
//
// Two models are bundled: the polytrope P = K rho^gamma and the zero-temperature
// degenerate electron gas ("white dwarf") P = A f(x), x = (rho/B)^{1/3},
//   f(x) = x sqrt(1+x^2) (2x^2 - 3) + 3 asinh(x) = 8 int_0^x u^4 / sqrt(1+u^2) du.
// Units use G = 1.

#include <cmath>
#include <string>
#include <variant>

#include "starspec/error.hpp"

namespace starspec {

struct Polytrope {
  double K = 1.0;
  double gamma = 1.5;
};

struct WhiteDwarf {
  double A = 1.0;
  double B = 1.0;
};

namespace detail {

// f(x) = 8 int_0^x u^4/sqrt(1+u^2) du. The closed form cancels badly for small x,
// where the binomial series of (1+u^2)^{-1/2} is used instead.
inline double white_dwarf_f(double x) {
  if (x < 0.5) {
    const double x2 = x * x;
    double coeff = 1.0;  // binom(-1/2, k)
    double xpow = x2 * x2 * x;
    double sum = 0.0;
    for (int k = 0; k < 60; ++k) {
      const double term = coeff * xpow / (5.0 + 2.0 * k);
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
      coeff *= -(0.5 + k) / (k + 1.0);
      xpow *= x2;
    }
    return 8.0 * sum;
  }
  const double s = std::sqrt(1.0 + x * x);
  return x * s * (2.0 * x * x - 3.0) + 3.0 * std::asinh(x);
}

}  // namespace detail

/// Pressure law with derivatives, enthalpy and its inverse.
///
/// All member functions are pure; instances are cheap to copy and safe to share.
class EquationOfState {
 public:
  using Model = std::variant<Polytrope, WhiteDwarf>;

  static EquationOfState polytrope(double K, double gamma) { return EquationOfState(Polytrope{K, gamma}); }
  static EquationOfState white_dwarf(double A, double B) { return EquationOfState(WhiteDwarf{A, B}); }

  explicit EquationOfState(Model model) : model_(model) {
    if (const auto* p = std::get_if<Polytrope>(&model_)) {
      if (!(p->K > 0.0)) throw DomainError("polytrope: K must be positive");
      gamma1_ = p->gamma;
    } else {
      const auto& w = std::get<WhiteDwarf>(model_);
      if (!(w.A > 0.0) || !(w.B > 0.0)) throw DomainError("white dwarf: A and B must be positive");
      gamma1_ = 5.0 / 3.0;
    }
    // gamma = 2 is admitted: it is the closed-form Lane-Emden n = 1 case.
    if (!(gamma1_ > 1.2 && gamma1_ <= 2.0)) {
      throw DomainError("near-vacuum exponent gamma1 must lie in (6/5, 2], got " + std::to_string(gamma1_));
    }
  }

  const Model& model() const { return model_; }
  bool is_polytrope() const { return std::holds_alternative<Polytrope>(model_); }
  double gamma1() const { return gamma1_; }

  std::string describe() const {
    if (const auto* p = std::get_if<Polytrope>(&model_)) {
      return "polytrope(K=" + std::to_string(p->K) + ", gamma=" + std::to_string(p->gamma) + ")";
    }
    const auto& w = std::get<WhiteDwarf>(model_);
    return "whitedwarf(A=" + std::to_string(w.A) + ", B=" + std::to_string(w.B) + ")";
  }

  double pressure(double rho) const {
    if (!(rho >= 0.0)) throw DomainError("pressure: density must be >= 0");
    if (rho == 0.0) return 0.0;
    if (const auto* p = std::get_if<Polytrope>(&model_)) return p->K * std::pow(rho, p->gamma);
    const auto& w = std::get<WhiteDwarf>(model_);
    return w.A * detail::white_dwarf_f(std::cbrt(rho / w.B));
  }

  double dpressure(double rho) const {
    if (!(rho > 0.0)) throw DomainError("dpressure: density must be > 0");
    return dpressure_unchecked(rho);
  }

  double d2pressure(double rho) const {
    if (!(rho > 0.0)) throw DomainError("d2pressure: density must be > 0");
    if (const auto* p = std::get_if<Polytrope>(&model_)) {
      return p->K * p->gamma * (p->gamma - 1.0) * std::pow(rho, p->gamma - 2.0);
    }
    const auto& w = std::get<WhiteDwarf>(model_);
    const double x = std::cbrt(rho / w.B);
    const double s2 = 1.0 + x * x;
    return 8.0 * w.A / (9.0 * w.B * w.B) * (2.0 + x * x) / (x * s2 * std::sqrt(s2));
  }

  /// Specific enthalpy Phi'(rho) = int_0^rho P'(s)/s ds.
  double enthalpy(double rho) const {
    if (!(rho >= 0.0)) throw DomainError("enthalpy: density must be >= 0");
    if (rho == 0.0) return 0.0;
    if (const auto* p = std::get_if<Polytrope>(&model_)) {
      return p->K * p->gamma / (p->gamma - 1.0) * std::pow(rho, p->gamma - 1.0);
    }
    const auto& w = std::get<WhiteDwarf>(model_);
    const double x = std::cbrt(rho / w.B);
    const double x2 = x * x;
    return 8.0 * w.A / w.B * x2 / (std::sqrt(1.0 + x2) + 1.0);
  }

  double rho_from_enthalpy(double h) const {
    if (!(h >= 0.0)) throw DomainError("rho_from_enthalpy: enthalpy must be >= 0");
    return rho_from_enthalpy_unchecked(h);
  }

  /// Phi''(rho) = P'(rho)/rho.
  double phi2(double rho) const {
    if (!(rho > 0.0)) throw DomainError("phi2: density must be > 0");
    return phi2_unchecked(rho);
  }

  // Hot-path variants used inside integrators, where the caller guarantees the domain.
  double dpressure_unchecked(double rho) const {
    if (const auto* p = std::get_if<Polytrope>(&model_)) return p->K * p->gamma * std::pow(rho, p->gamma - 1.0);
    const auto& w = std::get<WhiteDwarf>(model_);
    const double x = std::cbrt(rho / w.B);
    return 8.0 * w.A / (3.0 * w.B) * x * x / std::sqrt(1.0 + x * x);
  }

  double phi2_unchecked(double rho) const {
    if (const auto* p = std::get_if<Polytrope>(&model_)) return p->K * p->gamma * std::pow(rho, p->gamma - 2.0);
    const auto& w = std::get<WhiteDwarf>(model_);
    const double x = std::cbrt(rho / w.B);
    return 8.0 * w.A / (3.0 * w.B * w.B) / (x * std::sqrt(1.0 + x * x));
  }

  double rho_from_enthalpy_unchecked(double h) const {
    if (h <= 0.0) return 0.0;
    if (const auto* p = std::get_if<Polytrope>(&model_)) {
      return std::pow(h * (p->gamma - 1.0) / (p->K * p->gamma), 1.0 / (p->gamma - 1.0));
    }
    const auto& w = std::get<WhiteDwarf>(model_);
    const double s = w.B * h / (8.0 * w.A);
    const double x = std::sqrt(s * (2.0 + s));
    return w.B * x * x * x;
  }

  /// Limit of Phi'' as rho -> 0+ (finite only for gamma1 = 2).
  double phi2_at_vacuum() const {
    if (const auto* p = std::get_if<Polytrope>(&model_)) {
      if (p->gamma == 2.0) return 2.0 * p->K;
    }
    return HUGE_VAL;
  }

  /// s^{1-gamma1} P'(s) sampled at s = 1e-6 and 1e-8 must agree to 5%.
  bool satisfies_near_vacuum_law() const {
    const double a = std::pow(1e-6, 1.0 - gamma1_) * dpressure(1e-6);
    const double b = std::pow(1e-8, 1.0 - gamma1_) * dpressure(1e-8);
    return a > 0.0 && b > 0.0 && std::abs(a / b - 1.0) <= 0.05;
  }

  /// Same check for s^{2-gamma1} P''(s) -> K2 > 0, needed for the nonlinear runs.
  bool satisfies_second_derivative_law() const {
    const double a = std::pow(1e-6, 2.0 - gamma1_) * d2pressure(1e-6);
    const double b = std::pow(1e-8, 2.0 - gamma1_) * d2pressure(1e-8);
    return a > 0.0 && b > 0.0 && std::abs(a / b - 1.0) <= 0.05;
  }

 private:
  Model model_;
  double gamma1_ = 0.0;
};

}  // namespace starspec
