#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "starspec/eos.hpp"

using starspec::DomainError;
using starspec::EquationOfState;

namespace {

// Composite Simpson rule, used as an independent oracle for the white-dwarf integral.
double simpson(auto f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

std::vector<double> logspace(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(lo * std::pow(hi / lo, double(i) / (n - 1)));
  return v;
}

std::vector<EquationOfState> bundled() {
  return {EquationOfState::polytrope(1.0, 1.25), EquationOfState::polytrope(1.0, 1.5),
          EquationOfState::polytrope(2.0, 2.0), EquationOfState::white_dwarf(1.0, 1.0),
          EquationOfState::white_dwarf(2.5, 0.3)};
}

}  // namespace

TEST(Eos, PolytropePressureValues) {
  const auto e = EquationOfState::polytrope(1.0, 1.5);
  EXPECT_EQ(e.pressure(0.0), 0.0);
  EXPECT_DOUBLE_EQ(e.pressure(4.0), 8.0);
  EXPECT_DOUBLE_EQ(EquationOfState::polytrope(1.0, 2.0).dpressure(3.0), 6.0);
  EXPECT_DOUBLE_EQ(EquationOfState::polytrope(2.0, 1.25).dpressure(1.0), 2.5);
  EXPECT_DOUBLE_EQ(EquationOfState::polytrope(1.0, 2.0).enthalpy(1.0), 2.0);
  EXPECT_DOUBLE_EQ(EquationOfState::polytrope(1.0, 2.0).rho_from_enthalpy(2.0), 1.0);
  EXPECT_DOUBLE_EQ(e.phi2(1.0), 1.5);
  EXPECT_DOUBLE_EQ(EquationOfState::polytrope(1.0, 2.0).phi2(0.5), 2.0);
}

TEST(Eos, WhiteDwarfAgainstQuadrature) {
  const auto e = EquationOfState::white_dwarf(1.0, 1.0);
  const double oracle = 8.0 * simpson([](double u) { return std::pow(u, 4) / std::sqrt(1 + u * u); }, 0.0, 1.0);
  EXPECT_NEAR(oracle, 1.2299072, 1e-7);
  EXPECT_NEAR(e.pressure(1.0), oracle, 1e-12);
  EXPECT_NEAR(e.dpressure(1.0), (8.0 / 3.0) / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(e.phi2(1.0), 1.8856181, 1e-7);
  EXPECT_NEAR(e.enthalpy(1.0), 8.0 * (std::sqrt(2.0) - 1.0), 1e-14);
  EXPECT_NEAR(e.rho_from_enthalpy(8.0 * (std::sqrt(2.0) - 1.0)), 1.0, 1e-14);

  // Small-x branch agrees with the quadrature too (series region x < 0.5).
  for (double x : {1e-3, 0.1, 0.3, 0.49, 0.51, 2.0}) {
    const double q = 8.0 * simpson([](double u) { return std::pow(u, 4) / std::sqrt(1 + u * u); }, 0.0, x);
    EXPECT_NEAR(e.pressure(x * x * x), q, 1e-10 * q) << "x=" << x;
  }
}

TEST(Eos, ZeroDensityAndEnthalpy) {
  for (const auto& e : bundled()) {
    EXPECT_EQ(e.pressure(0.0), 0.0);
    EXPECT_EQ(e.enthalpy(0.0), 0.0);
    EXPECT_EQ(e.rho_from_enthalpy(0.0), 0.0);
  }
}

TEST(Eos, DomainErrors) {
  const auto e = EquationOfState::polytrope(1.0, 1.5);
  EXPECT_THROW(e.pressure(-1.0), DomainError);
  EXPECT_THROW(e.dpressure(0.0), DomainError);
  EXPECT_THROW(e.phi2(-1.0), DomainError);
  EXPECT_THROW(e.rho_from_enthalpy(-0.1), DomainError);
  EXPECT_THROW(EquationOfState::polytrope(1.0, 1.1), DomainError);
  EXPECT_THROW(EquationOfState::polytrope(1.0, 1.2), DomainError);
  EXPECT_THROW(EquationOfState::polytrope(1.0, 2.5), DomainError);
  EXPECT_THROW(EquationOfState::polytrope(-1.0, 1.5), DomainError);
  EXPECT_THROW(EquationOfState::white_dwarf(0.0, 1.0), DomainError);
}

TEST(Eos, MonotoneRoundTripAndDerivatives) {
  const auto grid = logspace(1e-8, 1e3, 90);
  for (const auto& e : bundled()) {
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      EXPECT_LT(e.pressure(grid[i]), e.pressure(grid[i + 1]));
      EXPECT_LT(e.enthalpy(grid[i]), e.enthalpy(grid[i + 1]));
    }
    for (double rho : grid) {
      EXPECT_NEAR(e.rho_from_enthalpy(e.enthalpy(rho)), rho, 1e-10 * rho) << e.describe();
      const double step = 1e-5 * rho;
      const double fd = (e.pressure(rho + step) - e.pressure(rho - step)) / (2 * step);
      EXPECT_NEAR(fd, e.dpressure(rho), 1e-6 * e.dpressure(rho)) << e.describe() << " rho=" << rho;
      const double fd2 = (e.dpressure(rho + step) - e.dpressure(rho - step)) / (2 * step);
      EXPECT_NEAR(fd2, e.d2pressure(rho), 1e-6 * std::abs(e.d2pressure(rho))) << e.describe();
      EXPECT_GT(e.dpressure(rho), 0.0);
    }
  }
}

TEST(Eos, EnthalpyIsIntegralOfPhi2) {
  // Phi'(rho) = int_0^rho Phi''(s) ds, checked in the variable t = s^{gamma1-1} that removes the
  // integrable singularity at 0.
  for (const auto& e : bundled()) {
    const double g = e.gamma1();
    for (double rho : {0.01, 1.0, 30.0}) {
      const double tmax = std::pow(rho, g - 1.0);
      const double val = simpson(
          [&](double t) {
            t = std::max(t, 1e-12 * tmax);
            const double s = std::pow(t, 1.0 / (g - 1.0));
            const double ds_dt = s / ((g - 1.0) * t);
            return e.phi2(s) * ds_dt;
          },
          0.0, tmax, 200000);
      EXPECT_NEAR(val, e.enthalpy(rho), 2e-5 * e.enthalpy(rho)) << e.describe() << " rho=" << rho;
    }
  }
}

TEST(Eos, NearVacuumExponent) {
  for (const auto& e : bundled()) {
    EXPECT_TRUE(e.satisfies_near_vacuum_law()) << e.describe();
    EXPECT_TRUE(e.satisfies_second_derivative_law()) << e.describe();
    const double slope = (std::log(e.dpressure(1e-6)) - std::log(e.dpressure(1e-8))) / (std::log(1e-6) - std::log(1e-8));
    EXPECT_NEAR(slope, e.gamma1() - 1.0, 0.02 * (e.gamma1() - 1.0)) << e.describe();
  }
  EXPECT_DOUBLE_EQ(EquationOfState::white_dwarf(1, 1).gamma1(), 5.0 / 3.0);
}
