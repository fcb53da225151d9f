#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "mdcs/physics.hpp"

using namespace mdcs;

namespace {

const ThermalDephasingParams kNv{37.31, 7890.0, 34.41};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(Constants, PinnedValues) {
  EXPECT_EQ(constants::k_b, 8.617333e-2);
  EXPECT_EQ(constants::ghz_per_mev, 241.7989);
  const PhysicalConstants pc;
  EXPECT_EQ(pc.k_b, constants::k_b);
  EXPECT_EQ(pc.planck_conversion, constants::ghz_per_mev);
}

TEST(ThermalDephasing, ZeroTemperatureIsExactlyGamma0) {
  EXPECT_EQ(thermal_dephasing_rate(kNv, 0.0), 37.31);
  EXPECT_EQ(thermal_dephasing_rate(kNv, 1e-300), 37.31);
  EXPECT_EQ(thermal_dephasing_rate(kNv, 0.01), 37.31);
}

TEST(ThermalDephasing, HighTemperatureValue) {
  // 30-digit evaluation: 330.932371698027276757649510809
  EXPECT_NEAR(thermal_dephasing_rate(kNv, 120.0), 330.932371698027277, 1e-9);
}

TEST(ThermalDephasing, FifteenKelvinIsGamma0) {
  const double g = thermal_dephasing_rate(kNv, 15.0);
  EXPECT_NEAR(g, 37.31, 1e-6);
  // 30-digit evaluation of the Bose term: 2.16683326569619e-8 GHz
  EXPECT_NEAR(g - 37.31, 2.16683326569619e-8, 1e-13);
}

TEST(ThermalDephasing, RejectsBadTemperature) {
  EXPECT_THROW(thermal_dephasing_rate(kNv, -1.0), DomainError);
  EXPECT_THROW(thermal_dephasing_rate(kNv, std::numeric_limits<double>::quiet_NaN()), DomainError);
  EXPECT_THROW(thermal_dephasing_rate(kNv, std::numeric_limits<double>::infinity()), DomainError);
  EXPECT_THROW(thermal_dephasing_rate({-1.0, 1.0, 1.0}, 10.0), DomainError);
  EXPECT_THROW(thermal_dephasing_rate({1.0, 1.0, 0.0}, 10.0), DomainError);
}

TEST(ThermalDephasing, StrictlyIncreasingInTemperature) {
  double prev = thermal_dephasing_rate(kNv, 1.0);
  for (int t = 2; t <= 300; ++t) {
    const double g = thermal_dephasing_rate(kNv, t);
    if (t >= 30) EXPECT_GT(g, prev) << "T = " << t;
    EXPECT_GE(g, prev) << "T = " << t;
    prev = g;
  }
  // Low temperatures are strictly increasing too once the Bose factor is
  // representable relative to gamma0; check with gamma0 = 0.
  const ThermalDephasingParams bare{0.0, 7890.0, 34.41};
  prev = thermal_dephasing_rate(bare, 1.0);
  for (int t = 2; t <= 300; ++t) {
    const double g = thermal_dephasing_rate(bare, t);
    EXPECT_GT(g, prev) << "T = " << t;
    prev = g;
  }
}

TEST(ThermalDephasing, ScaledExcessDependsOnlyOnEnergyOverTemperature) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.2, 5.0);
  for (int k = 0; k < 50; ++k) {
    const double ratio = u(rng);  // E_ph / T in meV/K
    const ThermalDephasingParams a{u(rng) * 10, u(rng) * 1000, 10.0 * u(rng)};
    const ThermalDephasingParams b{u(rng) * 10, u(rng) * 1000, 10.0 * u(rng)};
    const double ea = (thermal_dephasing_rate(a, a.e_ph / ratio) - a.gamma0) / a.gamma_star;
    const double eb = (thermal_dephasing_rate(b, b.e_ph / ratio) - b.gamma0) / b.gamma_star;
    EXPECT_NEAR(ea, eb, 1e-10 * std::max(ea, 1.0));
  }
}

TEST(DephasingTime, Values) {
  EXPECT_NEAR(dephasing_time(37.31), 26.8, 0.005);
  EXPECT_DOUBLE_EQ(dephasing_time(1000.0), 1.0);
  EXPECT_NEAR(dephasing_time(7890.0), 0.1267427122940431, 1e-15);
  EXPECT_THROW(dephasing_time(0.0), DomainError);
  EXPECT_THROW(dephasing_time(-3.0), DomainError);
}

TEST(EnergyFrequency, Values) {
  EXPECT_LT(rel(energy_to_frequency(2.6), 627.8), 0.002);
  EXPECT_EQ(energy_to_frequency(0.0), 0.0);
  EXPECT_NEAR(energy_to_frequency(34.41), 8320.300149, 1e-8);
  EXPECT_THROW(energy_to_frequency(std::numeric_limits<double>::quiet_NaN()), DomainError);
  EXPECT_THROW(frequency_to_energy(std::numeric_limits<double>::infinity()), DomainError);
}

TEST(EnergyFrequency, RoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  for (int k = 0; k < 1000; ++k) {
    const double e = u(rng);
    EXPECT_NEAR(frequency_to_energy(energy_to_frequency(e)), e, 1e-12 * std::abs(e));
  }
}

TEST(StarkField, Values) {
  EXPECT_LT(rel(field_from_splitting(5.0, {1.4}), 0.43), 0.02);
  EXPECT_NEAR(field_from_splitting(5.0, {1.4}), 0.43178375, 1e-12);
  EXPECT_EQ(field_from_splitting(0.0, {1.4}), 0.0);
  EXPECT_EQ(field_from_splitting(0.0, {0.3}), 0.0);
  EXPECT_NEAR(splitting_from_field(0.29, {1.4}), 3.358162506115619, 1e-12);
  EXPECT_THROW(field_from_splitting(1.0, {0.0}), DomainError);
  EXPECT_THROW(field_from_splitting(1.0, {-1.4}), DomainError);
  EXPECT_THROW(field_from_splitting(-1.0, {1.4}), DomainError);
}

TEST(StarkField, RoundTrip) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 20.0), chi(0.1, 5.0);
  for (int k = 0; k < 1000; ++k) {
    const double s = u(rng);
    const StarkParams p{chi(rng)};
    EXPECT_NEAR(splitting_from_field(field_from_splitting(s, p), p), s, 1e-12 * s);
  }
}

TEST(EffectiveGamma, Values) {
  EXPECT_EQ(effective_gamma(37.31, {1.98}, 0.0), 37.31);
  EXPECT_NEAR(effective_gamma(37.31, {1.98}, 2000.0) - effective_gamma(37.31, {1.98}, 1.0), 3.95802, 1e-10);
  EXPECT_NEAR(effective_gamma(37.31, {1.59}, 1000.0), 37.31 + 1.59, 1e-12);
  EXPECT_THROW(effective_gamma(37.31, {1.98}, -1.0), DomainError);
  EXPECT_THROW(effective_gamma(37.31, {-1.0}, 1.0), DomainError);
}

TEST(EffectiveGamma, AffineInWaiting) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 3000.0), r(0.0, 5.0);
  for (int k = 0; k < 500; ++k) {
    const double a = u(rng), b = u(rng), g = r(rng) * 50;
    const SpectralDiffusionParams d{r(rng)};
    const double lhs = effective_gamma(g, d, a) + effective_gamma(g, d, b);
    const double rhs = effective_gamma(g, d, 0.0) + effective_gamma(g, d, a + b);
    EXPECT_NEAR(lhs, rhs, 1e-12 * rhs);
  }
}
