#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mdcs/simulator.hpp"
#include "oracles.hpp"

using namespace mdcs;

namespace {

EnsembleModel single(double center, double sigma, double gamma) {
  EnsembleModel m;
  m.components = {{center, sigma, 1.0}};
  m.gamma_ghz = gamma;
  return m;
}

ScanGrid small_grid(std::size_t n = 32, double step = 0.1, double waiting = 0.2) {
  ScanGrid g;
  g.n_tau = g.n_t = n;
  g.tau_step_ps = g.t_step_ps = step;
  g.waiting_ps = waiting;
  return g;
}

}  // namespace

TEST(Response, LosslessRephasing) {
  const auto m = single(1945.0, 0.0, 0.0);
  for (double tau : {0.0, 0.7, 3.0, 12.5}) EXPECT_NEAR(std::abs(rephasing_response(m, tau, 0.2, tau)), 1.0, 1e-15);
}

TEST(Response, HomogeneousDecayClosedForm) {
  const auto m = single(1945.0, 0.0, 37.31);
  // exp(-0.3731) to 30 digits: 0.688596369763882800101837174985
  EXPECT_NEAR(std::abs(rephasing_response(m, 5.0, 0.0, 5.0)), 0.6885963697638828, 1e-14);
}

TEST(Response, GaussianAverageMatchesQuadrature) {
  // Quadrature over the resonance distribution (mpmath, 30 digits):
  // center +0.3 meV from the carrier, sigma 0.5 meV, gamma 50 GHz, tau 1.3 ps, t 2.1 ps.
  auto m = single(1945.3, 0.5, 50.0);
  m.carrier_mev = 1945.0;
  const auto v = rephasing_response(m, 1.3, 0.0, 2.1);
  EXPECT_NEAR(v.real(), 0.655303591045655091, 1e-9);
  EXPECT_NEAR(v.imag(), -0.250123739086071851, 1e-9);
}

TEST(Response, EchoConditionMaximises) {
  const auto m = single(1945.0, 1.0, 40.0);
  const double sum = 6.0;
  double best_t = -1, best = -1;
  for (int k = 0; k <= 600; ++k) {
    const double t = sum * k / 600.0;
    const double a = std::abs(rephasing_response(m, sum - t, 0.0, t));
    if (a > best) {
      best = a;
      best_t = t;
    }
  }
  EXPECT_NEAR(best_t, 3.0, 1e-12);
}

TEST(Response, MagnitudeBoundedByOne) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    EnsembleModel m;
    m.components = {{1940 + 10 * u(rng), 3 * u(rng), u(rng) + 0.01}, {1940 + 10 * u(rng), 3 * u(rng), u(rng)}};
    m.gamma_ghz = 100 * u(rng);
    m.pop_decay_ghz = 10 * u(rng);
    EXPECT_LE(std::abs(rephasing_response(m, 5 * u(rng), 10 * u(rng), 5 * u(rng))), 1.0 + 1e-15);
  }
}

TEST(Response, RejectsNegativeDelays) {
  const auto m = single(1945.0, 1.0, 10.0);
  EXPECT_THROW(rephasing_response(m, -0.1, 0.0, 1.0), DomainError);
  EXPECT_THROW(rephasing_response(m, 0.1, -1.0, 1.0), DomainError);
  EXPECT_THROW(rephasing_response(m, 0.1, 0.0, -1.0), DomainError);
}

TEST(Response, ModelValidation) {
  EnsembleModel m;
  EXPECT_THROW(validate(m), DomainError);
  m.components = {{1945, -1.0, 1.0}};
  EXPECT_THROW(validate(m), DomainError);
  m.components = {{1945, 1.0, 0.0}};
  EXPECT_THROW(validate(m), DomainError);
  m.components = {{1945, 1.0, 1.0}};
  m.echo_segments = EchoSegments{26.8, 14.4, 0.0};
  EXPECT_THROW(validate(m), DomainError);
  m.echo_segments.reset();
  EXPECT_NO_THROW(validate(m));
}

TEST(Response, ConjugateSymmetryUnderNegatedCenters) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    EnsembleModel m;
    m.components = {{1944 + 3 * u(rng), 2 * u(rng), 1.0}, {1946 + 3 * u(rng), 2 * u(rng), 0.5}};
    m.gamma_ghz = 60 * u(rng);
    EnsembleModel neg = m;
    for (auto& c : neg.components) c.center_mev = -c.center_mev;
    const double tau = 4 * u(rng), t = 4 * u(rng);
    const auto a = rephasing_response(m, tau, 0.2, t);
    const auto b = rephasing_response(neg, tau, 0.2, t);
    EXPECT_NEAR(b.real(), a.real(), 1e-12);
    EXPECT_NEAR(b.imag(), -a.imag(), 1e-12);
  }
}

TEST(Scan, MaximumOnEchoLocus) {
  auto m = single(1945.0, 2.6, 37.31);
  const auto scan = simulate_scan(m, small_grid(64, 0.05));
  for (std::size_t i = 10; i < 64; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < 64; ++j)
      if (std::abs(scan.at(i, j)) > std::abs(scan.at(i, best))) best = j;
    EXPECT_LE(std::abs(static_cast<long>(best) - static_cast<long>(i)), 1) << "row " << i;
  }
}

TEST(Scan, EchoMaximumPropertyRandomModels) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto g = small_grid(48, 0.1);
  for (int k = 0; k < 20; ++k) {
    // sigma_angular * max(tau) >> gamma
    const auto m = single(1945.0 + u(rng), 1.0 + 2.0 * u(rng), 5 + 80 * u(rng));
    const auto scan = simulate_scan(m, g);
    for (std::size_t i = 8; i < g.n_tau; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < g.n_t; ++j)
        if (std::abs(scan.at(i, j)) > std::abs(scan.at(i, best))) best = j;
      EXPECT_LE(std::abs(static_cast<long>(best) - static_cast<long>(i)), 1);
    }
  }
}

TEST(Scan, MixtureLinearity) {
  EnsembleModel a = single(1944.0, 2.6, 37.31), b = single(1949.0, 2.3, 37.31), mix = a;
  mix.components.push_back(b.components[0]);
  const auto g = small_grid(40, 0.07);
  const double carrier = 1946.5;
  const auto sa = simulate_scan(a, g, carrier), sb = simulate_scan(b, g, carrier), sm = simulate_scan(mix, g, carrier);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto expect = 0.5 * (sa.values[k] + sb.values[k]);
    EXPECT_LE(std::abs(sm.values[k] - expect), 1e-12 * std::max(std::abs(expect), 1e-300) + 1e-300);
  }
}

TEST(Scan, WeightedMixtureLinearity) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto g = small_grid(24, 0.1);
  for (int k = 0; k < 5; ++k) {
    EnsembleModel a = single(1943 + 4 * u(rng), 3 * u(rng), 80 * u(rng));
    EnsembleModel b = a;
    b.components = {{1943 + 4 * u(rng), 3 * u(rng), 1.0}};
    const double wa = u(rng) + 0.1, wb = u(rng) + 0.1;
    EnsembleModel mix = a;
    mix.components = {{a.components[0].center_mev, a.components[0].sigma_mev, wa},
                      {b.components[0].center_mev, b.components[0].sigma_mev, wb}};
    const auto sa = simulate_scan(a, g, 1945.0), sb = simulate_scan(b, g, 1945.0), sm = simulate_scan(mix, g, 1945.0);
    for (std::size_t q = 0; q < g.size(); ++q) {
      const auto expect = (wa * sa.values[q] + wb * sb.values[q]) / (wa + wb);
      EXPECT_LE(std::abs(sm.values[q] - expect), 1e-12 * std::abs(expect) + 1e-300);
    }
  }
}

TEST(Scan, OverdampedLimitFlushesToZero) {
  const auto m = single(1945.0, 2.6, 1e6);
  ScanGrid g = small_grid(16, 1.0);
  g.tau0_ps = g.t0_ps = 1.0;
  const auto scan = simulate_scan(m, g);
  for (const auto& v : scan.values) EXPECT_EQ(v, complex(0.0, 0.0));
}

TEST(Scan, Deterministic) {
  const auto m = single(1945.0, 2.6, 37.31);
  const auto a = simulate_scan(m, small_grid());
  const auto b = simulate_scan(m, small_grid());
  EXPECT_EQ(a.values, b.values);
}

TEST(Scan, GridValidation) {
  ScanGrid g = small_grid();
  g.n_tau = 7;
  EXPECT_THROW(simulate_scan(single(1945, 1, 1), g), DomainError);
  g = small_grid();
  g.t_step_ps = 0.0;
  EXPECT_THROW(simulate_scan(single(1945, 1, 1), g), DomainError);
  const std::vector<double> uni{0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  std::vector<double> bent = uni;
  bent[3] = 0.31;
  EXPECT_NO_THROW(grid_from_axes(uni, uni, 0.2));
  EXPECT_THROW(grid_from_axes(bent, uni, 0.2), DomainError);
}

TEST(GammaForConditions, Values) {
  EnsembleModel m = single(1945.0, 2.6, 0.0);
  m.thermal = ThermalGamma{{37.31, 7890.0, 34.41}, 15.0};
  m.diffusion.rate = 1.98;
  // 30-digit value 37.310396021668332657
  EXPECT_NEAR(gamma_for_conditions(m, 15.0, 0.2), 37.31039602166833, 1e-10);
  m.diffusion.rate = 0.0;
  EXPECT_NEAR(gamma_for_conditions(m, 120.0, 0.0), 330.932371698027277, 1e-9);
  m.thermal->params.gamma_star = 0.0;
  for (double t : {1.0, 50.0, 300.0}) EXPECT_EQ(gamma_for_conditions(m, t, 500.0), 37.31);
  EXPECT_THROW(gamma_for_conditions(m, -1.0, 0.0), DomainError);
}

TEST(IntegratedFwm, SingleExponentialDecayConstant) {
  const auto m = single(1945.0, 2.6, 37.31);
  std::vector<double> taus;
  for (int k = 4; k <= 60; ++k) taus.push_back(0.5 * k);
  const auto f = integrated_fwm(m, taus, 0.2);
  // log-linear least squares, independent of the library's fitters
  double xm = 0, ym = 0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    xm += taus[i];
    ym += std::log(f[i]);
  }
  xm /= taus.size();
  ym /= taus.size();
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    sxx += (taus[i] - xm) * (taus[i] - xm);
    sxy += (taus[i] - xm) * (std::log(f[i]) - ym);
  }
  const double decay_constant = -1.0 / (sxy / sxx);
  EXPECT_NEAR(decay_constant, 1000.0 / (2.0 * 37.31), 1e-4);
  EXPECT_NEAR(decay_constant, 13.4, 0.01);
}

TEST(IntegratedFwm, SegmentedSlopeChangesAtCrossover) {
  auto m = single(1945.0, 2.6, 0.0);
  m.echo_segments = EchoSegments{26.8, 14.4, 10.0};
  std::vector<double> taus;
  for (int k = 0; k <= 80; ++k) taus.push_back(0.25 * k);
  const auto f = integrated_fwm(m, taus, 0.2);
  const auto slope = [&](std::size_t a, std::size_t b) { return (std::log(f[b]) - std::log(f[a])) / (taus[b] - taus[a]); };
  EXPECT_NEAR(slope(12, 36), -2.0 / 26.8, 1e-6);  // 3 .. 9 ps
  EXPECT_NEAR(slope(44, 80), -2.0 / 14.4, 1e-6);  // 11 .. 20 ps
}

TEST(IntegratedFwm, LosslessIsConstant) {
  const auto m = single(1945.0, 0.0, 0.0);
  const std::vector<double> taus{0, 1, 2, 5, 10, 20};
  const auto f = integrated_fwm(m, taus, 0.2);
  for (double v : f) EXPECT_NEAR(v, f[0], 1e-12 * f[0]);
}

TEST(IntegratedFwm, NonIncreasingOnceEchoFormed) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    EnsembleModel m;
    m.components = {{1944 + 2 * u(rng), 0.5 + 2 * u(rng), 1.0}, {1947 + 2 * u(rng), 0.5 + 2 * u(rng), u(rng)}};
    m.gamma_ghz = 200 * u(rng);
    if (k % 3 == 0) m.echo_segments = EchoSegments{10 + 20 * u(rng), 5 + 10 * u(rng), 2 + 10 * u(rng)};
    if (k % 4 == 0) m.components.resize(1), m.components[0].sigma_mev = 0.0;
    // Echo fully formed after a few inverse inhomogeneous widths.
    double smin = INFINITY;
    for (const auto& c : m.components) smin = std::min(smin, c.sigma_mev);
    const double start = smin > 0 ? 4.0 / (smin * constants::rad_per_ps_per_mev) : 0.0;
    std::vector<double> taus;
    for (int q = 0; q <= 40; ++q) taus.push_back(start + 0.5 * q);
    const auto f = integrated_fwm(m, taus, 0.2);
    for (std::size_t q = 1; q < f.size(); ++q) EXPECT_LE(f[q], f[q - 1] * (1 + 1e-12)) << "model " << k << " q " << q;
  }
}

TEST(IntegratedFwm, RejectsEmptyOrNegative) {
  const auto m = single(1945.0, 1.0, 10.0);
  EXPECT_THROW(integrated_fwm(m, std::vector<double>{}, 0.2), DomainError);
  EXPECT_THROW(integrated_fwm(m, std::vector<double>{1.0, -1.0}, 0.2), DomainError);
}
