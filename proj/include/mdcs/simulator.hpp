#pragma once

// Forward model for the rephasing (photon-echo) third-order response of an
// inhomogeneously broadened ensemble of two-level systems.

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdcs/physics.hpp"

namespace mdcs {

using complex = std::complex<double>;

/// One Gaussian family of resonance energies.
struct GaussianComponent {
  double center_mev = 0.0;
  double sigma_mev = 0.0;
  double weight = 1.0;
};

/// Two-stage echo decay: field ~ exp(-2 tau / t2_early) up to the crossover,
/// then exp(-2 tau / t2_late), continuous at the crossover.
struct EchoSegments {
  double t2_early_ps = 0.0;
  double t2_late_ps = 0.0;
  double crossover_ps = 0.0;
};

/// Homogeneous rate taken from the thermal model at a fixed temperature.
struct ThermalGamma {
  ThermalDephasingParams params;
  double temperature_k = 0.0;
};

struct EnsembleModel {
  std::vector<GaussianComponent> components;
  double gamma_ghz = 0.0;
  std::optional<ThermalGamma> thermal;  // overrides gamma_ghz when set
  SpectralDiffusionParams diffusion;
  double pop_decay_ghz = 0.0;
  std::optional<EchoSegments> echo_segments;
  std::optional<double> carrier_mev;  // rotating frame; weighted mean center if unset
};

inline void validate(const EnsembleModel& m) {
  if (m.components.empty()) throw DomainError("model needs at least one component");
  double wsum = 0.0;
  for (const auto& c : m.components) {
    detail::require_finite(c.center_mev, "component center");
    detail::require_finite(c.sigma_mev, "component sigma");
    detail::require_finite(c.weight, "component weight");
    if (c.sigma_mev < 0.0) throw DomainError("component sigma must be >= 0");
    if (c.weight < 0.0) throw DomainError("component weight must be >= 0");
    wsum += c.weight;
  }
  if (!(wsum > 0.0)) throw DomainError("component weights must not all be zero");
  detail::require_finite(m.gamma_ghz, "gamma");
  if (m.gamma_ghz < 0.0) throw DomainError("gamma must be >= 0");
  if (m.thermal) {
    validate(m.thermal->params);
    if (!std::isfinite(m.thermal->temperature_k) || m.thermal->temperature_k < 0.0)
      throw DomainError("temperature must be finite and >= 0");
  }
  validate(m.diffusion);
  detail::require_finite(m.pop_decay_ghz, "pop_decay");
  if (m.pop_decay_ghz < 0.0) throw DomainError("pop_decay must be >= 0");
  if (m.echo_segments) {
    const auto& e = *m.echo_segments;
    if (!(e.t2_early_ps > 0.0) || !(e.t2_late_ps > 0.0) || !std::isfinite(e.t2_early_ps) ||
        !std::isfinite(e.t2_late_ps))
      throw DomainError("echo segment T2 values must be finite and > 0");
    if (!(e.crossover_ps > 0.0) || !std::isfinite(e.crossover_ps))
      throw DomainError("echo segment crossover must be > 0");
  }
  if (m.carrier_mev) detail::require_finite(*m.carrier_mev, "carrier");
}

inline double carrier_energy(const EnsembleModel& m) {
  if (m.carrier_mev) return *m.carrier_mev;
  double wsum = 0.0, acc = 0.0;
  for (const auto& c : m.components) {
    wsum += c.weight;
    acc += c.weight * c.center_mev;
  }
  return acc / wsum;
}

/// Homogeneous rate at the model's own conditions, before spectral diffusion.
inline double intrinsic_gamma(const EnsembleModel& m) {
  if (m.thermal) return thermal_dephasing_rate(m.thermal->params, m.thermal->temperature_k);
  return m.gamma_ghz;
}

/// Thermal rate at `temperature_k` plus the diffusion increment at `waiting_ps`.
/// Models without thermal parameters use their fixed gamma at any temperature.
inline double gamma_for_conditions(const EnsembleModel& m, double temperature_k, double waiting_ps) {
  const double base = m.thermal ? thermal_dephasing_rate(m.thermal->params, temperature_k)
                                : m.gamma_ghz;
  return effective_gamma(base, m.diffusion, waiting_ps);
}

/// Uniformly sampled (tau, t) delay grid at a fixed waiting time.
struct ScanGrid {
  double tau0_ps = 0.0;
  double tau_step_ps = 0.05;
  std::size_t n_tau = 256;
  double t0_ps = 0.0;
  double t_step_ps = 0.05;
  std::size_t n_t = 256;
  double waiting_ps = 0.2;

  double tau(std::size_t i) const { return tau0_ps + static_cast<double>(i) * tau_step_ps; }
  double t(std::size_t j) const { return t0_ps + static_cast<double>(j) * t_step_ps; }
  std::size_t size() const { return n_tau * n_t; }

  bool operator==(const ScanGrid&) const = default;
};

inline void validate(const ScanGrid& g) {
  if (g.n_tau < 8 || g.n_t < 8) throw DomainError("scan grid needs at least 8 samples per axis");
  for (double v : {g.tau0_ps, g.tau_step_ps, g.t0_ps, g.t_step_ps, g.waiting_ps})
    detail::require_finite(v, "scan grid");
  if (!(g.tau_step_ps > 0.0) || !(g.t_step_ps > 0.0))
    throw DomainError("scan grid steps must be > 0");
  if (g.tau0_ps < 0.0 || g.t0_ps < 0.0 || g.waiting_ps < 0.0)
    throw DomainError("scan grid delays must be >= 0");
}

namespace detail {

inline void require_uniform(std::span<const double> axis, const char* what, double& start,
                            double& step) {
  if (axis.size() < 2) throw DomainError(std::string(what) + " axis too short");
  start = axis.front();
  step = (axis.back() - axis.front()) / static_cast<double>(axis.size() - 1);
  if (!(step > 0.0)) throw DomainError(std::string(what) + " axis must be strictly increasing");
  const double tol = 1e-9 * std::max(std::abs(axis.back()), step);
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (std::abs(axis[i] - (start + static_cast<double>(i) * step)) > tol)
      throw DomainError(std::string(what) + " axis is not uniformly sampled");
  }
}

}  // namespace detail

/// Builds a grid from explicit sample positions; throws if either axis is
/// not uniformly spaced.
inline ScanGrid grid_from_axes(std::span<const double> tau, std::span<const double> t,
                               double waiting_ps) {
  ScanGrid g;
  detail::require_uniform(tau, "tau", g.tau0_ps, g.tau_step_ps);
  detail::require_uniform(t, "t", g.t0_ps, g.t_step_ps);
  g.n_tau = tau.size();
  g.n_t = t.size();
  g.waiting_ps = waiting_ps;
  validate(g);
  return g;
}

struct TimeDomainScan {
  ScanGrid grid;
  double carrier_mev = 0.0;
  std::vector<complex> values;  // row-major, index i_tau * n_t + j_t
  std::map<std::string, std::string> provenance;

  const complex& at(std::size_t i_tau, std::size_t j_t) const { return values[i_tau * grid.n_t + j_t]; }
  complex& at(std::size_t i_tau, std::size_t j_t) { return values[i_tau * grid.n_t + j_t]; }
};

/// Precomputed form of the response for one model and waiting time.
///
/// R(tau, t) = sum_k w_k exp(i d_k (tau - t)) exp(-s_k^2 (t - tau)^2 / 2)
///             * H(tau, t) * exp(-pop_decay * T)
///
/// with d_k, s_k the detuning and width in rad/ps and H the homogeneous decay,
/// exp(-gamma_eff (tau + t)) or the two-stage echo profile evaluated at
/// (tau + t) / 2.
class ResponseKernel {
 public:
  ResponseKernel(const EnsembleModel& model, double waiting_ps)
      : ResponseKernel(model, waiting_ps, carrier_energy(model)) {}

  ResponseKernel(const EnsembleModel& model, double waiting_ps, double carrier_mev) {
    validate(model);
    if (!std::isfinite(waiting_ps) || waiting_ps < 0.0)
      throw DomainError("waiting time must be finite and >= 0");
    double wsum = 0.0;
    for (const auto& c : model.components) wsum += c.weight;
    for (const auto& c : model.components) {
      if (c.weight == 0.0) continue;
      terms_.push_back({c.weight / wsum,
                        (c.center_mev - carrier_mev) * constants::rad_per_ps_per_mev,
                        c.sigma_mev * constants::rad_per_ps_per_mev});
    }
    const double g0 = intrinsic_gamma(model);
    const double geff = effective_gamma(g0, model.diffusion, waiting_ps);
    gamma_per_ps_ = geff * 1e-3;
    diffusion_per_ps_ = (geff - g0) * 1e-3;
    echo_ = model.echo_segments;
    population_ = std::exp(-model.pop_decay_ghz * 1e-3 * waiting_ps);
  }

  complex operator()(double tau_ps, double t_ps) const {
    if (!(tau_ps >= 0.0) || !(t_ps >= 0.0)) throw DomainError("delays must be >= 0");
    return evaluate(tau_ps, t_ps);
  }

  // No argument checks; callers guarantee nonnegative delays.
  complex evaluate(double tau_ps, double t_ps) const {
    const double u = t_ps - tau_ps;
    complex acc{0.0, 0.0};
    for (const auto& k : terms_) {
      const double env = k.weight * std::exp(-0.5 * k.sigma * k.sigma * u * u);
      const double phase = -k.detuning * u;
      acc += complex(env * std::cos(phase), env * std::sin(phase));
    }
    const double h = homogeneous(tau_ps, t_ps) * population_;
    complex out = acc * h;
    if (std::abs(out) < 1e-300) out = complex{0.0, 0.0};
    return out;
  }

  double homogeneous(double tau_ps, double t_ps) const {
    if (!echo_) return std::exp(-gamma_per_ps_ * (tau_ps + t_ps));
    const double s = 0.5 * (tau_ps + t_ps);
    const auto& e = *echo_;
    double phi = 0.0;
    if (s < e.crossover_ps) {
      phi = 2.0 * s / e.t2_early_ps;
    } else {
      phi = 2.0 * e.crossover_ps / e.t2_early_ps + 2.0 * (s - e.crossover_ps) / e.t2_late_ps;
    }
    return std::exp(-phi - diffusion_per_ps_ * (tau_ps + t_ps));
  }

  double max_detuning() const {
    double m = 0.0;
    for (const auto& k : terms_) m = std::max(m, std::abs(k.detuning));
    return m;
  }
  double min_sigma() const {
    double m = INFINITY;
    for (const auto& k : terms_) m = std::min(m, k.sigma);
    return m;
  }
  double max_sigma() const {
    double m = 0.0;
    for (const auto& k : terms_) m = std::max(m, k.sigma);
    return m;
  }

 private:
  struct Term {
    double weight;
    double detuning;  // rad/ps
    double sigma;     // rad/ps
  };
  std::vector<Term> terms_;
  double gamma_per_ps_ = 0.0;
  double diffusion_per_ps_ = 0.0;
  std::optional<EchoSegments> echo_;
  double population_ = 1.0;
};

inline complex rephasing_response(const EnsembleModel& model, double tau_ps, double waiting_ps,
                                  double t_ps) {
  return ResponseKernel(model, waiting_ps)(tau_ps, t_ps);
}

/// Evaluates the response over the full grid. The rotating frame is the
/// model's carrier energy unless `carrier_mev` is given.
inline TimeDomainScan simulate_scan(const EnsembleModel& model, const ScanGrid& grid,
                                    std::optional<double> carrier_mev = std::nullopt) {
  validate(grid);
  const double carrier = carrier_mev.value_or(carrier_energy(model));
  const ResponseKernel kernel(model, grid.waiting_ps, carrier);
  TimeDomainScan scan;
  scan.grid = grid;
  scan.carrier_mev = carrier;
  scan.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.n_tau; ++i) {
    const double tau = grid.tau(i);
    for (std::size_t j = 0; j < grid.n_t; ++j) scan.values[i * grid.n_t + j] = kernel.evaluate(tau, grid.t(j));
  }
  return scan;
}

/// Emission-time integration window for integrated_fwm. Zero fields are
/// chosen automatically from the model's widths and detunings.
struct FwmIntegration {
  double t_step_ps = 0.0;
  double t_max_ps = 0.0;
};

/// Integrated four-wave-mixing field: for every tau, the trapezoidal integral
/// of |R(tau, t)| over t in [0, t_max].
inline std::vector<double> integrated_fwm(const EnsembleModel& model, std::span<const double> tau_samples,
                                          double waiting_ps, FwmIntegration window = {}) {
  if (tau_samples.empty()) throw DomainError("integrated_fwm: empty tau list");
  for (double tau : tau_samples)
    if (!std::isfinite(tau) || tau < 0.0) throw DomainError("integrated_fwm: tau must be finite and >= 0");
  const ResponseKernel kernel(model, waiting_ps);
  const double tau_max = *std::max_element(tau_samples.begin(), tau_samples.end());

  if (window.t_step_ps <= 0.0) {
    double step = 0.02;
    const double smax = kernel.max_sigma();
    const double dmax = kernel.max_detuning();
    if (smax > 0.0) step = std::min(step, 0.2 / smax);
    if (dmax > 0.0) step = std::min(step, 0.2 / dmax);
    window.t_step_ps = step;
  }
  if (window.t_max_ps <= 0.0) {
    const double smin = kernel.min_sigma();
    const double span = smin > 0.0 ? std::clamp(8.0 / smin, 10.0, 200.0) : 10.0;
    window.t_max_ps = tau_max + span;
  }
  const auto n = static_cast<std::size_t>(std::ceil(window.t_max_ps / window.t_step_ps)) + 1;
  const double h = window.t_max_ps / static_cast<double>(n - 1);

  std::vector<double> field;
  field.reserve(tau_samples.size());
  for (double tau : tau_samples) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = (j == 0 || j + 1 == n) ? 0.5 : 1.0;
      acc += w * std::abs(kernel.evaluate(tau, static_cast<double>(j) * h));
    }
    field.push_back(acc * h);
  }
  return field;
}

}  // namespace mdcs
