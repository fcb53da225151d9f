#pragma once

// Physical constants, unit conversions and the closed-form scalar models
// used throughout the toolkit.
//
// Unit conventions:
//   energies     meV
//   rates        GHz (ordinary frequency, gamma = 1/T2)
//   times        ps
//   temperature  K
//   fields       MV/cm

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mdcs {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace constants {

/// Boltzmann constant, meV/K (CODATA, 7 significant digits).
inline constexpr double k_b = 8.617333e-2;

/// 1 meV expressed as an ordinary frequency in GHz (CODATA, 7 significant digits).
inline constexpr double ghz_per_mev = 241.7989;

/// 1 meV expressed as an angular frequency in rad/ps. Shared by the
/// response kernel and the spectral axis calibration.
inline constexpr double rad_per_ps_per_mev = 2.0 * std::numbers::pi * ghz_per_mev * 1e-3;

}  // namespace constants

struct PhysicalConstants {
  double k_b = constants::k_b;
  double planck_conversion = constants::ghz_per_mev;
};

struct ThermalDephasingParams {
  double gamma0 = 0.0;      // GHz
  double gamma_star = 0.0;  // GHz
  double e_ph = 1.0;        // meV
};

struct SpectralDiffusionParams {
  double rate = 0.0;  // MHz per ps of waiting time
};

struct StarkParams {
  double chi_perp = 1.4;  // MHz/(V/cm)
};

namespace detail {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string(what) + ": non-finite input");
}

}  // namespace detail

inline void validate(const ThermalDephasingParams& p) {
  detail::require_finite(p.gamma0, "gamma0");
  detail::require_finite(p.gamma_star, "gamma_star");
  detail::require_finite(p.e_ph, "e_ph");
  if (p.gamma0 < 0.0) throw DomainError("gamma0 must be >= 0");
  if (p.gamma_star < 0.0) throw DomainError("gamma_star must be >= 0");
  if (p.e_ph <= 0.0) throw DomainError("e_ph must be > 0");
}

inline void validate(const SpectralDiffusionParams& p) {
  detail::require_finite(p.rate, "diffusion rate");
  if (p.rate < 0.0) throw DomainError("diffusion rate must be >= 0");
}

/// Bose occupation 1/(exp(E/kT) - 1) of a mode with energy `e_ph` (meV) at
/// temperature `temp` (K). Exactly zero at temp == 0.
inline double bose_occupation(double e_ph, double temp) {
  if (temp == 0.0) return 0.0;
  const double x = e_ph / (constants::k_b * temp);
  if (x > 700.0) return 0.0;
  return 1.0 / std::expm1(x);
}

/// gamma(T) = gamma0 + gamma_star / (exp(E_ph / kT) - 1), in GHz.
inline double thermal_dephasing_rate(const ThermalDephasingParams& params, double temp) {
  validate(params);
  if (!std::isfinite(temp) || temp < 0.0)
    throw DomainError("thermal_dephasing_rate: temperature must be finite and >= 0");
  if (temp == 0.0) return params.gamma0;
  return params.gamma0 + params.gamma_star * bose_occupation(params.e_ph, temp);
}

/// T2 in ps for a rate in GHz.
inline double dephasing_time(double gamma_ghz) {
  detail::require_finite(gamma_ghz, "dephasing_time");
  if (gamma_ghz <= 0.0) throw DomainError("dephasing_time: gamma must be > 0");
  return 1000.0 / gamma_ghz;
}

inline double energy_to_frequency(double e_mev) {
  detail::require_finite(e_mev, "energy_to_frequency");
  return e_mev * constants::ghz_per_mev;
}

inline double frequency_to_energy(double f_ghz) {
  detail::require_finite(f_ghz, "frequency_to_energy");
  return f_ghz / constants::ghz_per_mev;
}

/// Field (MV/cm) from a symmetric total splitting (meV). Each branch is
/// shifted by half the splitting.
inline double field_from_splitting(double total_splitting_mev, const StarkParams& stark) {
  detail::require_finite(total_splitting_mev, "field_from_splitting");
  detail::require_finite(stark.chi_perp, "chi_perp");
  if (stark.chi_perp <= 0.0) throw DomainError("chi_perp must be > 0");
  if (total_splitting_mev < 0.0) throw DomainError("splitting must be >= 0");
  const double shift_mhz = energy_to_frequency(0.5 * total_splitting_mev) * 1e3;
  const double field_v_per_cm = shift_mhz / stark.chi_perp;
  return field_v_per_cm * 1e-6;
}

inline double splitting_from_field(double field_mv_per_cm, const StarkParams& stark) {
  detail::require_finite(field_mv_per_cm, "splitting_from_field");
  detail::require_finite(stark.chi_perp, "chi_perp");
  if (stark.chi_perp <= 0.0) throw DomainError("chi_perp must be > 0");
  if (field_mv_per_cm < 0.0) throw DomainError("field must be >= 0");
  const double shift_mhz = field_mv_per_cm * 1e6 * stark.chi_perp;
  return 2.0 * frequency_to_energy(shift_mhz * 1e-3);
}

/// Homogeneous rate after spectral diffusion during `waiting_ps`:
/// gamma + rate * waiting, with the MHz/ps rate converted to GHz.
inline double effective_gamma(double gamma_intrinsic, const SpectralDiffusionParams& diffusion,
                              double waiting_ps) {
  detail::require_finite(gamma_intrinsic, "effective_gamma");
  validate(diffusion);
  if (!std::isfinite(waiting_ps) || waiting_ps < 0.0)
    throw DomainError("effective_gamma: waiting time must be finite and >= 0");
  return gamma_intrinsic + diffusion.rate * waiting_ps * 1e-3;
}

}  // namespace mdcs
