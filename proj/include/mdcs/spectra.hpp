#pragma once

// One-quantum spectra: double Fourier transform of a rephasing scan along
// tau and t, with absolute energy axes, plus diagonal and cross-diagonal
// slices of the magnitude.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "mdcs/fft.hpp"
#include "mdcs/physics.hpp"
#include "mdcs/simulator.hpp"

namespace mdcs {

enum class Window { none, cos2 };

inline std::string to_string(Window w) { return w == Window::none ? "none" : "cos2"; }

inline Window window_from_string(const std::string& s) {
  if (s == "none") return Window::none;
  if (s == "cos2" || s == "cos^2" || s == "cos²") return Window::cos2;
  throw DomainError("unknown window '" + s + "' (expected none or cos2)");
}

/// Everything needed to regenerate a spectrum from a model.
struct SpectrumSource {
  ScanGrid grid;
  double carrier_mev = 0.0;
  std::size_t zero_pad = 1;
  Window window = Window::none;
};

struct Spectrum2D {
  std::vector<double> omega_tau;  // meV, ascending, negative near -carrier
  std::vector<double> omega_t;    // meV, ascending
  std::vector<complex> values;    // row-major, index i_tau * omega_t.size() + j_t
  SpectrumSource source;

  std::size_t rows() const { return omega_tau.size(); }
  std::size_t cols() const { return omega_t.size(); }
  const complex& at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
  double magnitude(std::size_t i, std::size_t j) const { return std::abs(at(i, j)); }

  double tau_bin() const { return omega_tau[1] - omega_tau[0]; }
  double t_bin() const { return omega_t[1] - omega_t[0]; }
};

/// Energy offset (meV) of each bin of an fftshift-ordered axis of length
/// `m` for sampling step `step_ps`.
inline std::vector<double> shifted_energy_axis(std::size_t m, double step_ps) {
  std::vector<double> axis(m);
  const auto half = static_cast<double>(m / 2);
  const double df = 2.0 * std::numbers::pi / (static_cast<double>(m) * step_ps);  // rad/ps
  for (std::size_t s = 0; s < m; ++s)
    axis[s] = (static_cast<double>(s) - half) * df / constants::rad_per_ps_per_mev;
  return axis;
}

namespace detail {

inline double window_weight(Window w, std::size_t i, std::size_t n) {
  if (w == Window::none || n < 2) return 1.0;
  const double c = std::cos(0.5 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
  return c * c;
}

}  // namespace detail

/// Unitary 2D transform with kernel exp(+i w tau) exp(+i w t). A response
/// exp(i d (tau - t)) then peaks at (w_tau, w_t) = (-d, d), i.e. at
/// (-E, E) in absolute energy. The window is applied before zero padding.
inline Spectrum2D one_quantum_spectrum(const TimeDomainScan& scan, std::size_t zero_pad_factor = 2,
                                       Window window = Window::none) {
  validate(scan.grid);
  if (zero_pad_factor < 1) throw DomainError("zero_pad_factor must be >= 1");
  const auto& g = scan.grid;
  if (scan.values.size() != g.size()) throw DomainError("scan values do not match grid shape");

  const std::size_t mr = g.n_tau * zero_pad_factor;
  const std::size_t mc = g.n_t * zero_pad_factor;
  fft::Transform2D tr(mr, mc, fft::Sign::backward);
  auto buf = tr.data();
  std::fill(buf.begin(), buf.end(), complex{0.0, 0.0});
  for (std::size_t i = 0; i < g.n_tau; ++i) {
    const double wi = detail::window_weight(window, i, g.n_tau);
    for (std::size_t j = 0; j < g.n_t; ++j) {
      const complex v = scan.values[i * g.n_t + j];
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw DomainError("scan contains non-finite values");
      buf[i * mc + j] = v * (wi * detail::window_weight(window, j, g.n_t));
    }
  }
  tr.execute();

  Spectrum2D spec;
  spec.source = {g, scan.carrier_mev, zero_pad_factor, window};
  const auto off_tau = shifted_energy_axis(mr, g.tau_step_ps);
  const auto off_t = shifted_energy_axis(mc, g.t_step_ps);
  spec.omega_tau.resize(mr);
  spec.omega_t.resize(mc);
  for (std::size_t s = 0; s < mr; ++s) spec.omega_tau[s] = -scan.carrier_mev + off_tau[s];
  for (std::size_t s = 0; s < mc; ++s) spec.omega_t[s] = scan.carrier_mev + off_t[s];

  // Phase factors for nonzero grid origins: exp(+i w tau0), exp(+i w t0).
  std::vector<complex> ph_tau(mr), ph_t(mc);
  for (std::size_t s = 0; s < mr; ++s) ph_tau[s] = std::polar(1.0, off_tau[s] * constants::rad_per_ps_per_mev * g.tau0_ps);
  for (std::size_t s = 0; s < mc; ++s) ph_t[s] = std::polar(1.0, off_t[s] * constants::rad_per_ps_per_mev * g.t0_ps);

  const double norm = 1.0 / std::sqrt(static_cast<double>(mr) * static_cast<double>(mc));
  spec.values.resize(mr * mc);
  const std::size_t hr = mr / 2, hc = mc / 2;
  for (std::size_t s = 0; s < mr; ++s) {
    const std::size_t k = (s + mr - hr) % mr;
    for (std::size_t q = 0; q < mc; ++q) {
      const std::size_t l = (q + mc - hc) % mc;
      spec.values[s * mc + q] = buf[k * mc + l] * ph_tau[s] * ph_t[q] * norm;
    }
  }
  return spec;
}

struct SliceProfile {
  std::vector<double> abscissa;  // meV: absolute energy (diagonal) or signed offset (cross-diagonal)
  std::vector<double> ordinate;  // magnitude
  double anchor_mev = 0.0;
};

/// Bilinear interpolation of |S| at (omega_tau, omega_t). Throws outside the grid.
inline double magnitude_at(const Spectrum2D& spec, double omega_tau, double omega_t) {
  const auto locate = [](const std::vector<double>& axis, double x, std::size_t& i, double& f) {
    const double step = axis[1] - axis[0];
    const double lo = axis.front(), hi = axis.back();
    const double eps = 1e-9 * step;
    if (!(x >= lo - eps && x <= hi + eps)) return false;
    double pos = (x - lo) / step;
    pos = std::clamp(pos, 0.0, static_cast<double>(axis.size() - 1));
    i = std::min(static_cast<std::size_t>(pos), axis.size() - 2);
    f = pos - static_cast<double>(i);
    return true;
  };
  std::size_t i = 0, j = 0;
  double fi = 0.0, fj = 0.0;
  if (!locate(spec.omega_tau, omega_tau, i, fi) || !locate(spec.omega_t, omega_t, j, fj))
    throw DomainError("slice point outside spectrum grid");
  const double m00 = spec.magnitude(i, j), m01 = spec.magnitude(i, j + 1);
  const double m10 = spec.magnitude(i + 1, j), m11 = spec.magnitude(i + 1, j + 1);
  return (1.0 - fi) * ((1.0 - fj) * m00 + fj * m01) + fi * ((1.0 - fj) * m10 + fj * m11);
}

inline double slice_step(const Spectrum2D& spec) {
  return std::min(spec.tau_bin(), spec.t_bin());
}

/// |S| along |w_tau| = |w_t| for energies in [lo, hi], at axis resolution.
inline SliceProfile diagonal_slice(const Spectrum2D& spec, double lo_mev, double hi_mev) {
  if (!std::isfinite(lo_mev) || !std::isfinite(hi_mev) || !(hi_mev > lo_mev))
    throw DomainError("diagonal_slice: invalid range");
  const double cover_lo = std::max(-spec.omega_tau.back(), spec.omega_t.front());
  const double cover_hi = std::min(-spec.omega_tau.front(), spec.omega_t.back());
  if (lo_mev < cover_lo || hi_mev > cover_hi)
    throw DomainError("diagonal_slice: range outside spectrum coverage");
  const double step = slice_step(spec);
  const auto n = static_cast<std::size_t>(std::floor((hi_mev - lo_mev) / step + 1e-9)) + 1;
  SliceProfile out;
  out.anchor_mev = 0.5 * (lo_mev + hi_mev);
  out.abscissa.reserve(n);
  out.ordinate.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double e = lo_mev + static_cast<double>(k) * step;
    out.abscissa.push_back(e);
    out.ordinate.push_back(magnitude_at(spec, -e, e));
  }
  return out;
}

/// |S| along the anti-diagonal through (-anchor, anchor). The abscissa is the
/// signed in-plane distance from the anchor, positive towards higher w_t.
inline SliceProfile cross_diagonal_slice(const Spectrum2D& spec, double anchor_mev, double half_width_mev) {
  if (!std::isfinite(anchor_mev) || !std::isfinite(half_width_mev) || !(half_width_mev > 0.0))
    throw DomainError("cross_diagonal_slice: invalid anchor or half width");
  const double step = slice_step(spec);
  const auto k_half = static_cast<std::size_t>(std::floor(half_width_mev / step + 1e-9));
  const double r = std::numbers::sqrt2 / 2.0;
  // Range check on the two end points; the segment is straight so they bound it.
  const double ends[] = {-static_cast<double>(k_half) * step, static_cast<double>(k_half) * step};
  for (double d : ends) {
    const double wt = anchor_mev + d * r, wtau = -anchor_mev + d * r;
    if (wt < spec.omega_t.front() || wt > spec.omega_t.back() || wtau < spec.omega_tau.front() ||
        wtau > spec.omega_tau.back())
      throw DomainError("cross_diagonal_slice: anchor or width outside spectrum grid");
  }
  SliceProfile out;
  out.anchor_mev = anchor_mev;
  for (std::size_t k = 0; k <= 2 * k_half; ++k) {
    const double d = (static_cast<double>(k) - static_cast<double>(k_half)) * step;
    out.abscissa.push_back(d);
    out.ordinate.push_back(magnitude_at(spec, -anchor_mev + d * r, anchor_mev + d * r));
  }
  return out;
}

}  // namespace mdcs
