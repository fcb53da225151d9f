#pragma once

// Model-specific fits of the analysis chain: simultaneous diagonal /
// cross-diagonal lineshapes, thermal dephasing series, spectral-diffusion
// lines, bimodal diagonal slices and two-stage echo decays.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "mdcs/nlls.hpp"
#include "mdcs/physics.hpp"
#include "mdcs/simulator.hpp"
#include "mdcs/spectra.hpp"

namespace mdcs {

/// One point of a gamma-vs-condition series. `x` is a temperature in K or a
/// waiting time in ps depending on the series.
struct SeriesPoint {
  double x = 0.0;
  double y = 0.0;
  std::optional<double> y_err;

  bool operator==(const SeriesPoint&) const = default;
};

namespace detail {

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline bool all_have_errors(std::span<const SeriesPoint> pts) {
  return std::all_of(pts.begin(), pts.end(), [](const SeriesPoint& p) { return p.y_err.has_value(); });
}

inline void validate_series(std::span<const SeriesPoint> pts) {
  for (const auto& p : pts) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DomainError("series contains non-finite values");
    if (p.y_err && !(*p.y_err > 0.0 && std::isfinite(*p.y_err)))
      throw DomainError("series y_err must be finite and > 0");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Thermal dephasing series

/// Residuals (gamma(T_i) - y_i) / err_i of the thermal model with analytic
/// Jacobian. Parameter order: gamma0, gamma_star, e_ph.
struct ThermalResidual {
  std::vector<double> temps;
  std::vector<double> ys;
  std::vector<double> inv_err;

  Eigen::VectorXd operator()(const Eigen::VectorXd& p) const {
    Eigen::VectorXd r(static_cast<Eigen::Index>(temps.size()));
    for (std::size_t i = 0; i < temps.size(); ++i)
      r[static_cast<Eigen::Index>(i)] = (p[0] + p[1] * bose_occupation(p[2], temps[i]) - ys[i]) * inv_err[i];
    return r;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& p) const {
    Eigen::MatrixXd j(static_cast<Eigen::Index>(temps.size()), 3);
    for (std::size_t i = 0; i < temps.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double kt = constants::k_b * temps[i];
      double n = 0.0, dn_de = 0.0;
      if (temps[i] > 0.0) {
        const double x = p[2] / kt;
        if (x <= 700.0) {
          const double em1 = std::expm1(x);
          n = 1.0 / em1;
          // d/dE 1/(e^x - 1) = -e^x / (e^x - 1)^2 / kT
          dn_de = -(em1 + 1.0) / (em1 * em1) / kt;
        }
      }
      j(k, 0) = inv_err[i];
      j(k, 1) = n * inv_err[i];
      j(k, 2) = p[1] * dn_de * inv_err[i];
    }
    return j;
  }
};

/// Initial guess: gamma0 from the smallest rate, E_ph = 30 meV, and
/// gamma_star matched to the hottest point.
inline ThermalDephasingParams default_thermal_init(std::span<const SeriesPoint> pts) {
  ThermalDephasingParams init;
  init.e_ph = 30.0;
  double ymin = INFINITY;
  const SeriesPoint* hottest = nullptr;
  for (const auto& p : pts) {
    ymin = std::min(ymin, p.y);
    if (!hottest || p.x > hottest->x) hottest = &p;
  }
  init.gamma0 = std::max(ymin, 0.0);
  const double n = hottest ? bose_occupation(init.e_ph, hottest->x) : 0.0;
  init.gamma_star = n > 0.0 ? std::max(hottest->y - init.gamma0, 0.0) / n : 0.0;
  return init;
}

/// Fits gamma(T) = gamma0 + gamma_star / (exp(E_ph / kT) - 1). Weighted by
/// 1/y_err^2 when every point carries an error.
inline FitResult fit_thermal_series(std::span<const SeriesPoint> pts,
                                    std::optional<ThermalDephasingParams> init = std::nullopt,
                                    const NllsOptions& opt = {}) {
  detail::validate_series(pts);
  if (pts.size() < 4) throw DomainError("fit_thermal_series: need at least 4 points");
  double tmin = INFINITY, tmax = 0.0;
  for (const auto& p : pts) {
    if (!(p.x > 0.0)) throw DomainError("fit_thermal_series: temperatures must be > 0");
    if (!(p.y > 0.0)) throw DomainError("fit_thermal_series: rates must be > 0");
    tmin = std::min(tmin, p.x);
    tmax = std::max(tmax, p.x);
  }
  if (tmax < 3.0 * tmin) throw DomainError("fit_thermal_series: temperature span ratio must be >= 3");

  const ThermalDephasingParams start = init.value_or(default_thermal_init(pts));
  validate(start);

  // Rates are rescaled to O(1) so the fitted temperature dependence does not
  // depend on the ordinate scale.
  double scale = 0.0;
  for (const auto& p : pts) scale = std::max(scale, p.y);
  const bool weighted = detail::all_have_errors(pts);
  ThermalResidual model;
  for (const auto& p : pts) {
    model.temps.push_back(p.x);
    model.ys.push_back(p.y / scale);
    model.inv_err.push_back(weighted ? scale / *p.y_err : 1.0);
  }
  const double inf = std::numeric_limits<double>::infinity();
  const Bounds bounds{{0.0, 0.0, 1e-6}, {inf, inf, 200.0}};
  const double x0[] = {start.gamma0 / scale, start.gamma_star / scale, std::clamp(start.e_ph, 1e-6, 200.0)};
  NllsOptions o = opt;
  o.absolute_sigma = o.absolute_sigma && weighted;
  FitResult res = nlls_fit(model, x0, bounds, {"gamma0", "gamma_star", "e_ph"}, o);
  for (std::size_t i = 0; i < 2; ++i) {
    res.params[i] *= scale;
    res.sigma[i] *= scale;
  }
  if (weighted) res.notes.push_back("weighted by 1/y_err^2");
  if (res.params[1] <= 0.0) {
    res.degenerate = true;
    res.notes.push_back("gamma_star at lower bound; e_ph undetermined");
  }
  if (res.params[2] >= 200.0) {
    res.degenerate = true;
    res.notes.push_back("e_ph at upper bound");
  }
  return res;
}

// ---------------------------------------------------------------------------
// Spectral diffusion

/// Straight-line fit gamma(T_wait) = intercept + rate * T_wait, closed form.
/// Returns intercept (GHz) and rate (MHz/ps).
inline FitResult fit_diffusion_series(std::span<const SeriesPoint> pts) {
  detail::validate_series(pts);
  if (pts.size() < 2) throw DomainError("fit_diffusion_series: need at least 2 points");
  const bool weighted = detail::all_have_errors(pts);
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (const auto& p : pts) {
    const double w = weighted ? 1.0 / (*p.y_err * *p.y_err) : 1.0;
    sw += w;
    sx += w * p.x;
    sy += w * p.y;
  }
  const double xm = sx / sw, ym = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : pts) {
    const double w = weighted ? 1.0 / (*p.y_err * *p.y_err) : 1.0;
    sxx += w * (p.x - xm) * (p.x - xm);
    sxy += w * (p.x - xm) * (p.y - ym);
  }
  if (!(sxx > 0.0)) throw DomainError("fit_diffusion_series: all waiting times identical");
  const double slope = sxy / sxx;
  const double intercept = ym - slope * xm;

  double chi2 = 0.0, ssr = 0.0;
  for (const auto& p : pts) {
    const double w = weighted ? 1.0 / (*p.y_err * *p.y_err) : 1.0;
    const double e = p.y - (intercept + slope * p.x);
    chi2 += w * e * e;
    ssr += e * e;
  }
  const double dof = static_cast<double>(pts.size()) - 2.0;
  const double s2 = dof > 0.0 ? chi2 / dof : 0.0;
  const double var_slope = s2 / sxx;
  const double var_icpt = s2 * (1.0 / sw + xm * xm / sxx);

  FitResult res;
  res.names = {"intercept", "rate"};
  res.params = {intercept, slope * 1e3};
  res.sigma = {std::sqrt(var_icpt), std::sqrt(var_slope) * 1e3};
  res.residual_norm = ssr;
  res.iterations = 1;
  res.converged = true;
  if (weighted) res.notes.push_back("weighted by 1/y_err^2");
  return res;
}

// ---------------------------------------------------------------------------
// Bimodal diagonal slice

struct BimodalOptions {
  bool fix_equal_weights = false;
  double collision_mev = 0.1;
};

/// Two Gaussians of fixed widths; parameters (omega1, omega2, w1, w2) or
/// (omega1, omega2, w) when weights are tied.
struct BimodalResidual {
  std::vector<double> x;
  std::vector<double> y;
  double s1 = 1.0;
  double s2 = 1.0;
  bool tied = false;

  double w2_of(const Eigen::VectorXd& p) const { return tied ? p[2] : p[3]; }

  Eigen::VectorXd operator()(const Eigen::VectorXd& p) const {
    Eigen::VectorXd r(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double a = (x[i] - p[0]) / s1, b = (x[i] - p[1]) / s2;
      r[static_cast<Eigen::Index>(i)] = p[2] * std::exp(-0.5 * a * a) + w2_of(p) * std::exp(-0.5 * b * b) - y[i];
    }
    return r;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& p) const {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), p.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double a = (x[i] - p[0]) / s1, b = (x[i] - p[1]) / s2;
      const double g1 = std::exp(-0.5 * a * a), g2 = std::exp(-0.5 * b * b);
      j(k, 0) = p[2] * g1 * a / s1;
      j(k, 1) = w2_of(p) * g2 * b / s2;
      if (tied) {
        j(k, 2) = g1 + g2;
      } else {
        j(k, 2) = g1;
        j(k, 3) = g2;
      }
    }
    return j;
  }
};

namespace detail {

// Indices of strict local maxima, largest first.
inline std::vector<std::size_t> local_maxima(std::span<const double> y) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 1; i + 1 < y.size(); ++i)
    if (y[i] > y[i - 1] && y[i] >= y[i + 1]) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return y[a] > y[b]; });
  return idx;
}

}  // namespace detail

/// Fits a diagonal slice with two Gaussians of fixed widths `sigma1_mev`,
/// `sigma2_mev`; only centers and weights vary. Centers are returned in
/// ascending order together with the width each one carries.
inline FitResult fit_bimodal_diagonal(const SliceProfile& slice, double sigma1_mev, double sigma2_mev,
                                      const BimodalOptions& bopt = {}, const NllsOptions& opt = {}) {
  if (!(sigma1_mev > 0.0) || !(sigma2_mev > 0.0)) throw DomainError("fit_bimodal_diagonal: widths must be > 0");
  if (slice.abscissa.size() != slice.ordinate.size() || slice.abscissa.size() < 5)
    throw DomainError("fit_bimodal_diagonal: slice too short");
  const double scale = detail::max_abs(slice.ordinate);
  if (!(scale > 0.0)) throw DomainError("fit_bimodal_diagonal: slice is identically zero");

  BimodalResidual model;
  model.x = slice.abscissa;
  model.y.reserve(slice.ordinate.size());
  for (double v : slice.ordinate) model.y.push_back(v / scale);
  model.s1 = sigma1_mev;
  model.s2 = sigma2_mev;
  model.tied = bopt.fix_equal_weights;

  const auto peaks = detail::local_maxima(model.y);
  const auto global = static_cast<std::size_t>(std::max_element(model.y.begin(), model.y.end()) - model.y.begin());
  double c1 = 0.0, c2 = 0.0, a1 = 0.0, a2 = 0.0;
  if (peaks.size() >= 2) {
    const std::size_t lo = std::min(peaks[0], peaks[1]), hi = std::max(peaks[0], peaks[1]);
    c1 = model.x[lo];
    c2 = model.x[hi];
    a1 = model.y[lo];
    a2 = model.y[hi];
  } else {
    const std::size_t p = peaks.empty() ? global : peaks[0];
    const double half = 0.5 * std::min(sigma1_mev, sigma2_mev);
    c1 = model.x[p] - half;
    c2 = model.x[p] + half;
    a1 = a2 = 0.5 * model.y[p];
  }
  const double xlo = model.x.front(), xhi = model.x.back();
  const double inf = std::numeric_limits<double>::infinity();
  FitResult res;
  if (model.tied) {
    const double x0[] = {c1, c2, 0.5 * (a1 + a2)};
    res = nlls_fit(model, x0, Bounds{{xlo, xlo, 0.0}, {xhi, xhi, inf}}, {"omega1", "omega2", "w"}, opt);
    res.names = {"omega1", "omega2", "w1", "w2"};
    res.params.push_back(res.params[2]);
    res.sigma.push_back(res.sigma[2]);
  } else {
    const double x0[] = {c1, c2, a1, a2};
    res = nlls_fit(model, x0, Bounds{{xlo, xlo, 0.0, 0.0}, {xhi, xhi, inf, inf}}, {"omega1", "omega2", "w1", "w2"}, opt);
  }
  res.params[2] *= scale;
  res.params[3] *= scale;
  res.sigma[2] *= scale;
  res.sigma[3] *= scale;

  double width1 = sigma1_mev, width2 = sigma2_mev;
  if (res.params[0] > res.params[1]) {
    std::swap(res.params[0], res.params[1]);
    std::swap(res.sigma[0], res.sigma[1]);
    std::swap(res.params[2], res.params[3]);
    std::swap(res.sigma[2], res.sigma[3]);
    std::swap(width1, width2);
  }
  res.names.insert(res.names.end(), {"width1", "width2"});
  res.params.insert(res.params.end(), {width1, width2});
  res.sigma.insert(res.sigma.end(), {0.0, 0.0});
  if (res.params[1] - res.params[0] < bopt.collision_mev) {
    res.degenerate = true;
    res.notes.push_back("center collision");
  }
  if (res.params[2] <= 0.0 || res.params[3] <= 0.0) {
    res.degenerate = true;
    res.notes.push_back("component weight at zero");
  }
  if (model.tied) res.notes.push_back("weights fixed equal");
  return res;
}

inline double bimodal_value(const FitResult& fit, double x) {
  const double a = (x - fit.value("omega1")) / fit.value("width1");
  const double b = (x - fit.value("omega2")) / fit.value("width2");
  return fit.value("w1") * std::exp(-0.5 * a * a) + fit.value("w2") * std::exp(-0.5 * b * b);
}

// ---------------------------------------------------------------------------
// Two-stage echo decay

struct TracePoint {
  double tau_ps = 0.0;
  double field = 0.0;
};

namespace detail {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_err = 0.0;
  double ssr = 0.0;
};

inline LineFit line_fit(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xm += x[i];
    ym += y[i];
  }
  xm /= n;
  ym /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - xm) * (x[i] - xm);
    sxy += (x[i] - xm) * (y[i] - ym);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = ym - f.slope * xm;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    f.ssr += e * e;
  }
  f.slope_err = n > 2.0 ? std::sqrt(f.ssr / (n - 2.0) / sxx) : 0.0;
  return f;
}

}  // namespace detail

/// Breakpoint search over sample positions: for every split, the two
/// segments get independent straight-line fits of log(field) against tau,
/// and the split with the smallest total squared residual wins. With
/// field ~ exp(-2 tau / T2), each slope s gives T2 = -2 / s.
inline FitResult fit_echo_segments(std::span<const TracePoint> trace) {
  if (trace.size() < 10) throw DomainError("fit_echo_segments: need at least 10 points");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& p = trace[i];
    if (!std::isfinite(p.tau_ps) || !std::isfinite(p.field)) throw DomainError("fit_echo_segments: non-finite value");
    if (!(p.field > 0.0)) throw DomainError("fit_echo_segments: fields must be > 0");
    if (i > 0 && !(p.tau_ps > trace[i - 1].tau_ps)) throw DomainError("fit_echo_segments: tau must increase");
    x.push_back(p.tau_ps);
    y.push_back(std::log(p.field));
  }
  const std::size_t n = x.size();
  const std::span<const double> xs(x), ys(y);

  // Splits whose residual differs by less than `tie` are treated as equal so
  // the earliest one wins regardless of rounding; `tie` is relative to the
  // spread of log(field), which does not change with the amplitude.
  double ym = 0.0, sst = 0.0;
  for (double v : y) ym += v;
  ym /= static_cast<double>(n);
  for (double v : y) sst += (v - ym) * (v - ym);
  const double tie = 1e-12 * sst;

  std::size_t best = 0;
  double best_ssr = INFINITY;
  detail::LineFit early, late;
  for (std::size_t k = 2; k + 2 <= n; ++k) {
    const auto a = detail::line_fit(xs.first(k), ys.first(k));
    const auto b = detail::line_fit(xs.subspan(k), ys.subspan(k));
    if (a.ssr + b.ssr < best_ssr - tie) {
      best_ssr = a.ssr + b.ssr;
      best = k;
      early = a;
      late = b;
    }
  }

  FitResult res;
  res.names = {"t2_early", "t2_late", "crossover"};
  const auto t2 = [&](const detail::LineFit& f, double& value, double& err) {
    if (f.slope < 0.0) {
      value = -2.0 / f.slope;
      err = 2.0 * f.slope_err / (f.slope * f.slope);
    } else {
      value = 0.0;
      err = 0.0;
      res.degenerate = true;
      res.notes.push_back("non-decaying segment");
    }
  };
  double t2e = 0.0, t2e_err = 0.0, t2l = 0.0, t2l_err = 0.0;
  t2(early, t2e, t2e_err);
  t2(late, t2l, t2l_err);
  const double step = x[best] - x[best - 1];
  res.params = {t2e, t2l, x[best]};
  res.sigma = {t2e_err, t2l_err, step};
  res.residual_norm = best_ssr;
  res.iterations = static_cast<int>(n - 3);
  res.converged = true;
  if (best < 4 || n - best < 4) {
    res.degenerate = true;
    res.notes.push_back("fewer than 4 points in a segment");
  }
  return res;
}

/// Piecewise model field at tau for a fitted echo result and the amplitude
/// at tau = 0.
inline double echo_segments_value(double amplitude, double t2_early, double t2_late, double crossover, double tau) {
  if (tau < crossover) return amplitude * std::exp(-2.0 * tau / t2_early);
  return amplitude * std::exp(-2.0 * crossover / t2_early - 2.0 * (tau - crossover) / t2_late);
}

// ---------------------------------------------------------------------------
// Simultaneous diagonal / cross-diagonal lineshape fit

struct LineshapeInit {
  double gamma_ghz = 0.0;
  double sigma_mev = 0.0;
};

struct LineshapeOptions {
  double diagonal_half_range_mev = 8.0;  // clipped to the spectrum coverage
  double cross_half_width_mev = 4.0;
  bool fit_center = true;
};

/// Diagonal and cross-diagonal magnitude slices through an anchor, sampled
/// at fixed positions.
struct SlicePair {
  SliceProfile diagonal;
  SliceProfile cross;
};

inline SlicePair lineshape_slices(const Spectrum2D& spec, double anchor_mev, const LineshapeOptions& o) {
  const double cover_lo = std::max(-spec.omega_tau.back(), spec.omega_t.front());
  const double cover_hi = std::min(-spec.omega_tau.front(), spec.omega_t.back());
  if (anchor_mev <= cover_lo || anchor_mev >= cover_hi) throw DomainError("anchor outside spectrum grid");
  const double lo = std::max(anchor_mev - o.diagonal_half_range_mev, cover_lo);
  const double hi = std::min(anchor_mev + o.diagonal_half_range_mev, cover_hi);
  return {diagonal_slice(spec, lo, hi), cross_diagonal_slice(spec, anchor_mev, o.cross_half_width_mev)};
}

namespace detail {

inline double fwhm(const SliceProfile& s) {
  const auto it = std::max_element(s.ordinate.begin(), s.ordinate.end());
  const auto p = static_cast<std::size_t>(it - s.ordinate.begin());
  const double half = 0.5 * *it;
  std::size_t l = p, r = p;
  while (l > 0 && s.ordinate[l] > half) --l;
  while (r + 1 < s.ordinate.size() && s.ordinate[r] > half) ++r;
  return s.abscissa[r] - s.abscissa[l];
}

}  // namespace detail

/// Initial (gamma, sigma) from the slices: gamma from the cross-diagonal
/// FWHM of a magnitude Lorentzian (FWHM = 2 sqrt(3) gamma per axis), sigma
/// from the second moment of the diagonal slice above 5% of its peak.
inline LineshapeInit estimate_lineshape_init(const SlicePair& slices) {
  const double width_mev = detail::fwhm(slices.cross) / std::numbers::sqrt2;
  const double gamma_rad_per_ps = width_mev * constants::rad_per_ps_per_mev / (2.0 * std::sqrt(3.0));
  LineshapeInit init;
  init.gamma_ghz = std::max(gamma_rad_per_ps * 1e3, 1.0);

  const auto& d = slices.diagonal;
  const double peak = *std::max_element(d.ordinate.begin(), d.ordinate.end());
  double sw = 0.0, sx = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < d.abscissa.size(); ++i) {
    if (d.ordinate[i] < 0.05 * peak) continue;
    sw += d.ordinate[i];
    sx += d.ordinate[i] * d.abscissa[i];
    sxx += d.ordinate[i] * d.abscissa[i] * d.abscissa[i];
  }
  const double mean = sx / sw;
  init.sigma_mev = std::max(std::sqrt(std::max(sxx / sw - mean * mean, 0.0)), 0.05);
  return init;
}

/// Forward model for the lineshape fit: a single Gaussian component with the
/// source spectrum's grid, carrier, padding and window, sliced at the data's
/// sample positions. Parameter order: gamma (GHz), sigma (meV), amplitude,
/// center (meV).
class LineshapeModel {
 public:
  LineshapeModel(const Spectrum2D& spec, double anchor_mev, const LineshapeOptions& o, double data_scale)
      : source_(spec.source), anchor_(anchor_mev), opt_(o) {
    slices_ = lineshape_slices(spec, anchor_mev, o);
    for (double v : slices_.diagonal.ordinate) data_.push_back(v / data_scale);
    for (double v : slices_.cross.ordinate) data_.push_back(v / data_scale);
  }

  const SlicePair& data_slices() const { return slices_; }

  /// Unscaled model slices for parameters (gamma, sigma, center).
  SlicePair model_slices(double gamma_ghz, double sigma_mev, double center_mev) const {
    EnsembleModel m;
    m.components = {{center_mev, sigma_mev, 1.0}};
    m.gamma_ghz = gamma_ghz;
    const auto scan = simulate_scan(m, source_.grid, source_.carrier_mev);
    const auto spec = one_quantum_spectrum(scan, source_.zero_pad, source_.window);
    return lineshape_slices(spec, anchor_, opt_);
  }

  Eigen::VectorXd operator()(const Eigen::VectorXd& p) const {
    const double center = opt_.fit_center ? p[3] : anchor_;
    const auto s = model_slices(p[0], p[1], center);
    Eigen::VectorXd r(static_cast<Eigen::Index>(data_.size()));
    std::size_t k = 0;
    for (double v : s.diagonal.ordinate) {
      r[static_cast<Eigen::Index>(k)] = p[2] * v - data_[k];
      ++k;
    }
    for (double v : s.cross.ordinate) {
      r[static_cast<Eigen::Index>(k)] = p[2] * v - data_[k];
      ++k;
    }
    return r;
  }

 private:
  SpectrumSource source_;
  double anchor_;
  LineshapeOptions opt_;
  SlicePair slices_;
  std::vector<double> data_;
};

/// Joint fit of the diagonal and cross-diagonal slices through `anchor_mev`
/// against spectra regenerated from a single-component model on the same
/// grid. Returns gamma (GHz), sigma (meV), amplitude and center (meV).
inline FitResult fit_lineshape_pair(const Spectrum2D& spec, double anchor_mev,
                                    std::optional<LineshapeInit> init = std::nullopt,
                                    const LineshapeOptions& lopt = {}, const NllsOptions& opt = {}) {
  const auto probe = lineshape_slices(spec, anchor_mev, lopt);
  double scale = 0.0;
  for (double v : probe.diagonal.ordinate) scale = std::max(scale, v);
  for (double v : probe.cross.ordinate) scale = std::max(scale, v);
  if (!(scale > 0.0)) throw DomainError("fit_lineshape_pair: spectrum magnitude is zero near the anchor");
  if (magnitude_at(spec, -anchor_mev, anchor_mev) <= 0.0)
    throw DomainError("fit_lineshape_pair: spectrum magnitude is zero at the anchor");

  const LineshapeInit start = init.value_or(estimate_lineshape_init(probe));
  if (!(start.gamma_ghz >= 0.0) || !(start.sigma_mev >= 0.0)) throw DomainError("fit_lineshape_pair: invalid init");
  const LineshapeModel model(spec, anchor_mev, lopt, scale);

  // Amplitude start: ratio of peak data to peak model at the initial shape.
  const auto s0 = model.model_slices(start.gamma_ghz, start.sigma_mev, anchor_mev);
  double mpeak = 0.0;
  for (double v : s0.diagonal.ordinate) mpeak = std::max(mpeak, v);
  for (double v : s0.cross.ordinate) mpeak = std::max(mpeak, v);
  const double amp0 = mpeak > 0.0 ? 1.0 / mpeak : 1.0;

  const double inf = std::numeric_limits<double>::infinity();
  const auto& d = probe.diagonal.abscissa;
  const double x0[] = {start.gamma_ghz, start.sigma_mev, amp0, anchor_mev};
  const Bounds bounds{{0.0, 0.0, 0.0, d.front()}, {inf, inf, inf, d.back()}};
  std::vector<std::string> names{"gamma", "sigma", "amplitude", "center"};
  FitResult res;
  if (lopt.fit_center) {
    res = nlls_fit(model, x0, bounds, names, opt);
  } else {
    const Bounds b3{{0.0, 0.0, 0.0}, {inf, inf, inf}};
    res = nlls_fit(model, std::span<const double>(x0, 3), b3, {"gamma", "sigma", "amplitude"}, opt);
    res.names.push_back("center");
    res.params.push_back(anchor_mev);
    res.sigma.push_back(0.0);
  }
  res.params[2] *= scale;
  res.sigma[2] *= scale;
  if (res.params[0] <= 0.0) {
    res.degenerate = true;
    res.notes.push_back("gamma at lower bound");
  }
  if (res.params[1] <= 0.0) {
    res.degenerate = true;
    res.notes.push_back("sigma at lower bound");
  }
  return res;
}

}  // namespace mdcs
