#pragma once

// Subcommands of the `mdcs` tool. Kept in a header so tests can drive the
// command line in-process.
//
// Exit codes: 0 success, 1 fit did not converge (results still written and
// flagged), 2 input validation failure.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mdcs/mdcs.hpp"

namespace mdcs::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_not_converged = 1;
inline constexpr int exit_invalid = 2;

struct CommonOptions {
  std::string in;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

struct SimulateOptions {
  double noise = 0.0;  // complex Gaussian noise, fraction of the peak magnitude
  std::optional<double> waiting_ps;
  std::optional<double> temperature_k;
};

struct FwmOptions {
  double tau_min_ps = 0.0;
  double tau_max_ps = 40.0;
  double tau_step_ps = 0.5;
  double noise = 0.0;  // multiplicative Gaussian noise
  std::optional<double> waiting_ps;
};

struct SpectrumOptions {
  std::size_t pad = 2;
  std::string window = "none";
};

struct SliceFitOptions {
  std::optional<double> anchor_mev;
  std::optional<double> gamma_init;
  std::optional<double> sigma_init;
  double diagonal_half_range = 8.0;
  double cross_half_width = 4.0;
  bool fixed_center = false;
};

struct ThermalFitOptions {
  std::optional<double> gamma0_init;
  std::optional<double> gamma_star_init;
  std::optional<double> e_ph_init;
};

struct BimodalFitOptions {
  double sigma1 = 2.6;
  double sigma2 = 2.3;
  std::vector<double> range;  // lo, hi in meV; spectrum input only
  bool equal_weights = false;
};

struct FieldOptions {
  std::optional<double> splitting_mev;
  std::optional<double> field_mv_per_cm;
  double chi_perp = 1.4;
};

namespace detail {

inline std::map<std::string, std::string> provenance_for(const std::string& command, const std::string& in_path,
                                                         const std::string& in_text) {
  std::map<std::string, std::string> prov;
  prov["tool"] = std::string("mdcs ") + mdcs::version;
  prov["command"] = command;
  prov["input"] = std::filesystem::path(in_path).filename().string();
  prov["input_fnv1a64"] = io::fnv1a64(in_text);
  return prov;
}

/// `<dir>/<stem><suffix>` next to the main output file.
inline std::string sibling(const std::string& out, const std::string& suffix) {
  const std::filesystem::path p(out);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

inline void require_out(const CommonOptions& c) {
  if (c.out.empty()) throw DomainError("--out is required");
}

inline void write_fit(const CommonOptions& c, const std::string& fit, const FitResult& r,
                      std::map<std::string, std::string> units, std::map<std::string, std::string> prov) {
  io::ParamsFile pf{fit, r, std::move(units), std::move(prov)};
  io::write_params(c.out, pf);
}

inline int report_fit(const FitResult& r, const CommonOptions& c, std::ostream& out, std::ostream& err) {
  for (std::size_t i = 0; i < r.names.size(); ++i)
    out << r.names[i] << " = " << io::format_double(r.params[i]) << " +/- " << io::format_double(r.sigma[i]) << '\n';
  if (r.degenerate) err << "warning: degenerate fit\n";
  for (const auto& n : r.notes) err << "note: " << n << '\n';
  if (c.verbose) err << "iterations: " << r.iterations << ", residual: " << io::format_double(r.residual_norm) << '\n';
  if (!r.converged) {
    err << "error: fit did not converge; partial results written to " << c.out << '\n';
    return exit_not_converged;
  }
  return exit_ok;
}

inline std::vector<SeriesPoint> read_points(const CommonOptions& c, std::string& text) {
  text = io::read_text(c.in);
  return io::parse_series(text, c.in).points;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline int cmd_simulate(const CommonOptions& c, const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  detail::require_out(c);
  const auto text = io::read_text(c.in);
  auto f = io::parse_model(text, c.in);
  if (o.waiting_ps) f.grid.waiting_ps = *o.waiting_ps;
  if (o.temperature_k) {
    if (!f.model.thermal) throw DomainError("--temperature needs 'thermal' parameters in the model file");
    f.model.thermal->temperature_k = *o.temperature_k;
  }
  if (o.noise < 0.0 || !std::isfinite(o.noise)) throw DomainError("--noise must be >= 0");
  auto scan = simulate_scan(f.model, f.grid);
  scan.provenance = detail::provenance_for("simulate", c.in, text);
  scan.provenance["gamma_GHz"] = io::format_double(intrinsic_gamma(f.model));
  if (o.noise > 0.0) {
    double peak = 0.0;
    for (const auto& v : scan.values) peak = std::max(peak, std::abs(v));
    std::mt19937_64 rng(c.seed.value_or(0));
    std::normal_distribution<double> nd(0.0, o.noise * peak);
    for (auto& v : scan.values) v += complex(nd(rng), nd(rng));
    scan.provenance["noise"] = io::format_double(o.noise);
    scan.provenance["seed"] = std::to_string(c.seed.value_or(0));
  }
  io::write_scan(c.out, scan);
  if (c.verbose) err << "wrote " << scan.grid.n_tau << " x " << scan.grid.n_t << " scan to " << c.out << '\n';
  out << "carrier_meV = " << io::format_double(scan.carrier_mev) << '\n';
  return exit_ok;
}

inline int cmd_fwm(const CommonOptions& c, const FwmOptions& o, std::ostream& out, std::ostream& err) {
  detail::require_out(c);
  const auto text = io::read_text(c.in);
  const auto f = io::parse_model(text, c.in);
  if (!(o.tau_step_ps > 0.0) || !(o.tau_max_ps > 0.0)) throw DomainError("--tau-step and --tau-max must be > 0");
  if (!(o.tau_min_ps >= 0.0) || !(o.tau_min_ps < o.tau_max_ps)) throw DomainError("--tau-min must lie in [0, tau-max)");
  if (o.noise < 0.0 || !std::isfinite(o.noise)) throw DomainError("--noise must be >= 0");
  std::vector<double> taus;
  for (std::size_t i = 0;; ++i) {
    const double tau = o.tau_min_ps + static_cast<double>(i) * o.tau_step_ps;
    if (tau > o.tau_max_ps + 1e-12) break;
    taus.push_back(tau);
  }
  const auto field = integrated_fwm(f.model, taus, o.waiting_ps.value_or(f.grid.waiting_ps));
  io::SeriesFile s;
  s.x_unit = "ps";
  s.y_unit = "field";
  s.provenance = detail::provenance_for("fwm", c.in, text);
  std::mt19937_64 rng(c.seed.value_or(0));
  std::normal_distribution<double> nd(0.0, 1.0);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    double y = field[i];
    if (o.noise > 0.0) y *= 1.0 + o.noise * nd(rng);
    s.points.push_back({taus[i], y, std::nullopt});
  }
  io::write_series(c.out, s);
  if (c.verbose) err << "wrote " << taus.size() << " integrated FWM samples to " << c.out << '\n';
  out << "samples = " << taus.size() << '\n';
  return exit_ok;
}

inline int cmd_spectrum(const CommonOptions& c, const SpectrumOptions& o, std::ostream& out, std::ostream& err) {
  detail::require_out(c);
  const auto scan = io::read_scan(c.in);
  const auto spec = one_quantum_spectrum(scan, o.pad, window_from_string(o.window));
  io::write_spectrum(c.out, spec);
  if (c.verbose) err << "wrote " << spec.rows() << " x " << spec.cols() << " spectrum to " << c.out << '\n';
  std::size_t best = 0;
  for (std::size_t k = 1; k < spec.values.size(); ++k)
    if (std::abs(spec.values[k]) > std::abs(spec.values[best])) best = k;
  out << "peak = (" << io::format_double(spec.omega_tau[best / spec.cols()]) << ", "
      << io::format_double(spec.omega_t[best % spec.cols()]) << ") meV\n";
  return exit_ok;
}

inline int cmd_fit_slices(const CommonOptions& c, const SliceFitOptions& o, std::ostream& out, std::ostream& err) {
  detail::require_out(c);
  const auto text = io::read_text(c.in);
  const auto spec = io::parse_spectrum(text, c.in);
  double anchor = 0.0;
  if (o.anchor_mev) {
    anchor = *o.anchor_mev;
  } else {
    // Strongest point on the diagonal.
    const double lo = std::max(-spec.omega_tau.back(), spec.omega_t.front());
    const double hi = std::min(-spec.omega_tau.front(), spec.omega_t.back());
    const auto d = diagonal_slice(spec, lo, hi);
    const auto it = std::max_element(d.ordinate.begin(), d.ordinate.end());
    anchor = d.abscissa[static_cast<std::size_t>(it - d.ordinate.begin())];
  }
  LineshapeOptions lo;
  lo.diagonal_half_range_mev = o.diagonal_half_range;
  lo.cross_half_width_mev = o.cross_half_width;
  lo.fit_center = !o.fixed_center;
  std::optional<LineshapeInit> init;
  if (o.gamma_init || o.sigma_init) {
    const auto est = estimate_lineshape_init(lineshape_slices(spec, anchor, lo));
    init = LineshapeInit{o.gamma_init.value_or(est.gamma_ghz), o.sigma_init.value_or(est.sigma_mev)};
  }
  const auto r = fit_lineshape_pair(spec, anchor, init, lo);

  auto prov = detail::provenance_for("fit-slices", c.in, text);
  prov["anchor_meV"] = io::format_double(anchor);
  detail::write_fit(c, "lineshape_pair", r, {{"gamma", "GHz"}, {"sigma", "meV"}, {"amplitude", "1"}, {"center", "meV"}},
                    prov);

  const LineshapeModel model(spec, anchor, lo, 1.0);
  const auto fitted = model.model_slices(r.value("gamma"), r.value("sigma"), r.value("center"));
  const auto& data = model.data_slices();
  const auto table = [&](const SliceProfile& d, const SliceProfile& m, const std::string& xname) {
    io::TableFile t{{xname, "data", "model"}, {}};
    for (std::size_t i = 0; i < d.abscissa.size(); ++i)
      t.rows.push_back({d.abscissa[i], d.ordinate[i], r.value("amplitude") * m.ordinate[i]});
    return t;
  };
  io::write_table(detail::sibling(c.out, ".diagonal.csv"), table(data.diagonal, fitted.diagonal, "energy_meV"));
  io::write_table(detail::sibling(c.out, ".cross.csv"), table(data.cross, fitted.cross, "offset_meV"));
  return detail::report_fit(r, c, out, err);
}

inline int cmd_fit_temperature(const CommonOptions& c, const ThermalFitOptions& o, std::ostream& out,
                               std::ostream& err) {
  detail::require_out(c);
  std::string text;
  const auto pts = detail::read_points(c, text);
  std::optional<ThermalDephasingParams> init;
  if (o.gamma0_init || o.gamma_star_init || o.e_ph_init) {
    const auto est = default_thermal_init(pts);
    init = ThermalDephasingParams{o.gamma0_init.value_or(est.gamma0), o.gamma_star_init.value_or(est.gamma_star),
                                  o.e_ph_init.value_or(est.e_ph)};
  }
  const auto r = fit_thermal_series(pts, init);
  detail::write_fit(c, "thermal", r, {{"gamma0", "GHz"}, {"gamma_star", "GHz"}, {"e_ph", "meV"}},
                    detail::provenance_for("fit-temperature", c.in, text));
  const ThermalDephasingParams fitted{r.value("gamma0"), r.value("gamma_star"), r.value("e_ph")};
  io::TableFile t{{"temperature_K", "data", "model"}, {}};
  for (const auto& p : pts) t.rows.push_back({p.x, p.y, thermal_dephasing_rate(fitted, p.x)});
  io::write_table(detail::sibling(c.out, ".table.csv"), t);
  return detail::report_fit(r, c, out, err);
}

inline int cmd_fit_diffusion(const CommonOptions& c, std::ostream& out, std::ostream& err) {
  detail::require_out(c);
  std::string text;
  const auto pts = detail::read_points(c, text);
  const auto r = fit_diffusion_series(pts);
  detail::write_fit(c, "diffusion", r, {{"intercept", "GHz"}, {"rate", "MHz/ps"}},
                    detail::provenance_for("fit-diffusion", c.in, text));
  io::TableFile t{{"waiting_ps", "data", "model"}, {}};
  for (const auto& p : pts) t.rows.push_back({p.x, p.y, r.value("intercept") + r.value("rate") * 1e-3 * p.x});
  io::write_table(detail::sibling(c.out, ".table.csv"), t);
  return detail::report_fit(r, c, out, err);
}

inline int cmd_fit_bimodal(const CommonOptions& c, const BimodalFitOptions& o, std::ostream& out, std::ostream& err) {
  detail::require_out(c);
  const auto text = io::read_text(c.in);
  SliceProfile slice;
  if (text.rfind("# mdcs-spectrum", 0) == 0) {
    const auto spec = io::parse_spectrum(text, c.in);
    double lo = std::max(-spec.omega_tau.back(), spec.omega_t.front());
    double hi = std::min(-spec.omega_tau.front(), spec.omega_t.back());
    if (o.range.size() == 2) {
      lo = o.range[0];
      hi = o.range[1];
    } else if (!o.range.empty()) {
      throw DomainError("--range takes two values");
    }
    slice = diagonal_slice(spec, lo, hi);
  } else {
    const auto s = io::parse_series(text, c.in);
    for (const auto& p : s.points) {
      slice.abscissa.push_back(p.x);
      slice.ordinate.push_back(p.y);
    }
  }
  BimodalOptions bo;
  bo.fix_equal_weights = o.equal_weights;
  const auto r = fit_bimodal_diagonal(slice, o.sigma1, o.sigma2, bo);
  detail::write_fit(c, "bimodal", r,
                    {{"omega1", "meV"}, {"omega2", "meV"}, {"w1", "1"}, {"w2", "1"}, {"width1", "meV"}, {"width2", "meV"}},
                    detail::provenance_for("fit-bimodal", c.in, text));
  io::TableFile t{{"energy_meV", "data", "model"}, {}};
  for (std::size_t i = 0; i < slice.abscissa.size(); ++i)
    t.rows.push_back({slice.abscissa[i], slice.ordinate[i], bimodal_value(r, slice.abscissa[i])});
  io::write_table(detail::sibling(c.out, ".table.csv"), t);
  const double split = r.value("omega2") - r.value("omega1");
  out << "splitting = " << io::format_double(split) << " meV\n";
  return detail::report_fit(r, c, out, err);
}

inline int cmd_fit_echo(const CommonOptions& c, std::ostream& out, std::ostream& err) {
  detail::require_out(c);
  std::string text;
  const auto pts = detail::read_points(c, text);
  std::vector<TracePoint> trace;
  for (const auto& p : pts) trace.push_back({p.x, p.y});
  const auto r = fit_echo_segments(trace);
  detail::write_fit(c, "echo_segments", r, {{"t2_early", "ps"}, {"t2_late", "ps"}, {"crossover", "ps"}},
                    detail::provenance_for("fit-echo", c.in, text));
  // Amplitude for the model column: the early-segment line through the first point.
  const double t2e = r.value("t2_early"), t2l = r.value("t2_late"), xc = r.value("crossover");
  io::TableFile t{{"tau_ps", "data", "model"}, {}};
  if (t2e > 0.0 && t2l > 0.0) {
    double log_amp = 0.0;
    std::size_t n = 0;
    for (const auto& p : trace)
      if (p.tau_ps < xc) {
        log_amp += std::log(p.field) + 2.0 * p.tau_ps / t2e;
        ++n;
      }
    const double amp = n ? std::exp(log_amp / static_cast<double>(n)) : trace.front().field;
    for (const auto& p : trace) t.rows.push_back({p.tau_ps, p.field, echo_segments_value(amp, t2e, t2l, xc, p.tau_ps)});
    io::write_table(detail::sibling(c.out, ".table.csv"), t);
  }
  return detail::report_fit(r, c, out, err);
}

inline int cmd_field(const CommonOptions& c, const FieldOptions& o, std::ostream& out, std::ostream&) {
  const StarkParams stark{o.chi_perp};
  if (o.splitting_mev.has_value() == o.field_mv_per_cm.has_value())
    throw DomainError("give exactly one of --splitting or --field");
  FitResult r;
  r.converged = true;
  r.names = {"splitting", "field", "chi_perp"};
  if (o.splitting_mev) {
    const double f = field_from_splitting(*o.splitting_mev, stark);
    r.params = {*o.splitting_mev, f, o.chi_perp};
    out << "field = " << io::format_double(f) << " MV/cm\n";
  } else {
    const double s = splitting_from_field(*o.field_mv_per_cm, stark);
    r.params = {s, *o.field_mv_per_cm, o.chi_perp};
    out << "splitting = " << io::format_double(s) << " meV\n";
  }
  r.sigma = {0.0, 0.0, 0.0};
  if (!c.out.empty()) {
    std::map<std::string, std::string> prov{{"tool", std::string("mdcs ") + mdcs::version}, {"command", "field"}};
    detail::write_fit(c, "field", r, {{"splitting", "meV"}, {"field", "MV/cm"}, {"chi_perp", "MHz/(V/cm)"}}, prov);
  }
  return exit_ok;
}

// ---------------------------------------------------------------------------

/// Parses `args` (without the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multidimensional coherent spectroscopy simulator and fitting toolkit", "mdcs"};
  app.set_config("--config", "", "INI/TOML file; options for a command go in a [command] section");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mdcs::version));

  CommonOptions common;
  std::uint64_t seed = 0;
  const auto add_common = [&](CLI::App* sub, bool needs_in) {
    sub->configurable();
    auto* in = sub->add_option("--in,-i", common.in, "Input file");
    if (needs_in) in->required()->check(CLI::ExistingFile);
    sub->add_option("--out,-o", common.out, "Output file");
    sub->add_option("--seed", seed, "Random seed for noise injection");
    sub->add_flag("--verbose,-v", common.verbose, "Progress messages on stderr");
  };

  SimulateOptions sim;
  auto* s_sim = app.add_subcommand("simulate", "Simulate a rephasing scan from a model file");
  add_common(s_sim, true);
  s_sim->add_option("--noise", sim.noise, "Complex Gaussian noise as a fraction of the peak magnitude");
  s_sim->add_option("--waiting", sim.waiting_ps, "Override the waiting time T (ps)");
  s_sim->add_option("--temperature", sim.temperature_k, "Override the sample temperature (K)");

  FwmOptions fwm;
  auto* s_fwm = app.add_subcommand("fwm", "Integrated FWM field versus tau from a model file");
  add_common(s_fwm, true);
  s_fwm->add_option("--tau-min", fwm.tau_min_ps, "Smallest tau (ps)");
  s_fwm->add_option("--tau-max", fwm.tau_max_ps, "Largest tau (ps)");
  s_fwm->add_option("--tau-step", fwm.tau_step_ps, "Tau spacing (ps)");
  s_fwm->add_option("--noise", fwm.noise, "Multiplicative Gaussian noise");
  s_fwm->add_option("--waiting", fwm.waiting_ps, "Override the waiting time T (ps)");

  SpectrumOptions spo;
  auto* s_spec = app.add_subcommand("spectrum", "One-quantum spectrum of a scan");
  add_common(s_spec, true);
  s_spec->add_option("--pad", spo.pad, "Zero-padding factor")->check(CLI::PositiveNumber);
  s_spec->add_option("--window", spo.window, "Apodisation window")->check(CLI::IsMember({"none", "cos2"}));

  SliceFitOptions sfo;
  auto* s_slices = app.add_subcommand("fit-slices", "Joint diagonal / cross-diagonal lineshape fit");
  add_common(s_slices, true);
  s_slices->add_option("--anchor", sfo.anchor_mev, "Slice position |w_tau| = |w_t| (meV); default: diagonal peak");
  s_slices->add_option("--gamma-init", sfo.gamma_init, "Initial gamma (GHz)");
  s_slices->add_option("--sigma-init", sfo.sigma_init, "Initial sigma (meV)");
  s_slices->add_option("--diag-range", sfo.diagonal_half_range, "Diagonal half range (meV)");
  s_slices->add_option("--cross-width", sfo.cross_half_width, "Cross-diagonal half width (meV)");
  s_slices->add_flag("--fixed-center", sfo.fixed_center, "Pin the distribution center to the anchor");

  ThermalFitOptions tfo;
  auto* s_temp = app.add_subcommand("fit-temperature", "Fit gamma(T) to the thermal dephasing model");
  add_common(s_temp, true);
  s_temp->add_option("--gamma0-init", tfo.gamma0_init, "Initial gamma0 (GHz)");
  s_temp->add_option("--gamma-star-init", tfo.gamma_star_init, "Initial gamma* (GHz)");
  s_temp->add_option("--eph-init", tfo.e_ph_init, "Initial phonon energy (meV)");

  auto* s_diff = app.add_subcommand("fit-diffusion", "Linear fit of gamma against waiting time");
  add_common(s_diff, true);

  BimodalFitOptions bfo;
  auto* s_bi = app.add_subcommand("fit-bimodal", "Two-Gaussian fit of a diagonal slice");
  add_common(s_bi, true);
  s_bi->add_option("--sigma1", bfo.sigma1, "Width of the first Gaussian (meV)");
  s_bi->add_option("--sigma2", bfo.sigma2, "Width of the second Gaussian (meV)");
  s_bi->add_option("--range", bfo.range, "Diagonal energy range lo hi (meV), spectrum input only")->expected(2);
  s_bi->add_flag("--equal-weights", bfo.equal_weights, "Tie the two weights together");

  auto* s_echo = app.add_subcommand("fit-echo", "Two-segment fit of an integrated FWM trace");
  add_common(s_echo, true);

  FieldOptions fo;
  auto* s_field = app.add_subcommand("field", "Convert Stark splitting to field or back");
  add_common(s_field, false);
  s_field->add_option("--splitting", fo.splitting_mev, "Total symmetric splitting (meV)");
  s_field->add_option("--field", fo.field_mv_per_cm, "Field (MV/cm)");
  s_field->add_option("--chi", fo.chi_perp, "Transverse susceptibility (MHz/(V/cm))");

  std::vector<std::string> argv_store{"mdcs"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForVersion&) {
    out << mdcs::version << '\n';
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_invalid;
  }
  for (auto* sub : app.get_subcommands())
    if (sub->count("--seed")) common.seed = seed;

  try {
    if (s_sim->parsed()) return cmd_simulate(common, sim, out, err);
    if (s_fwm->parsed()) return cmd_fwm(common, fwm, out, err);
    if (s_spec->parsed()) return cmd_spectrum(common, spo, out, err);
    if (s_slices->parsed()) return cmd_fit_slices(common, sfo, out, err);
    if (s_temp->parsed()) return cmd_fit_temperature(common, tfo, out, err);
    if (s_diff->parsed()) return cmd_fit_diffusion(common, out, err);
    if (s_bi->parsed()) return cmd_fit_bimodal(common, bfo, out, err);
    if (s_echo->parsed()) return cmd_fit_echo(common, out, err);
    if (s_field->parsed()) return cmd_field(common, fo, out, err);
  } catch (const io::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_invalid;
  } catch (const io::IoError& e) {
    err << "error: " << e.what() << '\n';
    return exit_invalid;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return exit_invalid;
  }
  return exit_invalid;
}

}  // namespace mdcs::cli
