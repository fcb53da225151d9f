#pragma once

// Plain-text file formats. Every file starts with a commented header block
//
//   # mdcs-<kind> v1
//   # key = value
//   ...
//
// followed by comma-separated numeric rows (scan, spectrum, series, table)
// or `key = value` lines (params, model). Numbers are written with 17
// significant digits through std::to_chars and read with std::from_chars,
// so round trips are exact and independent of the locale.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mdcs/fitting.hpp"
#include "mdcs/simulator.hpp"
#include "mdcs/spectra.hpp"
#include "mdcs/version.hpp"

namespace mdcs::io {

inline constexpr int format_version = 1;

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& msg)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Primitive helpers

inline std::string format_double(double v) {
  if (!std::isfinite(v)) throw DomainError("cannot serialise non-finite value");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> try_parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto p = s.find(sep, start);
    out.push_back(trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

/// 64-bit FNV-1a digest of a byte string, hex encoded.
inline std::string fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  static constexpr char digits[] = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[h & 0xf];
    h >>= 4;
  }
  buf[16] = '\0';
  return buf;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

/// Parsed form of a text file: header entries and the remaining body lines
/// with their 1-based line numbers.
struct Document {
  std::string source;
  std::string kind;
  std::map<std::string, std::string> header;
  std::vector<std::pair<std::size_t, std::string>> body;

  const std::string& require(const std::string& key) const {
    const auto it = header.find(key);
    if (it == header.end()) throw ParseError(source, 1, "missing header key '" + key + "'");
    return it->second;
  }
  double number(const std::string& key) const {
    const auto v = try_parse_double(require(key));
    if (!v) throw ParseError(source, 1, "header key '" + key + "' is not a finite number");
    return *v;
  }
  std::size_t count(const std::string& key) const {
    const double v = number(key);
    if (v < 0.0 || v != std::floor(v)) throw ParseError(source, 1, "header key '" + key + "' is not a count");
    return static_cast<std::size_t>(v);
  }
};

inline Document parse_document(std::string_view text, const std::string& source, std::string_view expected_kind) {
  Document doc;
  doc.source = source;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  bool first = true;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    line = trim(line);
    if (first) {
      const std::string magic = "# mdcs-" + std::string(expected_kind) + " v";
      if (line.substr(0, magic.size()) != magic)
        throw ParseError(source, lineno, "not an mdcs " + std::string(expected_kind) + " file");
      const auto ver = try_parse_double(line.substr(magic.size()));
      if (!ver || *ver != format_version)
        throw ParseError(source, lineno, "unsupported format version '" + std::string(line.substr(magic.size())) + "'");
      doc.kind = expected_kind;
      first = false;
      continue;
    }
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string_view::npos)
        doc.header[std::string(trim(body.substr(0, eq)))] = std::string(trim(body.substr(eq + 1)));
      continue;
    }
    doc.body.emplace_back(lineno, std::string(line));
  }
  if (first) throw ParseError(source, 1, "empty file");
  return doc;
}

inline std::vector<double> parse_row(const Document& doc, std::size_t lineno, std::string_view line,
                                     std::size_t min_cols, std::size_t max_cols) {
  const auto fields = split(line, ',');
  if (fields.size() < min_cols || fields.size() > max_cols)
    throw ParseError(doc.source, lineno,
                     "expected " + std::to_string(min_cols) +
                         (min_cols == max_cols ? "" : "-" + std::to_string(max_cols)) + " columns, got " +
                         std::to_string(fields.size()));
  std::vector<double> out;
  for (const auto f : fields) {
    const auto v = try_parse_double(f);
    if (!v) throw ParseError(doc.source, lineno, "malformed number '" + std::string(f) + "'");
    out.push_back(*v);
  }
  return out;
}

namespace detail {

inline void write_header(std::ostringstream& os, std::string_view kind) {
  os << "# mdcs-" << kind << " v" << format_version << "\n";
}

inline void write_kv(std::ostringstream& os, std::string_view key, double v) {
  os << "# " << key << " = " << format_double(v) << "\n";
}

inline void write_kv(std::ostringstream& os, std::string_view key, std::string_view v) {
  os << "# " << key << " = " << v << "\n";
}

inline void write_provenance(std::ostringstream& os, const std::map<std::string, std::string>& prov) {
  for (const auto& [k, v] : prov) write_kv(os, "provenance." + k, v);
}

inline std::map<std::string, std::string> read_provenance(const Document& doc) {
  std::map<std::string, std::string> prov;
  const std::string prefix = "provenance.";
  for (const auto& [k, v] : doc.header)
    if (k.rfind(prefix, 0) == 0) prov[k.substr(prefix.size())] = v;
  return prov;
}

inline void write_grid(std::ostringstream& os, const ScanGrid& g, std::string_view prefix) {
  const std::string p(prefix);
  write_kv(os, p + "waiting_ps", g.waiting_ps);
  write_kv(os, p + "tau0_ps", g.tau0_ps);
  write_kv(os, p + "tau_step_ps", g.tau_step_ps);
  write_kv(os, p + "n_tau", static_cast<double>(g.n_tau));
  write_kv(os, p + "t0_ps", g.t0_ps);
  write_kv(os, p + "t_step_ps", g.t_step_ps);
  write_kv(os, p + "n_t", static_cast<double>(g.n_t));
}

inline ScanGrid read_grid(const Document& doc, std::string_view prefix) {
  const std::string p(prefix);
  ScanGrid g;
  g.waiting_ps = doc.number(p + "waiting_ps");
  g.tau0_ps = doc.number(p + "tau0_ps");
  g.tau_step_ps = doc.number(p + "tau_step_ps");
  g.n_tau = doc.count(p + "n_tau");
  g.t0_ps = doc.number(p + "t0_ps");
  g.t_step_ps = doc.number(p + "t_step_ps");
  g.n_t = doc.count(p + "n_t");
  try {
    validate(g);
  } catch (const DomainError& e) {
    throw ParseError(doc.source, 1, e.what());
  }
  return g;
}

inline bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({std::abs(a), std::abs(b), 1.0}); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Scan files

inline std::string format_scan(const TimeDomainScan& scan) {
  std::ostringstream os;
  detail::write_header(os, "scan");
  detail::write_kv(os, "carrier_meV", scan.carrier_mev);
  detail::write_grid(os, scan.grid, "");
  detail::write_provenance(os, scan.provenance);
  os << "# columns: tau_ps,t_ps,real,imag\n";
  const auto& g = scan.grid;
  for (std::size_t i = 0; i < g.n_tau; ++i)
    for (std::size_t j = 0; j < g.n_t; ++j) {
      const auto& v = scan.values[i * g.n_t + j];
      os << format_double(g.tau(i)) << ',' << format_double(g.t(j)) << ',' << format_double(v.real()) << ','
         << format_double(v.imag()) << '\n';
    }
  return os.str();
}

inline TimeDomainScan parse_scan(std::string_view text, const std::string& source = "<scan>") {
  const auto doc = parse_document(text, source, "scan");
  TimeDomainScan scan;
  scan.carrier_mev = doc.number("carrier_meV");
  scan.grid = detail::read_grid(doc, "");
  scan.provenance = detail::read_provenance(doc);
  const auto& g = scan.grid;
  if (doc.body.size() != g.size())
    throw ParseError(source, doc.body.empty() ? 1 : doc.body.back().first,
                     "expected " + std::to_string(g.size()) + " records, found " + std::to_string(doc.body.size()));
  scan.values.resize(g.size());
  for (std::size_t k = 0; k < doc.body.size(); ++k) {
    const auto& [ln, line] = doc.body[k];
    const auto row = parse_row(doc, ln, line, 4, 4);
    const std::size_t i = k / g.n_t, j = k % g.n_t;
    if (!detail::close(row[0], g.tau(i)) || !detail::close(row[1], g.t(j)))
      throw ParseError(source, ln, "record delays do not match the uniform grid in the header");
    scan.values[k] = {row[2], row[3]};
  }
  return scan;
}

inline void write_scan(const std::string& path, const TimeDomainScan& scan) { write_text(path, format_scan(scan)); }
inline TimeDomainScan read_scan(const std::string& path) { return parse_scan(read_text(path), path); }

// ---------------------------------------------------------------------------
// Spectrum files

inline std::string format_spectrum(const Spectrum2D& spec) {
  std::ostringstream os;
  detail::write_header(os, "spectrum");
  detail::write_kv(os, "carrier_meV", spec.source.carrier_mev);
  detail::write_kv(os, "zero_pad", static_cast<double>(spec.source.zero_pad));
  detail::write_kv(os, "window", to_string(spec.source.window));
  detail::write_grid(os, spec.source.grid, "source.");
  detail::write_kv(os, "n_omega_tau", static_cast<double>(spec.rows()));
  detail::write_kv(os, "n_omega_t", static_cast<double>(spec.cols()));
  os << "# columns: omega_tau_meV,omega_t_meV,real,imag\n";
  for (std::size_t i = 0; i < spec.rows(); ++i)
    for (std::size_t j = 0; j < spec.cols(); ++j) {
      const auto& v = spec.at(i, j);
      os << format_double(spec.omega_tau[i]) << ',' << format_double(spec.omega_t[j]) << ','
         << format_double(v.real()) << ',' << format_double(v.imag()) << '\n';
    }
  return os.str();
}

inline Spectrum2D parse_spectrum(std::string_view text, const std::string& source = "<spectrum>") {
  const auto doc = parse_document(text, source, "spectrum");
  Spectrum2D spec;
  spec.source.carrier_mev = doc.number("carrier_meV");
  spec.source.zero_pad = doc.count("zero_pad");
  try {
    spec.source.window = window_from_string(doc.require("window"));
  } catch (const DomainError& e) {
    throw ParseError(source, 1, e.what());
  }
  spec.source.grid = detail::read_grid(doc, "source.");
  const std::size_t nr = doc.count("n_omega_tau"), nc = doc.count("n_omega_t");
  if (nr < 2 || nc < 2) throw ParseError(source, 1, "spectrum axes need at least 2 samples");
  if (doc.body.size() != nr * nc)
    throw ParseError(source, doc.body.empty() ? 1 : doc.body.back().first,
                     "expected " + std::to_string(nr * nc) + " records, found " + std::to_string(doc.body.size()));
  spec.omega_tau.resize(nr);
  spec.omega_t.resize(nc);
  spec.values.resize(nr * nc);
  for (std::size_t k = 0; k < doc.body.size(); ++k) {
    const auto& [ln, line] = doc.body[k];
    const auto row = parse_row(doc, ln, line, 4, 4);
    const std::size_t i = k / nc, j = k % nc;
    if (j == 0) spec.omega_tau[i] = row[0];
    if (i == 0) spec.omega_t[j] = row[1];
    if (row[0] != spec.omega_tau[i] || row[1] != spec.omega_t[j])
      throw ParseError(source, ln, "record axes are inconsistent with the row-major layout");
    if (i > 0 && j == 0 && !(spec.omega_tau[i] > spec.omega_tau[i - 1]))
      throw ParseError(source, ln, "omega_tau axis is not strictly increasing");
    if (i == 0 && j > 0 && !(spec.omega_t[j] > spec.omega_t[j - 1]))
      throw ParseError(source, ln, "omega_t axis is not strictly increasing");
    spec.values[k] = {row[2], row[3]};
  }
  return spec;
}

inline void write_spectrum(const std::string& path, const Spectrum2D& s) { write_text(path, format_spectrum(s)); }
inline Spectrum2D read_spectrum(const std::string& path) { return parse_spectrum(read_text(path), path); }

// ---------------------------------------------------------------------------
// Series files: x, y and an optional y_err column.

struct SeriesFile {
  std::string x_unit;
  std::string y_unit;
  std::vector<SeriesPoint> points;
  std::map<std::string, std::string> provenance;

  bool operator==(const SeriesFile&) const = default;
};

inline std::string format_series(const SeriesFile& s) {
  std::ostringstream os;
  detail::write_header(os, "series");
  detail::write_kv(os, "x_unit", s.x_unit);
  detail::write_kv(os, "y_unit", s.y_unit);
  detail::write_provenance(os, s.provenance);
  const bool errs = mdcs::detail::all_have_errors(s.points) && !s.points.empty();
  os << (errs ? "# columns: x,y,y_err\n" : "# columns: x,y\n");
  for (const auto& p : s.points) {
    os << format_double(p.x) << ',' << format_double(p.y);
    if (p.y_err) os << ',' << format_double(*p.y_err);
    os << '\n';
  }
  return os.str();
}

inline SeriesFile parse_series(std::string_view text, const std::string& source = "<series>") {
  const auto doc = parse_document(text, source, "series");
  SeriesFile s;
  if (auto it = doc.header.find("x_unit"); it != doc.header.end()) s.x_unit = it->second;
  if (auto it = doc.header.find("y_unit"); it != doc.header.end()) s.y_unit = it->second;
  s.provenance = detail::read_provenance(doc);
  for (const auto& [ln, line] : doc.body) {
    const auto row = parse_row(doc, ln, line, 2, 3);
    SeriesPoint p{row[0], row[1], std::nullopt};
    if (row.size() == 3) {
      if (!(row[2] > 0.0)) throw ParseError(source, ln, "y_err must be > 0");
      p.y_err = row[2];
    }
    s.points.push_back(p);
  }
  return s;
}

inline void write_series(const std::string& path, const SeriesFile& s) { write_text(path, format_series(s)); }
inline SeriesFile read_series(const std::string& path) { return parse_series(read_text(path), path); }

// ---------------------------------------------------------------------------
// Plot tables: abscissa, data and fitted model columns.

struct TableFile {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

inline std::string format_table(const TableFile& t) {
  std::ostringstream os;
  detail::write_header(os, "table");
  os << "# columns: ";
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_double(r[i]);
    os << '\n';
  }
  return os.str();
}

inline TableFile parse_table(std::string_view text, const std::string& source = "<table>") {
  const auto doc = parse_document(text, source, "table");
  TableFile t;
  // "# columns: a,b,c" has no '=', so it is not in the header map.
  const auto pos = text.find("# columns:");
  if (pos == std::string_view::npos) throw ParseError(source, 1, "missing columns line");
  const auto end = text.find('\n', pos);
  for (auto c : split(text.substr(pos + 10, end - pos - 10), ',')) t.columns.emplace_back(c);
  for (const auto& [ln, line] : doc.body) t.rows.push_back(parse_row(doc, ln, line, t.columns.size(), t.columns.size()));
  return t;
}

inline void write_table(const std::string& path, const TableFile& t) { write_text(path, format_table(t)); }

// ---------------------------------------------------------------------------
// Parameter files: flat key = value layout.

struct ParamsFile {
  std::string fit;  // which fit produced the values
  FitResult result;
  std::map<std::string, std::string> units;  // per parameter name
  std::map<std::string, std::string> provenance;

  bool operator==(const ParamsFile&) const = default;
};

inline std::string format_params(const ParamsFile& p) {
  std::ostringstream os;
  detail::write_header(os, "params");
  detail::write_provenance(os, p.provenance);
  const auto& r = p.result;
  os << "fit = " << p.fit << '\n';
  os << "converged = " << (r.converged ? "true" : "false") << '\n';
  os << "degenerate = " << (r.degenerate ? "true" : "false") << '\n';
  os << "iterations = " << r.iterations << '\n';
  os << "residual_norm = " << format_double(r.residual_norm) << '\n';
  os << "gradient_norm = " << format_double(r.gradient_norm) << '\n';
  for (const auto& n : r.notes) os << "note = " << n << '\n';
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    const auto& name = r.names[i];
    os << "param." << name << " = " << format_double(r.params[i]) << '\n';
    os << "param." << name << ".sigma = " << format_double(r.sigma[i]) << '\n';
    const auto u = p.units.find(name);
    os << "param." << name << ".unit = " << (u == p.units.end() ? "1" : u->second) << '\n';
  }
  return os.str();
}

inline ParamsFile parse_params(std::string_view text, const std::string& source = "<params>") {
  const auto doc = parse_document(text, source, "params");
  ParamsFile p;
  p.provenance = detail::read_provenance(doc);
  const auto number = [&](std::size_t ln, const std::string& v) {
    const auto d = try_parse_double(v);
    if (!d) throw ParseError(source, ln, "malformed number '" + v + "'");
    return *d;
  };
  const auto boolean = [&](std::size_t ln, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ParseError(source, ln, "expected true or false, got '" + v + "'");
  };
  for (const auto& [ln, line] : doc.body) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, ln, "expected 'key = value'");
    const std::string key(trim(std::string_view(line).substr(0, eq)));
    const std::string val(trim(std::string_view(line).substr(eq + 1)));
    auto& r = p.result;
    if (key == "fit") {
      p.fit = val;
    } else if (key == "converged") {
      r.converged = boolean(ln, val);
    } else if (key == "degenerate") {
      r.degenerate = boolean(ln, val);
    } else if (key == "iterations") {
      r.iterations = static_cast<int>(number(ln, val));
    } else if (key == "residual_norm") {
      r.residual_norm = number(ln, val);
    } else if (key == "gradient_norm") {
      r.gradient_norm = number(ln, val);
    } else if (key == "note") {
      r.notes.push_back(val);
    } else if (key.rfind("param.", 0) == 0) {
      std::string name = key.substr(6);
      std::string field;
      if (const auto dot = name.find('.'); dot != std::string::npos) {
        field = name.substr(dot + 1);
        name = name.substr(0, dot);
      }
      std::size_t idx = 0;
      for (; idx < r.names.size() && r.names[idx] != name; ++idx) {
      }
      if (idx == r.names.size()) {
        if (!field.empty()) throw ParseError(source, ln, "attribute before value for parameter '" + name + "'");
        r.names.push_back(name);
        r.params.push_back(0.0);
        r.sigma.push_back(0.0);
      }
      if (field.empty()) {
        r.params[idx] = number(ln, val);
      } else if (field == "sigma") {
        const double s = number(ln, val);
        if (s < 0.0) throw ParseError(source, ln, "negative uncertainty");
        r.sigma[idx] = s;
      } else if (field == "unit") {
        p.units[name] = val;
      } else {
        throw ParseError(source, ln, "unknown parameter attribute '" + field + "'");
      }
    } else {
      throw ParseError(source, ln, "unknown key '" + key + "'");
    }
  }
  return p;
}

inline void write_params(const std::string& path, const ParamsFile& p) { write_text(path, format_params(p)); }
inline ParamsFile read_params(const std::string& path) { return parse_params(read_text(path), path); }

// ---------------------------------------------------------------------------
// Model description files (simulation input).

struct ModelFile {
  EnsembleModel model;
  ScanGrid grid;
};

inline std::string format_model(const ModelFile& f) {
  std::ostringstream os;
  detail::write_header(os, "model");
  const auto& m = f.model;
  for (const auto& c : m.components)
    os << "component = " << format_double(c.center_mev) << ", " << format_double(c.sigma_mev) << ", "
       << format_double(c.weight) << '\n';
  if (m.carrier_mev) os << "carrier_meV = " << format_double(*m.carrier_mev) << '\n';
  os << "gamma_GHz = " << format_double(m.gamma_ghz) << '\n';
  if (m.thermal) {
    const auto& t = *m.thermal;
    os << "thermal = " << format_double(t.params.gamma0) << ", " << format_double(t.params.gamma_star) << ", "
       << format_double(t.params.e_ph) << '\n';
    os << "temperature_K = " << format_double(t.temperature_k) << '\n';
  }
  os << "diffusion_MHz_per_ps = " << format_double(m.diffusion.rate) << '\n';
  os << "pop_decay_GHz = " << format_double(m.pop_decay_ghz) << '\n';
  if (m.echo_segments) {
    const auto& e = *m.echo_segments;
    os << "echo_segments = " << format_double(e.t2_early_ps) << ", " << format_double(e.t2_late_ps) << ", "
       << format_double(e.crossover_ps) << '\n';
  }
  const auto& g = f.grid;
  os << "waiting_ps = " << format_double(g.waiting_ps) << '\n';
  os << "tau0_ps = " << format_double(g.tau0_ps) << '\n';
  os << "tau_step_ps = " << format_double(g.tau_step_ps) << '\n';
  os << "n_tau = " << g.n_tau << '\n';
  os << "t0_ps = " << format_double(g.t0_ps) << '\n';
  os << "t_step_ps = " << format_double(g.t_step_ps) << '\n';
  os << "n_t = " << g.n_t << '\n';
  return os.str();
}

/// Parses a model description. Grid keys are optional and default to the
/// 256 x 256, 50 fs grid at T = 200 fs.
inline ModelFile parse_model(std::string_view text, const std::string& source = "<model>") {
  const auto doc = parse_document(text, source, "model");
  ModelFile f;
  auto& m = f.model;
  std::optional<ThermalDephasingParams> thermal;
  std::optional<double> temperature;
  std::size_t last_line = 1;
  const auto numbers = [&](std::size_t ln, const std::string& v, std::size_t n) {
    const auto parts = split(v, ',');
    if (parts.size() != n) throw ParseError(source, ln, "expected " + std::to_string(n) + " comma-separated values");
    std::vector<double> out;
    for (auto p : parts) {
      const auto d = try_parse_double(p);
      if (!d) throw ParseError(source, ln, "malformed number '" + std::string(p) + "'");
      out.push_back(*d);
    }
    return out;
  };
  const auto count = [&](std::size_t ln, const std::string& v) {
    const double d = numbers(ln, v, 1)[0];
    if (d < 0.0 || d != std::floor(d)) throw ParseError(source, ln, "expected a count");
    return static_cast<std::size_t>(d);
  };
  for (const auto& [ln, line] : doc.body) {
    last_line = ln;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, ln, "expected 'key = value'");
    const std::string key(trim(std::string_view(line).substr(0, eq)));
    const std::string val(trim(std::string_view(line).substr(eq + 1)));
    if (key == "component") {
      const auto v = numbers(ln, val, 3);
      m.components.push_back({v[0], v[1], v[2]});
    } else if (key == "carrier_meV") {
      m.carrier_mev = numbers(ln, val, 1)[0];
    } else if (key == "gamma_GHz") {
      m.gamma_ghz = numbers(ln, val, 1)[0];
    } else if (key == "thermal") {
      const auto v = numbers(ln, val, 3);
      thermal = ThermalDephasingParams{v[0], v[1], v[2]};
    } else if (key == "temperature_K") {
      temperature = numbers(ln, val, 1)[0];
    } else if (key == "diffusion_MHz_per_ps") {
      m.diffusion.rate = numbers(ln, val, 1)[0];
    } else if (key == "pop_decay_GHz") {
      m.pop_decay_ghz = numbers(ln, val, 1)[0];
    } else if (key == "echo_segments") {
      const auto v = numbers(ln, val, 3);
      m.echo_segments = EchoSegments{v[0], v[1], v[2]};
    } else if (key == "waiting_ps") {
      f.grid.waiting_ps = numbers(ln, val, 1)[0];
    } else if (key == "tau0_ps") {
      f.grid.tau0_ps = numbers(ln, val, 1)[0];
    } else if (key == "tau_step_ps") {
      f.grid.tau_step_ps = numbers(ln, val, 1)[0];
    } else if (key == "n_tau") {
      f.grid.n_tau = count(ln, val);
    } else if (key == "t0_ps") {
      f.grid.t0_ps = numbers(ln, val, 1)[0];
    } else if (key == "t_step_ps") {
      f.grid.t_step_ps = numbers(ln, val, 1)[0];
    } else if (key == "n_t") {
      f.grid.n_t = count(ln, val);
    } else {
      throw ParseError(source, ln, "unknown key '" + key + "'");
    }
  }
  if (thermal.has_value() != temperature.has_value())
    throw ParseError(source, last_line, "'thermal' and 'temperature_K' must be given together");
  if (thermal) m.thermal = ThermalGamma{*thermal, *temperature};
  try {
    validate(m);
    validate(f.grid);
  } catch (const DomainError& e) {
    throw ParseError(source, last_line, e.what());
  }
  return f;
}

inline ModelFile read_model(const std::string& path) { return parse_model(read_text(path), path); }
inline void write_model(const std::string& path, const ModelFile& f) { write_text(path, format_model(f)); }

}  // namespace mdcs::io
