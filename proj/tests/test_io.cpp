#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "mdcs/io.hpp"

using namespace mdcs;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const auto d = fs::temp_directory_path() / "mdcs_io_test";
  fs::create_directories(d);
  return d;
}

std::size_t parse_error_line(const std::function<void()>& f) {
  try {
    f();
  } catch (const io::ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(Primitives, DoubleRoundTripIsExact) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(u(rng) * 300));
    const auto s = io::format_double(v);
    const auto back = io::try_parse_double(s);
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, v) << s;
  }
  EXPECT_THROW(io::format_double(std::numeric_limits<double>::infinity()), DomainError);
  EXPECT_THROW(io::format_double(std::nan("")), DomainError);
  EXPECT_FALSE(io::try_parse_double("abc"));
  EXPECT_FALSE(io::try_parse_double("1.0x"));
  EXPECT_FALSE(io::try_parse_double("nan"));
  EXPECT_FALSE(io::try_parse_double("inf"));
  EXPECT_FALSE(io::try_parse_double(""));
  EXPECT_EQ(*io::try_parse_double(" 2.5 "), 2.5);
}

TEST(Primitives, HashIsStable) {
  // FNV-1a 64 reference values.
  EXPECT_EQ(io::fnv1a64(""), "cbf29ce484222325");
  EXPECT_EQ(io::fnv1a64("a"), "af63dc4c8601ec8c");
}

TEST(ScanFile, FullGridRoundTripBitIdentical) {
  EnsembleModel m;
  m.components = {{1944.0, 2.6, 1.0}, {1949.0, 2.3, 0.7}};
  m.gamma_ghz = 37.31;
  auto scan = simulate_scan(m, ScanGrid{});
  scan.provenance["model"] = "two components";
  const auto text = io::format_scan(scan);
  const auto back = io::parse_scan(text);
  EXPECT_EQ(back.grid, scan.grid);
  EXPECT_EQ(back.carrier_mev, scan.carrier_mev);
  EXPECT_EQ(back.values, scan.values);
  EXPECT_EQ(back.provenance, scan.provenance);
  EXPECT_EQ(io::format_scan(back), text);

  const auto path = (temp_dir() / "scan.csv").string();
  io::write_scan(path, scan);
  EXPECT_EQ(io::read_scan(path).values, scan.values);
}

TEST(ScanFile, RejectsInconsistentRecords) {
  EnsembleModel m;
  m.components = {{1945.0, 1.0, 1.0}};
  const auto text = io::format_scan(simulate_scan(m, ScanGrid{0, 0.1, 8, 0, 0.1, 8, 0.2}));
  // Drop the last record.
  const auto cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  EXPECT_THROW(io::parse_scan(cut), io::ParseError);
  // Perturb one delay so the grid is no longer uniform.
  auto bent = text;
  const auto pos = bent.find("\n0.10000000000000001,");
  ASSERT_NE(pos, std::string::npos);
  bent.replace(pos + 1, 19, "0.13");
  EXPECT_THROW(io::parse_scan(bent), io::ParseError);
}

TEST(SpectrumFile, RoundTrip) {
  EnsembleModel m;
  m.components = {{1945.0, 1.2, 1.0}};
  m.gamma_ghz = 50.0;
  const auto spec = one_quantum_spectrum(simulate_scan(m, ScanGrid{0, 0.05, 32, 0, 0.05, 16, 0.2}), 2, Window::cos2);
  const auto back = io::parse_spectrum(io::format_spectrum(spec));
  EXPECT_EQ(back.omega_tau, spec.omega_tau);
  EXPECT_EQ(back.omega_t, spec.omega_t);
  EXPECT_EQ(back.values, spec.values);
  EXPECT_EQ(back.source.grid, spec.source.grid);
  EXPECT_EQ(back.source.zero_pad, 2u);
  EXPECT_EQ(back.source.window, Window::cos2);
  EXPECT_EQ(back.source.carrier_mev, spec.source.carrier_mev);
}

TEST(SeriesFile, RoundTripWithAndWithoutErrors) {
  io::SeriesFile s{"K", "GHz", {{6, 37.31, 0.5}, {120, 330.9, 3.0}}, {{"origin", "test"}}};
  EXPECT_EQ(io::parse_series(io::format_series(s)), s);
  s.points = {{6, 37.31, std::nullopt}, {120, 330.9, std::nullopt}};
  const auto text = io::format_series(s);
  EXPECT_NE(text.find("# columns: x,y\n"), std::string::npos);
  const auto back = io::parse_series(text);
  EXPECT_EQ(back, s);
  EXPECT_FALSE(back.points[0].y_err.has_value());
}

TEST(SeriesFile, MalformedRowReportsLine) {
  const std::string text = "# mdcs-series v1\n# x_unit = K\n6, 37.31\nabc, 1.0\n";
  EXPECT_EQ(parse_error_line([&] { io::parse_series(text, "bad.csv"); }), 4u);
  try {
    io::parse_series(text, "bad.csv");
  } catch (const io::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.csv:4"), std::string::npos);
  }
  EXPECT_EQ(parse_error_line([] { io::parse_series("# mdcs-series v1\n1,2\n1,2,3,4\n"); }), 3u);
  EXPECT_EQ(parse_error_line([] { io::parse_series("# mdcs-series v1\n1,2,-1\n"); }), 2u);
  EXPECT_EQ(parse_error_line([] { io::parse_series("# mdcs-series v1\n1,nan\n"); }), 2u);
  EXPECT_EQ(parse_error_line([] { io::parse_series("# mdcs-series v1\n1,inf\n"); }), 2u);
}

TEST(Documents, VersionAndKindChecked) {
  EXPECT_THROW(io::parse_series("# mdcs-series v2\n1,2\n"), io::ParseError);
  EXPECT_THROW(io::parse_series("# mdcs-params v1\n"), io::ParseError);
  EXPECT_THROW(io::parse_series("1,2\n"), io::ParseError);
  EXPECT_THROW(io::parse_series(""), io::ParseError);
}

TEST(TableFile, RoundTrip) {
  io::TableFile t{{"x", "data", "model"}, {{1, 2, 3}, {4, 5, 6.5}}};
  const auto back = io::parse_table(io::format_table(t));
  EXPECT_EQ(back.columns, t.columns);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_THROW(io::parse_table("# mdcs-table v1\n# columns: a,b\n1,2,3\n"), io::ParseError);
}

TEST(ParamsFile, RoundTrip) {
  io::ParamsFile p;
  p.fit = "thermal";
  p.result.names = {"gamma0", "gamma_star", "e_ph"};
  p.result.params = {37.31, 7890.0, 34.41};
  p.result.sigma = {0.1, 1.0 / 3.0, 0.0};
  p.result.converged = true;
  p.result.iterations = 17;
  p.result.residual_norm = 1.25e-7;
  p.result.gradient_norm = 3e-9;
  p.result.notes = {"weighted by 1/y_err^2"};
  p.units = {{"gamma0", "GHz"}, {"gamma_star", "GHz"}, {"e_ph", "meV"}};
  p.provenance = {{"input", "series.csv"}, {"version", "0.1.0"}};
  const auto back = io::parse_params(io::format_params(p));
  EXPECT_EQ(back, p);
}

TEST(ParamsFile, Errors) {
  EXPECT_EQ(parse_error_line([] { io::parse_params("# mdcs-params v1\nfit = x\nparam.a = zz\n"); }), 3u);
  EXPECT_EQ(parse_error_line([] { io::parse_params("# mdcs-params v1\nconverged = maybe\n"); }), 2u);
  EXPECT_EQ(parse_error_line([] { io::parse_params("# mdcs-params v1\nparam.a.sigma = 1\n"); }), 2u);
  EXPECT_EQ(parse_error_line([] { io::parse_params("# mdcs-params v1\nbogus = 1\n"); }), 2u);
  EXPECT_EQ(parse_error_line([] { io::parse_params("# mdcs-params v1\nparam.a = 1\nparam.a.sigma = -1\n"); }), 3u);
}

TEST(ModelFile, RoundTrip) {
  io::ModelFile f;
  f.model.components = {{1944.0, 2.6, 1.0}, {1949.0, 2.3, 0.5}};
  f.model.gamma_ghz = 12.5;
  f.model.thermal = ThermalGamma{{37.31, 7890.0, 34.41}, 120.0};
  f.model.diffusion.rate = 1.98;
  f.model.pop_decay_ghz = 0.3;
  f.model.echo_segments = EchoSegments{26.8, 14.4, 10.0};
  f.model.carrier_mev = 1946.5;
  f.grid = ScanGrid{0.1, 0.04, 128, 0.2, 0.06, 96, 1.5};
  const auto back = io::parse_model(io::format_model(f));
  ASSERT_EQ(back.model.components.size(), 2u);
  EXPECT_EQ(back.model.components[1].sigma_mev, 2.3);
  EXPECT_EQ(back.model.components[1].weight, 0.5);
  EXPECT_EQ(back.model.gamma_ghz, 12.5);
  ASSERT_TRUE(back.model.thermal.has_value());
  EXPECT_EQ(back.model.thermal->params.e_ph, 34.41);
  EXPECT_EQ(back.model.thermal->temperature_k, 120.0);
  EXPECT_EQ(back.model.diffusion.rate, 1.98);
  EXPECT_EQ(back.model.pop_decay_ghz, 0.3);
  ASSERT_TRUE(back.model.echo_segments.has_value());
  EXPECT_EQ(back.model.echo_segments->crossover_ps, 10.0);
  EXPECT_EQ(back.model.carrier_mev, 1946.5);
  EXPECT_EQ(back.grid, f.grid);
}

TEST(ModelFile, SamplesParse) {
  for (const char* name : {"nv_15K.model", "nv_120K.model", "nv_bimodal.model", "nv_echo.model"}) {
    const auto f = io::read_model(std::string(MDCS_SAMPLES_DIR) + "/" + name);
    EXPECT_NO_THROW(validate(f.model)) << name;
  }
}

TEST(ModelFile, Errors) {
  EXPECT_EQ(parse_error_line([] { io::parse_model("# mdcs-model v1\ncomponent = 1945, 2.6\n"); }), 2u);
  EXPECT_EQ(parse_error_line([] { io::parse_model("# mdcs-model v1\ncomponent = 1945, 2.6, 1\nfoo = 3\n"); }), 3u);
  EXPECT_THROW(io::parse_model("# mdcs-model v1\ngamma_GHz = 3\n"), std::exception);
  EXPECT_THROW(io::read_model("/nonexistent/x.model"), io::IoError);
}
