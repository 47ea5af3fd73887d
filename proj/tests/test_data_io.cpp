#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "lucie/data_io.hpp"
#include "lucie/diagnostics.hpp"
#include "lucie/grid.hpp"

using namespace lucie;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& stem) {
  return fs::temp_directory_path() / ("lucie_test_" + stem);
}

Dataset random_dataset(uint64_t seed, int nlat = 3, int nlon = 4, uint64_t nt = 5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset d;
  d.nlat = nlat;
  d.nlon = nlon;
  d.sigma_levels = {0.3, 0.95};
  d.time = TimeAxis{86400, 21600, nt};
  d.variables = {{"T", 2, Role::Prognostic},
                 {"logP", 1, Role::Prognostic},
                 {"tisr", 1, Role::Forcing},
                 {"lsm", 1, Role::Static}};
  d.payload.resize(d.frame_size() * nt);
  for (auto& x : d.payload) x = gauss(rng);
  return d;
}

}  // namespace

TEST_CASE("container round trip is bit-identical") {
  Dataset d = random_dataset(3);
  auto path = temp_file("roundtrip.lc3");
  write_container(path.string(), d);
  Dataset r = read_container(path.string());
  CHECK(r.nlat == d.nlat);
  CHECK(r.nlon == d.nlon);
  CHECK(r.sigma_levels == d.sigma_levels);
  CHECK(r.time.start_seconds == d.time.start_seconds);
  CHECK(r.time.step_seconds == d.time.step_seconds);
  CHECK(r.time.count == d.time.count);
  REQUIRE(r.variables.size() == d.variables.size());
  for (size_t v = 0; v < d.variables.size(); ++v) {
    CHECK(r.variables[v].name == d.variables[v].name);
    CHECK(r.variables[v].levels == d.variables[v].levels);
    CHECK(r.variables[v].role == d.variables[v].role);
  }
  CHECK(r.payload == d.payload);  // bit-exact
  // Writing the read-back dataset reproduces the same bytes.
  auto path2 = temp_file("roundtrip2.lc3");
  write_container(path2.string(), r);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), {});
  std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("container read failure modes") {
  Dataset d = random_dataset(5);
  auto path = temp_file("bad.lc3");
  write_container(path.string(), d);

  SUBCASE("truncated payload") {
    fs::resize_file(path, fs::file_size(path) - 1);
    CHECK_THROWS_WITH_AS(read_container(path.string()),
                         doctest::Contains("payload length"), std::runtime_error);
  }
  SUBCASE("bad magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("NOPE", 4);
    f.close();
    CHECK_THROWS_WITH_AS(read_container(path.string()), doctest::Contains("magic"),
                         std::runtime_error);
  }
  SUBCASE("unsupported version") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    uint32_t v = 999;
    f.write(reinterpret_cast<const char*>(&v), 4);
    f.close();
    CHECK_THROWS_WITH_AS(read_container(path.string()), doctest::Contains("version"),
                         std::runtime_error);
  }
  SUBCASE("duplicate variable names rejected on write") {
    Dataset dup = d;
    dup.variables[1].name = "T";
    CHECK_THROWS(write_container(path.string(), dup));
  }
  fs::remove(path);
}

TEST_CASE("norm stats: trivial channels") {
  Dataset d = random_dataset(7);
  // [TRIVIAL] channel constant 5 -> mean 5, degenerate.
  int v = d.var_index("logP");
  for (uint64_t t = 0; t < d.time.count; ++t)
    for (auto& x : d.field(t, v, 0)) x = 5.0;
  // [TRIVIAL] two-valued uniform channel {0, 2, 4, ...}: tendency constant 2.
  int vt = d.var_index("tisr");
  for (uint64_t t = 0; t < d.time.count; ++t)
    for (auto& x : d.field(t, vt, 0)) x = 2.0 * static_cast<double>(t);
  NormStats stats = compute_norm_stats(d);
  CHECK(stats.at("logP").mean == doctest::Approx(5.0));
  CHECK(stats.at("logP").std == 0.0);
  CHECK(stats.at("logP").degenerate);
  CHECK(stats.at("tisr").tend_mean == doctest::Approx(2.0));
  CHECK(stats.at("tisr").tend_std == 0.0);
  CHECK(stats.at("tisr").tend_degenerate);
  CHECK_FALSE(stats.at("T:0").degenerate);
}

TEST_CASE("norm stats match a two-pass oracle") {
  // [DERIVED] naive mean-then-variance computation.
  Dataset d = random_dataset(11);
  NormStats stats = compute_norm_stats(d);
  int v = d.var_index("T");
  for (int level = 0; level < 2; ++level) {
    std::vector<double> all, tend;
    for (uint64_t t = 0; t < d.time.count; ++t) {
      auto f = d.field(t, v, level);
      all.insert(all.end(), f.begin(), f.end());
      if (t > 0) {
        auto p = d.field(t - 1, v, level);
        for (size_t i = 0; i < f.size(); ++i) tend.push_back(f[i] - p[i]);
      }
    }
    auto two_pass = [](const std::vector<double>& x) {
      double mean = 0.0;
      for (double xi : x) mean += xi;
      mean /= x.size();
      double var = 0.0;
      for (double xi : x) var += (xi - mean) * (xi - mean);
      return std::pair{mean, std::sqrt(var / x.size())};
    };
    auto [m, s] = two_pass(all);
    auto [tm, ts] = two_pass(tend);
    const auto& cs = stats.at(channel_key("T", level, 2));
    CHECK(cs.mean == doctest::Approx(m).epsilon(1e-12));
    CHECK(cs.std == doctest::Approx(s).epsilon(1e-12));
    CHECK(cs.tend_mean == doctest::Approx(tm).epsilon(1e-12));
    CHECK(cs.tend_std == doctest::Approx(ts).epsilon(1e-12));
  }
}

TEST_CASE("norm stats require two time steps and round-trip through text") {
  Dataset d = random_dataset(13, 3, 4, 1);
  CHECK_THROWS(compute_norm_stats(d));
  Dataset d2 = random_dataset(13);
  NormStats stats = compute_norm_stats(d2);
  auto path = temp_file("stats.txt");
  write_norm_stats(path.string(), stats);
  NormStats r = read_norm_stats(path.string());
  for (const auto& [key, cs] : stats.channels) {
    CHECK(r.at(key).mean == doctest::Approx(cs.mean).epsilon(1e-15));
    CHECK(r.at(key).std == doctest::Approx(cs.std).epsilon(1e-15));
    CHECK(r.at(key).tend_std == doctest::Approx(cs.tend_std).epsilon(1e-15));
    CHECK(r.at(key).degenerate == cs.degenerate);
  }
  fs::remove(path);
}

TEST_CASE("analytic TISR: night side dark, equinox symmetric") {
  // [TRIVIAL] polar night at the winter pole; positive on the day side.
  // Day 80 of the 360-day year is the spring equinox (declination zero).
  double equinox_t = 80.0 * 86400.0;
  CHECK(solar_declination_sin(equinox_t) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(tisr_analytic(45.0, 0.0, equinox_t) ==
        doctest::Approx(tisr_analytic(-45.0, 0.0, equinox_t)).epsilon(1e-9));
  // Northern winter solstice: north pole dark all day.
  double solstice_t = 350.0 * 86400.0;
  for (int h = 0; h < 4; ++h)
    CHECK(tisr_analytic(85.0, 90.0 * h, solstice_t + h * 21600.0) == 0.0);
  // Never negative, bounded by the solar constant.
  for (double lat : {-80.0, -30.0, 10.0, 60.0})
    for (double t = 0.0; t < 360.0 * 86400.0; t += 86400.0 * 30.0 + 21600.0) {
      double v = tisr_analytic(lat, 120.0, t);
      CHECK(v >= 0.0);
      CHECK(v <= 1361.0);
    }
}

TEST_CASE("generator: determinism, bounds, TP law, forcing channels") {
  GridSpec grid = build_grid(5, 6, 12);
  SynthConfig cfg;
  cfg.years = 1;
  cfg.seed = 42;
  Dataset a = generate_synthetic_climate(cfg, grid);
  Dataset b = generate_synthetic_climate(cfg, grid);
  CHECK(a.payload == b.payload);  // seed determinism

  CHECK(a.time.count == static_cast<uint64_t>(kStepsPerYear));
  int iT = a.var_index("T");
  int iSH = a.var_index("SH");
  int iTP = a.var_index("TP");
  REQUIRE(iT >= 0);
  REQUIRE(iSH >= 0);
  REQUIRE(iTP >= 0);
  CHECK(a.variables[iT].levels == 8);
  for (uint64_t t = 0; t < a.time.count; t += 97) {
    for (int l = 0; l < 8; ++l)
      for (double x : a.field(t, iT, l)) {
        CHECK(x >= 150.0);
        CHECK(x <= 350.0);
      }
    for (double x : a.field(t, iSH, 7)) CHECK(x >= 0.0);
    // TP = 4000 * SH_bottom^2: positive nonlinear function of low-level
    // humidity, checked pointwise.
    auto sh = a.field(t, iSH, 7);
    auto tp = a.field(t, iTP, 0);
    for (size_t i = 0; i < tp.size(); ++i)
      CHECK(tp[i] == doctest::Approx(4000.0 * sh[i] * sh[i]).epsilon(1e-12));
  }
  // CO2 ramp: anchored at 30-day-month midpoints, so the stored series
  // starts at the first midpoint value and ends at the last.
  int ico2 = a.var_index("co2");
  CHECK(a.field(0, ico2, 0)[0] == doctest::Approx(342.5));
  CHECK(a.field(a.time.count - 1, ico2, 0)[0] == doctest::Approx(397.5).epsilon(1e-6));
  // Value at the middle of month 6 (day 195).
  CHECK(a.field(195 * kStepsPerDay, ico2, 0)[0] ==
        doctest::Approx(340.0 + 60.0 * 195.0 / 360.0).epsilon(1e-6));
  // lsm is the orography > 400 m indicator.
  int ioro = a.var_index("orography");
  int ilsm = a.var_index("lsm");
  auto oro = a.field(0, ioro, 0);
  auto lsm = a.field(0, ilsm, 0);
  for (size_t i = 0; i < oro.size(); ++i)
    CHECK(lsm[i] == (oro[i] > 400.0 ? 1.0 : 0.0));
}

TEST_CASE("generator: zero forcing and zero noise repeats year over year") {
  // [TRIVIAL] pure seasonal cycle.
  GridSpec grid = build_grid(5, 6, 12);
  SynthConfig cfg;
  cfg.years = 2;
  cfg.forcing_sensitivity = 0.0;
  cfg.noise_amplitude = 0.0;
  Dataset d = generate_synthetic_climate(cfg, grid);
  int iT = d.var_index("T");
  for (uint64_t t = 0; t < static_cast<uint64_t>(kStepsPerYear); t += 119) {
    auto y0 = d.field(t, iT, 4);
    auto y1 = d.field(t + kStepsPerYear, iT, 4);
    for (size_t i = 0; i < y0.size(); ++i)
      CHECK(y0[i] == doctest::Approx(y1[i]).epsilon(1e-12));
  }
}

TEST_CASE("generator: CO2 ramp produces the analytic surface trend") {
  // [DERIVED] noise-free construction + independent OLS oracle: the global
  // mean removes the seasonal cycle (odd in sin(lat)), leaving the ramp.
  GridSpec grid = build_grid(5, 6, 12);
  SynthConfig cfg;
  cfg.years = 2;
  cfg.noise_amplitude = 0.0;
  Dataset d = generate_synthetic_climate(cfg, grid);
  int iT = d.var_index("T");
  std::vector<double> series(d.time.count);
  double wsum = 0.0;
  for (double w : grid.gauss_weights) wsum += w;
  for (uint64_t t = 0; t < d.time.count; ++t) {
    auto f = d.field(t, iT, 7);
    double acc = 0.0;
    for (int i = 0; i < grid.nlat; ++i) {
      double zm = 0.0;
      for (int j = 0; j < grid.nlon; ++j) zm += f[static_cast<size_t>(i) * grid.nlon + j];
      acc += grid.gauss_weights[i] * zm / grid.nlon;
    }
    series[t] = acc / wsum;
  }
  TrendFit fit = fit_trend(series, 21600.0);
  double expect =
      synthetic_analytic_trend_per_second(cfg, grid.sigma_levels[7]) * kSecondsPerDecade;
  CHECK(expect > 0.0);  // surface warms
  CHECK(fit.slope_per_decade == doctest::Approx(expect).epsilon(0.02));
  // Top level cools under the same ramp.
  CHECK(synthetic_analytic_trend_per_second(cfg, grid.sigma_levels[0]) < 0.0);
  CHECK(co2_response_weight(grid.sigma_levels[0]) == doctest::Approx(-1.0));
  CHECK(co2_response_weight(grid.sigma_levels[7]) == doctest::Approx(1.0));
}

TEST_CASE("channel_key naming") {
  CHECK(channel_key("T", 3, 8) == "T:3");
  CHECK(channel_key("logP", 0, 1) == "logP");
}
