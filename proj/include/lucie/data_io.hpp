#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lucie/fields.hpp"
#include "lucie/grid.hpp"

namespace lucie {

struct TimeAxis {
  int64_t start_seconds = 0;
  int64_t step_seconds = 21600;  // 6 h
  uint64_t count = 0;
};

/// In-memory image of the "LUC3" gridded-field container.
/// Payload layout: [time][variable][level][lat][lon], float64 little-endian.
struct Dataset {
  int nlat = 0;
  int nlon = 0;
  std::vector<double> sigma_levels;
  TimeAxis time;
  std::vector<VariableSpec> variables;
  std::vector<double> payload;

  int var_index(const std::string& name) const;
  size_t frame_size() const;  // values per time step
  size_t var_offset(int var) const;  // offset of variable within a frame
  std::span<const double> field(uint64_t t, int var, int level) const;
  std::span<double> field(uint64_t t, int var, int level);
  FieldSet slice(uint64_t t) const;
  void validate() const;
};

// Container format version written by this code; readers reject others.
inline constexpr uint32_t kContainerVersion = 1;

void write_container(const std::string& path, const Dataset& data);
Dataset read_container(const std::string& path);

/// Per-channel normalization statistics: full-field mean/std plus the
/// mean/std of one-step tendencies. Degenerate (std == 0) channels are
/// flagged and excluded from the loss.
struct ChannelStats {
  double mean = 0.0, std = 0.0;
  double tend_mean = 0.0, tend_std = 0.0;
  bool degenerate = false;        // full-field std == 0
  bool tend_degenerate = false;   // tendency std == 0
};

struct NormStats {
  std::map<std::string, ChannelStats> channels;  // keyed by channel_key()

  const ChannelStats& at(const std::string& key) const;
};

/// Unweighted means/stds over all (time, lat, lon); tendency stats over
/// first differences. Requires >= 2 time steps.
NormStats compute_norm_stats(const Dataset& data);

void write_norm_stats(const std::string& path, const NormStats& stats);
NormStats read_norm_stats(const std::string& path);

/// One planted wave in the synthetic climate: zonal wavenumber k (positive
/// = eastward), period in days, amplitude, equatorial symmetry, and the
/// (variable, level) channel it is added to.
struct PlantedWave {
  int wavenumber = 3;
  double period_days = 10.0;
  double amplitude = 2.0;
  bool antisymmetric = false;
  std::string variable = "U";
  int level = 5;
};

struct SynthConfig {
  uint64_t seed = 0;
  int years = 1;                       // 360-day years, 1440 six-hour steps
  double co2_start_ppm = 340.0;
  double co2_end_ppm = 400.0;          // linear ramp over the full span
  double forcing_sensitivity = 0.01;   // K per ppm, surface sign +
  double noise_amplitude = 0.5;
  double noise_rho = 0.9;              // AR(1) coefficient per 6-h step
  bool with_sst = false;
  std::vector<PlantedWave> waves = {PlantedWave{},
                                    PlantedWave{-5, 5.0, 1.0, true, "V", 5}};
};

inline constexpr int kStepsPerDay = 4;
inline constexpr int kDaysPerYear = 360;  // synthetic calendar, 12 x 30 days
inline constexpr int kStepsPerYear = kStepsPerDay * kDaysPerYear;

/// Analytic top-of-atmosphere insolation (W/m^2) for the synthetic
/// 360-day calendar; solar constant 1361 W/m^2.
double tisr_analytic(double lat_deg, double lon_deg, double t_seconds);

/// Sine of solar declination at a given time (synthetic calendar).
double solar_declination_sin(double t_seconds);

/// Desk-scale forced-climate generator: zonally structured base climate,
/// TISR-locked seasonal cycle, planted propagating waves, a CO2-linear
/// temperature offset (surface +, top -), seeded band-limited red noise,
/// and TP as a positive nonlinear function of low-level humidity.
Dataset generate_synthetic_climate(const SynthConfig& config, const GridSpec& grid);

/// Analytic surface / top temperature trend (K per second) built into the
/// generator output for a given config, used by trend-separation checks.
double synthetic_analytic_trend_per_second(const SynthConfig& config, double sigma_level);

/// Vertical weight of the CO2 temperature response at a sigma level:
/// -1 at the model top, +1 at the surface level.
double co2_response_weight(double sigma_level);

}  // namespace lucie
