#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lucie/data_io.hpp"
#include "lucie/grid.hpp"

namespace lucie {

/// Ordinary-least-squares fit of a uniformly sampled series, slope in
/// units per decade (10 synthetic 360-day years).
struct TrendFit {
  double slope_per_decade = 0.0;
  double intercept = 0.0;          // value at the first sample
  double residual_variance = 0.0;  // mean squared residual
  std::string variable;
  std::string region;
};

constexpr double kSecondsPerDecade = 10.0 * 360.0 * 86400.0;

TrendFit fit_trend(std::span<const double> series, double step_seconds);

/// Zonal-mean (level, lat) map, the common currency of the climatology
/// diagnostics.
struct ZonalMeanMap {
  std::string variable;
  int nlev = 0;
  int nlat = 0;
  std::vector<double> values;  // [nlev][nlat]
  double& at(int l, int i) { return values[static_cast<size_t>(l) * nlat + i]; }
  double at(int l, int i) const { return values[static_cast<size_t>(l) * nlat + i]; }
};

/// Time-zonal mean of one variable over a step span [t_begin, t_end).
ZonalMeanMap zonal_time_mean(const Dataset& traj, const std::string& variable,
                             uint64_t t_begin, uint64_t t_end);

struct ClimatologyBias {
  ZonalMeanMap bias;       // model minus reference
  ZonalMeanMap reference;  // reference climatology contours
};

ClimatologyBias climatology_bias(const Dataset& model, const Dataset& reference,
                                 const std::string& variable);

/// Zonal-time-mean(late) minus zonal-time-mean(early); spans must be
/// disjoint and inside the trajectory.
ZonalMeanMap climate_change_map(const Dataset& traj, const std::string& variable,
                                uint64_t early_begin, uint64_t early_end,
                                uint64_t late_begin, uint64_t late_end);

struct WKParams {
  double band_deg = 15.0;   // equatorial band half-width
  int segment_days = 96;
  int overlap_days = 60;
  int kmax = 15;            // zonal wavenumbers [-kmax, +kmax]
  int background_passes = 10;  // 1-2-1 smoothing passes for the background
};

/// Wavenumber-frequency power split into equatorially symmetric and
/// antisymmetric parts. k runs westward (-kmax) to eastward (+kmax);
/// frequencies are the non-negative segment bins in cycles per day.
struct WKSpectrum {
  WKParams params;
  int nfreq = 0;
  std::vector<double> freq_cpd;                 // [nfreq]
  std::vector<double> symmetric;                // [2*kmax+1][nfreq]
  std::vector<double> antisymmetric;            // [2*kmax+1][nfreq]
  std::vector<double> symmetric_normalized;     // raw / smoothed background
  std::vector<double> antisymmetric_normalized;
  int nsegments = 0;
  double power(bool symmetric_part, int k, int ifreq) const;
};

WKSpectrum wheeler_kiladis(const Dataset& traj, const std::string& variable,
                           int level, const GridSpec& grid,
                           const WKParams& params = {});

enum class Hemisphere { North, South };

struct EOFResult {
  std::vector<double> pattern;   // unit norm under the latitude weighting
  std::vector<double> pc;        // principal-component series
  std::vector<double> explained; // variance fractions, all modes, sum to 1
  double explained_variance = 0.0;  // leading fraction
  bool sign_flipped = false;     // convention: polar-cap mean loading < 0
  bool degenerate = false;       // leading pair gap < 1e-8 relative
  std::vector<int> lat_rows;     // grid rows the pattern lives on
};

/// EOF of a generic anomaly matrix [ntime][nspace] under per-column
/// weights; the diagnostics wrapper and the planted-mode oracles share it.
EOFResult eof_modes(const std::vector<double>& anomalies, int ntime, int nspace,
                    std::span<const double> weights,
                    std::span<const double> polar_cap_mask);

/// Leading EOF of deseasonalized winter (Dec-Feb, December attached to the
/// following year) surface pressure poleward of 20 degrees, with
/// sqrt(cos(lat)) weights.
EOFResult leading_eof(const Dataset& traj, const std::string& variable,
                      Hemisphere hemisphere, const GridSpec& grid);

struct SSWEvent {
  int onset_day = 0;          // day index into the daily series
  int duration_days = 0;      // length of the easterly reversal
  double peak_temp_anomaly = 0.0;
};

struct SSWParams {
  int min_westerly_days = 10;  // required westerly run before an onset
  int min_reversal_days = 2;   // debounce: reversal must persist this long
};

struct SSWDiagnostics {
  std::vector<double> u_index;  // daily area-weighted zonal wind, 55-65N top level
  std::vector<double> t_index;  // daily area-weighted temperature north of 60N
  bool has_climatology = false; // needs at least one full year
  std::vector<double> u_clim, u_sigma;  // [360] day-of-year mean and std
  std::vector<double> t_clim, t_sigma;
  std::vector<SSWEvent> events;
};

/// Event detection on a precomputed daily wind/temperature index pair;
/// `day0_of_year` is the day-of-year of the first sample.
std::vector<SSWEvent> detect_ssw_events(std::span<const double> u_index,
                                        std::span<const double> t_index,
                                        std::span<const double> t_clim,
                                        int day0_of_year,
                                        const SSWParams& params = {});

SSWDiagnostics ssw_diagnostics(const Dataset& traj, const GridSpec& grid,
                               const SSWParams& params = {});

struct LogPdf {
  std::vector<double> edges;          // nbins + 1
  std::vector<double> log10_density;  // log10 of the unit-integral density
  bool single_bin = false;            // all mass landed in one bin
};

/// Weighted histogram normalized to unit integral, densities in log10.
/// Empty bins carry -inf.
LogPdf log_pdf(std::span<const double> values, std::span<const double> weights,
               const std::vector<double>& edges);

/// Area-weighted PDF of one (variable, level) over the whole trajectory.
LogPdf log_pdf_field(const Dataset& traj, const std::string& variable, int level,
                     const GridSpec& grid, const std::vector<double>& edges);

/// Evenly spaced bin edges shared between model and reference runs.
std::vector<double> make_edges(double lo, double hi, int nbins);

// --- report serialization -------------------------------------------------

constexpr int kReportVersion = 1;

/// Self-describing text table: versioned header, one '#'-prefixed metadata
/// block, whitespace-separated numeric rows.
void write_table(const std::string& path, const std::string& title,
                 const std::vector<std::string>& columns,
                 const std::vector<std::vector<double>>& rows);

/// Minimal standalone SVG renderers reading the same data the tables hold.
void render_lines_svg(const std::string& path, std::span<const double> x,
                      const std::vector<std::vector<double>>& series,
                      const std::vector<std::string>& labels,
                      const std::string& title);
void render_heatmap_svg(const std::string& path, const std::vector<double>& values,
                        int nrows, int ncols, const std::string& title);

}  // namespace lucie
