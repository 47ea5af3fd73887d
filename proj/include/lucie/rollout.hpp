#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lucie/checkpoint.hpp"
#include "lucie/data_io.hpp"
#include "lucie/fields.hpp"
#include "lucie/grid.hpp"

namespace lucie {

/// External forcings over a rollout horizon. CO2 anchors sit at month
/// midpoints of the synthetic 360-day calendar; TISR is generated
/// analytically; SST, when present, is a per-step field series.
struct ForcingSeries {
  int64_t start_seconds = 0;
  int64_t step_seconds = 21600;
  std::vector<double> co2_monthly;   // ppm, one anchor per 30-day month
  std::vector<double> orography;     // static field
  std::vector<double> land_sea_mask; // static field in [0,1]
  std::vector<std::vector<double>> sst;  // optional per-step fields
};

/// Pull forcings out of a dataset (CO2 monthly anchors are re-sampled from
/// the stored 6-hourly series at month midpoints).
ForcingSeries forcing_from_dataset(const Dataset& data);

enum class Co2Mode { Observed, Stationary };
enum class SstMode { None, Observed, Biased, BiasedSmoothed };
enum class InitMode { State, Climatology, Zero };

struct RolloutConfig {
  int64_t dt_seconds = 21600;  // 6 h
  uint64_t horizon = 0;
  Co2Mode co2_mode = Co2Mode::Observed;
  int stationary_year = 0;     // year index whose 12 anchors repeat
  SstMode sst_mode = SstMode::None;
  double sst_bias_kelvin = 0.0;
  double sst_smooth_sigma = 1.5;  // grid lengths
  InitMode init_mode = InitMode::State;
  uint64_t store_stride = 1;
};

/// x(t+dt) = x(t) + dt * tendency for every prognostic channel; the
/// diagnostic TP field is passed through untouched.
FieldSet euler_step(const FieldSet& state, const FieldSet& tendencies, double dt);

/// Linear interpolation of monthly anchor values (anchored at month
/// midpoints) to an arbitrary timestamp. Throws outside the series span.
double interpolate_co2(const std::vector<double>& monthly, int64_t series_start_seconds,
                       double t_seconds);

/// CO2 value at a rollout timestamp honoring the stationary mode, which
/// cyclically replays the anchor year's 12 monthly values.
double co2_at(const ForcingSeries& forcings, const RolloutConfig& config,
              double t_seconds);

/// Gaussian mixing of SST across coastlines, normalized by the smoothed
/// ocean mask: out = conv(sst*mask)/conv(mask) wherever the smoothed mask
/// is above a floor, the original value elsewhere (inland preservation).
/// Longitude-periodic, latitude edge-clamped; footprint truncated at
/// 4*kernel_sigma. Returns the input unchanged for an all-land mask.
std::vector<double> smooth_sst(std::span<const double> sst,
                               std::span<const double> land_sea_mask,
                               double kernel_sigma, int nlat, int nlon,
                               bool* all_land_flag = nullptr);

/// Autoregressive rollout: assemble channels, normalize, model forward,
/// denormalize tendencies (tendency std only), Euler step; TP denormalized
/// and clamped at zero. The trajectory store holds every stored step's
/// prognostics, TP, and the CO2/TISR forcing actually applied.
Dataset run_rollout(const Checkpoint& ckpt, const FieldSet& init,
                    const ForcingSeries& forcings, const RolloutConfig& config,
                    const GridSpec& grid);

/// Initial states for the spin-up experiments.
FieldSet climatology_init(const Dataset& data, uint64_t t_begin, uint64_t t_end);
FieldSet zero_init(const GridSpec& grid);
FieldSet state_init(const Dataset& data, uint64_t t);

}  // namespace lucie
