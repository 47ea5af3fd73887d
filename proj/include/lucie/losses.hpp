#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "lucie/grid.hpp"
#include "lucie/sfno.hpp"
#include "lucie/tensor.hpp"

namespace lucie {

/// Per-channel loss weights with the adaptive validation-loss scheme
/// (w = scale_constant / val_loss from activation_epoch on, refreshed every
/// update_epoch_interval epochs) and the fixed 0.5 factors on logP and TP.
struct LossWeights {
  std::map<std::string, double> weights;  // per output channel key, incl. TP
  std::map<std::string, double> manual_factors = {{"logP", 0.5}, {"TP", 0.5}};
  int update_epoch_interval = 10;
  int activation_epoch = 20;
  double scale_constant = 0.005;
  bool clamped = false;  // set when a degenerate val loss hit the floor

  static LossWeights uniform(const ChannelLayout& layout, double w = 1.0);
};

struct RegularizerConfig {
  double lambda = 5e-2;
  double wavenumber_band = 1.0 / 3.0;  // top fraction of zonal wavenumbers
  double eps = 1e-12;
  bool active = false;
};

/// quadrature_mean((pred - target)^2): exact area-weighted MSE.
double weighted_l2(std::span<const double> pred, std::span<const double> target,
                   const GridSpec& grid);

/// Unweighted mean squared error over all grid points.
double plain_l2(std::span<const double> pred, std::span<const double> target);

/// Adaptive weight update; no-op outside the update schedule. Degenerate
/// validation losses are clamped at 1e-8 in the denominator and flagged.
LossWeights update_adaptive_weights(const std::map<std::string, double>& val_losses,
                                    LossWeights weights, int epoch);

/// Log-amplitude zonal-spectrum mismatch on the top `wavenumber_band`
/// fraction of zonal wavenumbers, quadrature-averaged over latitudes,
/// averaged over channels, times lambda. `pred`/`target` are per-channel
/// grid fields.
double spectral_regularizer(const std::vector<std::span<const double>>& pred,
                            const std::vector<std::span<const double>>& target,
                            const RegularizerConfig& config, const GridSpec& grid);

/// Indices of the penalized zonal wavenumbers for a grid/band fraction.
std::vector<int> regularizer_band(const GridSpec& grid, double band_fraction);

/// Differentiable total loss on an output stack [out_channels, npoints]:
/// sum_v w(v) * weighted_l2 over prognostic tendency channels
/// + w(TP) * plain_l2 on the final TP channel
/// + the spectral regularizer over prognostic channels when active.
ad::Var total_loss(ad::Tape& tape, ad::Var pred, ad::Var target,
                   const ChannelLayout& layout, const LossWeights& weights,
                   const RegularizerConfig& reg, const GridSpec& grid);

/// Differentiable single-channel pieces (used by tests and total_loss).
ad::Var weighted_l2_node(ad::Tape& tape, ad::Var pred, ad::Var target,
                         const GridSpec& grid);
ad::Var plain_l2_node(ad::Tape& tape, ad::Var pred, ad::Var target);

}  // namespace lucie
