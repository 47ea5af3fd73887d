#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lucie/checkpoint.hpp"
#include "lucie/data_io.hpp"
#include "lucie/losses.hpp"
#include "lucie/sfno.hpp"

namespace lucie {

struct TrainConfig {
  int total_epochs = 160;
  int finetune_epochs = 30;  // final epochs with the spectral regularizer
  int batch_size = 32;
  double lr_max = 5e-4;
  double lr_min = 1e-8;
  double weight_decay = 1e-5;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  uint64_t seed = 0;
  int sample_stride = 1;      // take every k-th time index for training
  int val_max_samples = 32;   // cap per-epoch validation evaluations
  RegularizerConfig regularizer;  // lambda 5e-2; activated in fine-tune

  void validate() const;
};

struct OptimizerState {
  std::vector<std::vector<double>> m, v;  // first/second moments per tensor
  long step = 0;
};

/// Cosine annealing from lr_max (epoch 0) to lr_min (last epoch).
double lr_schedule(int epoch, const TrainConfig& config);

/// Decoupled weight decay (p *= 1 - lr*wd), then Adam with bias correction.
/// Throws on non-finite gradients (aborts the step).
void adam_step(ModelParams& params, const std::vector<std::vector<double>>& grads,
               OptimizerState& state, double lr, const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  bool regularizer_active = false;
  std::map<std::string, double> val_losses;  // per output channel
  std::map<std::string, double> weights;     // per output channel
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
};

/// Write per-epoch records as line-oriented text:
/// epoch variable weight train_loss val_loss
void write_history(const std::string& path, const std::vector<EpochRecord>& history);

/// Two-phase training on tendency pairs (state_t, forcings_t) ->
/// (normalized one-step tendencies, normalized TP at t+1). Chronological
/// 90/10 train/validation split, adaptive weights from epoch 20 every 10
/// epochs, spectral regularizer in the final finetune_epochs epochs.
/// Fully reproducible from config.seed.
TrainResult train(const Dataset& dataset, const TrainConfig& config,
                  const ModelConfig& model_config, const GridSpec& grid,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace lucie
