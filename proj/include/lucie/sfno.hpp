#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lucie/data_io.hpp"
#include "lucie/fields.hpp"
#include "lucie/grid.hpp"
#include "lucie/tensor.hpp"

namespace lucie {

/// Ordered channel names for the model's input and output stacks. The
/// single source of truth for index <-> name mapping.
struct ChannelLayout {
  std::vector<std::string> inputs;   // prognostic channels then forcings
  std::vector<std::string> outputs;  // prognostic tendency channels then TP
  int nlevels = 8;
  bool with_sst = false;

  int in_channels() const { return static_cast<int>(inputs.size()); }
  int out_channels() const { return static_cast<int>(outputs.size()); }
  int prognostic_channels() const { return out_channels() - 1; }

  /// T/SH/U/V at nlevels each, logP, then orography, tisr, lsm, co2
  /// (and sst when enabled). Outputs: the 4*nlevels+1 tendencies plus TP.
  static ChannelLayout standard(int nlevels = 8, bool with_sst = false);
};

struct ModelConfig {
  int num_blocks = 12;
  int latent_dim = 256;
  int encoder_layers = 1;
  int decoder_layers = 1;
  int truncation = 30;
  int in_channels = 37;
  int out_channels = 34;

  static ModelConfig desk_scale(int truncation, const ChannelLayout& layout,
                                int blocks = 2, int latent = 32);
};

struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
};

/// All trainable parameters. Serialization lives in checkpoint.hpp.
struct ModelParams {
  ModelConfig config;
  std::vector<ParamTensor> tensors;

  size_t count() const;
  int find(const std::string& name) const;
};

/// Closed-form parameter count for a config (verified by test against a
/// hand count at a tiny config).
size_t param_count(const ModelConfig& config);

/// Spectral weights ~ complex Gaussian scaled by 1/sqrt(channels*(l+1));
/// MLP/encoder/decoder weights uniform +-sqrt(6/(fan_in+fan_out)), zero bias.
ModelParams init_params(const ModelConfig& config, uint64_t seed);

/// Parameters registered on a tape for one forward/backward pass,
/// aligned index-for-index with ModelParams::tensors.
std::vector<ad::Var> register_params(ad::Tape& tape, const ModelParams& params,
                                     bool requires_grad);

/// SHT analysis -> complex per-degree channel mixing -> synthesis.
/// Output is band-limited to the plan truncation by construction.
ad::Var spectral_conv(ad::Tape& tape, ad::Var latent, ad::Var weights,
                      int cout, int cin, const SphtPlan& plan);

/// One SFNO block: spectral_conv, pointwise two-layer SiLU MLP, residual.
/// `p` holds {spectral.w, mlp.w1, mlp.b1, mlp.w2, mlp.b2}.
ad::Var sfno_block(ad::Tape& tape, ad::Var latent, const std::vector<ad::Var>& p,
                   int latent_dim, const SphtPlan& plan);

/// Full network on a [in_channels, npoints] stack of normalized channels.
ad::Var forward_stack(ad::Tape& tape, ad::Var input,
                      const std::vector<ad::Var>& params,
                      const ModelConfig& config, const SphtPlan& plan);

/// Assemble the normalized input stack for one time slice, in layout order.
/// Fields are z-scored with the full-field statistics.
std::vector<double> assemble_input_stack(const FieldSet& fields,
                                         const ChannelLayout& layout,
                                         const NormStats& stats);

/// FieldSet-level forward: `state_and_forcings` must already be normalized
/// (use assemble_input_stack for raw fields). Returns normalized tendencies
/// for every prognostic channel plus the normalized full-field TP.
struct ModelOutput {
  FieldSet tendencies;          // one single-level variable per channel key
  std::vector<double> tp;       // normalized full-field precipitation
};
ModelOutput model_forward(const FieldSet& state_and_forcings,
                          const ModelParams& params, const ChannelLayout& layout,
                          const SphtPlan& plan);

}  // namespace lucie
