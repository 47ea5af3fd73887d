#include "lucie/sfno.hpp"

#include <cmath>
#include <random>

namespace lucie {

ChannelLayout ChannelLayout::standard(int nlevels, bool with_sst) {
  ChannelLayout layout;
  layout.nlevels = nlevels;
  layout.with_sst = with_sst;
  for (const char* var : {"T", "SH", "U", "V"})
    for (int l = 0; l < nlevels; ++l)
      layout.inputs.push_back(channel_key(var, l, nlevels));
  layout.inputs.push_back("logP");
  layout.outputs = layout.inputs;  // tendency channels mirror the prognostics
  layout.inputs.push_back("orography");
  layout.inputs.push_back("tisr");
  layout.inputs.push_back("lsm");
  layout.inputs.push_back("co2");
  if (with_sst) layout.inputs.push_back("sst");
  layout.outputs.push_back("TP");
  return layout;
}

ModelConfig ModelConfig::desk_scale(int truncation, const ChannelLayout& layout,
                                    int blocks, int latent) {
  ModelConfig c;
  c.num_blocks = blocks;
  c.latent_dim = latent;
  c.truncation = truncation;
  c.in_channels = layout.in_channels();
  c.out_channels = layout.out_channels();
  return c;
}

size_t ModelParams::count() const {
  size_t n = 0;
  for (const auto& t : tensors) n += t.values.size();
  return n;
}

int ModelParams::find(const std::string& name) const {
  for (size_t i = 0; i < tensors.size(); ++i)
    if (tensors[i].name == name) return static_cast<int>(i);
  return -1;
}

size_t param_count(const ModelConfig& c) {
  size_t latent = c.latent_dim;
  size_t enc = latent * c.in_channels + latent;
  size_t spec = static_cast<size_t>(c.truncation + 1) * latent * latent * 2;
  size_t mlp = 2 * (latent * latent + latent);
  size_t dec = static_cast<size_t>(c.out_channels) * latent + c.out_channels;
  return enc + static_cast<size_t>(c.num_blocks) * (spec + mlp) + dec;
}

namespace {

ParamTensor uniform_tensor(const std::string& name, std::vector<int> shape,
                           int fan_in, int fan_out, std::mt19937_64& rng) {
  double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-bound, bound);
  ParamTensor t;
  t.name = name;
  t.shape = std::move(shape);
  size_t n = 1;
  for (int d : t.shape) n *= static_cast<size_t>(d);
  t.values.resize(n);
  for (auto& v : t.values) v = u(rng);
  return t;
}

ParamTensor zero_tensor(const std::string& name, std::vector<int> shape) {
  ParamTensor t;
  t.name = name;
  t.shape = std::move(shape);
  size_t n = 1;
  for (int d : t.shape) n *= static_cast<size_t>(d);
  t.values.assign(n, 0.0);
  return t;
}

}  // namespace

ModelParams init_params(const ModelConfig& config, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ModelParams p;
  p.config = config;
  int latent = config.latent_dim;
  p.tensors.push_back(uniform_tensor("encoder.w", {latent, config.in_channels},
                                     config.in_channels, latent, rng));
  p.tensors.push_back(zero_tensor("encoder.b", {latent}));
  for (int b = 0; b < config.num_blocks; ++b) {
    std::string prefix = "block" + std::to_string(b) + ".";
    ParamTensor spec;
    spec.name = prefix + "spectral.w";
    spec.shape = {config.truncation + 1, latent, latent, 2};
    spec.values.resize(static_cast<size_t>(config.truncation + 1) * latent * latent * 2);
    size_t idx = 0;
    for (int l = 0; l <= config.truncation; ++l) {
      double s = 1.0 / std::sqrt(2.0 * latent * (l + 1.0));
      for (int co = 0; co < latent; ++co)
        for (int ci = 0; ci < latent; ++ci) {
          spec.values[idx++] = s * gauss(rng);
          spec.values[idx++] = s * gauss(rng);
        }
    }
    p.tensors.push_back(std::move(spec));
    p.tensors.push_back(uniform_tensor(prefix + "mlp.w1", {latent, latent},
                                       latent, latent, rng));
    p.tensors.push_back(zero_tensor(prefix + "mlp.b1", {latent}));
    p.tensors.push_back(uniform_tensor(prefix + "mlp.w2", {latent, latent},
                                       latent, latent, rng));
    p.tensors.push_back(zero_tensor(prefix + "mlp.b2", {latent}));
  }
  p.tensors.push_back(uniform_tensor("decoder.w", {config.out_channels, latent},
                                     latent, config.out_channels, rng));
  p.tensors.push_back(zero_tensor("decoder.b", {config.out_channels}));
  return p;
}

std::vector<ad::Var> register_params(ad::Tape& tape, const ModelParams& params,
                                     bool requires_grad) {
  std::vector<ad::Var> vars;
  vars.reserve(params.tensors.size());
  for (const auto& t : params.tensors) {
    // Matrices and biases keep their shape; the 4-d spectral weights are
    // registered flat (spectral_mix only checks total extent).
    std::vector<int> shape = t.shape.size() <= 2
                                 ? t.shape
                                 : std::vector<int>{static_cast<int>(t.values.size())};
    vars.push_back(tape.leaf(t.values, std::move(shape), requires_grad));
  }
  return vars;
}

ad::Var spectral_conv(ad::Tape& tape, ad::Var latent, ad::Var weights,
                      int cout, int cin, const SphtPlan& plan) {
  ad::Var coeffs = tape.sht_forward(latent, plan);
  ad::Var mixed = tape.spectral_mix(coeffs, weights, cout, cin, plan);
  return tape.sht_inverse(mixed, plan);
}

ad::Var sfno_block(ad::Tape& tape, ad::Var latent, const std::vector<ad::Var>& p,
                   int latent_dim, const SphtPlan& plan) {
  ad::Var s = spectral_conv(tape, latent, p[0], latent_dim, latent_dim, plan);
  ad::Var h = tape.bias_rows(tape.matmul(p[1], s), p[2]);
  h = tape.silu(h);
  h = tape.bias_rows(tape.matmul(p[3], h), p[4]);
  return tape.add(latent, h);
}

ad::Var forward_stack(ad::Tape& tape, ad::Var input,
                      const std::vector<ad::Var>& params,
                      const ModelConfig& config, const SphtPlan& plan) {
  if (plan.grid().truncation != config.truncation)
    throw std::invalid_argument("forward_stack: grid truncation does not match config");
  int latent = config.latent_dim;
  size_t pi = 0;
  ad::Var x = tape.bias_rows(tape.matmul(params[pi], input), params[pi + 1]);
  pi += 2;
  for (int b = 0; b < config.num_blocks; ++b) {
    std::vector<ad::Var> blockp(params.begin() + pi, params.begin() + pi + 5);
    x = sfno_block(tape, x, blockp, latent, plan);
    pi += 5;
  }
  return tape.bias_rows(tape.matmul(params[pi], x), params[pi + 1]);
}

std::vector<double> assemble_input_stack(const FieldSet& fields,
                                         const ChannelLayout& layout,
                                         const NormStats& stats) {
  size_t n = static_cast<size_t>(fields.nlat) * fields.nlon;
  std::vector<double> stack(layout.inputs.size() * n);
  for (size_t c = 0; c < layout.inputs.size(); ++c) {
    const std::string& key = layout.inputs[c];
    auto colon = key.find(':');
    std::string var = colon == std::string::npos ? key : key.substr(0, colon);
    int level = colon == std::string::npos ? 0 : std::stoi(key.substr(colon + 1));
    int vi = fields.find(var);
    if (vi < 0) throw std::runtime_error("input stack: missing channel " + key);
    auto f = fields.level_view(vi, level);
    const auto& cs = stats.at(key);
    double denom = cs.degenerate ? 1.0 : cs.std;
    for (size_t i = 0; i < n; ++i)
      stack[c * n + i] = (f[i] - cs.mean) / denom;
  }
  return stack;
}

ModelOutput model_forward(const FieldSet& state_and_forcings,
                          const ModelParams& params, const ChannelLayout& layout,
                          const SphtPlan& plan) {
  size_t n = static_cast<size_t>(state_and_forcings.nlat) * state_and_forcings.nlon;
  std::vector<double> stack(layout.inputs.size() * n);
  for (size_t c = 0; c < layout.inputs.size(); ++c) {
    const std::string& key = layout.inputs[c];
    auto colon = key.find(':');
    std::string var = colon == std::string::npos ? key : key.substr(0, colon);
    int level = colon == std::string::npos ? 0 : std::stoi(key.substr(colon + 1));
    int vi = state_and_forcings.find(var);
    if (vi < 0) throw std::runtime_error("model_forward: missing channel " + key);
    auto f = state_and_forcings.level_view(vi, level);
    std::copy(f.begin(), f.end(), stack.begin() + c * n);
  }
  ad::Tape tape(/*grad_enabled=*/false);
  ad::Var input = tape.constant(std::move(stack),
                                {layout.in_channels(), static_cast<int>(n)});
  auto pvars = register_params(tape, params, false);
  ad::Var out = forward_stack(tape, input, pvars, params.config, plan);
  const auto& v = tape.value(out);

  ModelOutput result;
  result.tendencies.nlat = state_and_forcings.nlat;
  result.tendencies.nlon = state_and_forcings.nlon;
  for (int c = 0; c < layout.prognostic_channels(); ++c) {
    result.tendencies.add({layout.outputs[c], 1, Role::Prognostic},
                          std::vector<double>(v.begin() + c * n, v.begin() + (c + 1) * n));
  }
  size_t tp = layout.prognostic_channels();
  result.tp.assign(v.begin() + tp * n, v.begin() + (tp + 1) * n);
  return result;
}

}  // namespace lucie
