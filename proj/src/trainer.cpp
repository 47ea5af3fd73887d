#include "lucie/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace lucie {

void TrainConfig::validate() const {
  if (finetune_epochs > total_epochs)
    throw std::invalid_argument("train config: finetune_epochs > total_epochs");
  if (lr_min > lr_max) throw std::invalid_argument("train config: lr_min > lr_max");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size < 1");
  if (sample_stride < 1) throw std::invalid_argument("train config: sample_stride < 1");
}

double lr_schedule(int epoch, const TrainConfig& config) {
  if (epoch < 0 || epoch >= config.total_epochs)
    throw std::invalid_argument("lr_schedule: epoch out of range");
  if (config.total_epochs == 1) return config.lr_max;
  double phase = std::numbers::pi * epoch / (config.total_epochs - 1);
  return config.lr_min + 0.5 * (config.lr_max - config.lr_min) * (1.0 + std::cos(phase));
}

void adam_step(ModelParams& params, const std::vector<std::vector<double>>& grads,
               OptimizerState& state, double lr, const TrainConfig& config) {
  if (grads.size() != params.tensors.size())
    throw std::invalid_argument("adam_step: gradient/tensor count mismatch");
  if (state.m.empty()) {
    state.m.resize(params.tensors.size());
    state.v.resize(params.tensors.size());
    for (size_t i = 0; i < params.tensors.size(); ++i) {
      state.m[i].assign(params.tensors[i].values.size(), 0.0);
      state.v[i].assign(params.tensors[i].values.size(), 0.0);
    }
  }
  for (const auto& g : grads)
    for (double x : g)
      if (!std::isfinite(x)) throw std::runtime_error("adam_step: non-finite gradient");

  state.step += 1;
  double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.tensors.size(); ++i) {
    auto& p = params.tensors[i].values;
    const auto& g = grads[i];
    if (g.size() != p.size())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (size_t k = 0; k < p.size(); ++k) {
      p[k] *= 1.0 - lr * config.weight_decay;  // decoupled decay
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      double mhat = m[k] / bc1;
      double vhat = v[k] / bc2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + config.adam_eps);
    }
  }
}

namespace {

struct ChannelRef {
  int var = -1;
  int level = 0;
  double mean = 0.0, denom = 1.0;   // input normalization
  double tdenom = 1.0;              // tendency normalization (prognostics)
  bool excluded = false;
};

// Precomputed channel lookup for fast stack assembly from a Dataset.
struct StackBuilder {
  const Dataset& data;
  const ChannelLayout& layout;
  std::vector<ChannelRef> in_refs, out_refs;
  size_t n;

  StackBuilder(const Dataset& d, const ChannelLayout& lo, const NormStats& stats)
      : data(d), layout(lo), n(static_cast<size_t>(d.nlat) * d.nlon) {
    for (const auto& key : layout.inputs) in_refs.push_back(resolve(key, stats, false));
    for (const auto& key : layout.outputs) out_refs.push_back(resolve(key, stats, true));
  }

  ChannelRef resolve(const std::string& key, const NormStats& stats, bool output) {
    auto colon = key.find(':');
    std::string var = colon == std::string::npos ? key : key.substr(0, colon);
    ChannelRef r;
    r.var = data.var_index(var);
    if (r.var < 0) throw std::runtime_error("trainer: dataset missing variable " + var);
    r.level = colon == std::string::npos ? 0 : std::stoi(key.substr(colon + 1));
    const auto& cs = stats.at(key);
    r.mean = cs.mean;
    r.denom = cs.degenerate ? 1.0 : cs.std;
    r.tdenom = cs.tend_degenerate ? 1.0 : cs.tend_std;
    r.excluded = output && (key == "TP" ? cs.degenerate : cs.tend_degenerate);
    return r;
  }

  std::vector<double> input_stack(uint64_t t) const {
    std::vector<double> stack(in_refs.size() * n);
    for (size_t c = 0; c < in_refs.size(); ++c) {
      const auto& r = in_refs[c];
      auto f = data.field(t, r.var, r.level);
      for (size_t i = 0; i < n; ++i) stack[c * n + i] = (f[i] - r.mean) / r.denom;
    }
    return stack;
  }

  // Targets: normalized one-step tendencies for prognostics (scaled by the
  // tendency std only, no mean shift), z-scored TP full field at t+1.
  std::vector<double> target_stack(uint64_t t) const {
    std::vector<double> stack(out_refs.size() * n);
    size_t nprog = out_refs.size() - 1;
    for (size_t c = 0; c < nprog; ++c) {
      const auto& r = out_refs[c];
      auto f0 = data.field(t, r.var, r.level);
      auto f1 = data.field(t + 1, r.var, r.level);
      for (size_t i = 0; i < n; ++i) stack[c * n + i] = (f1[i] - f0[i]) / r.tdenom;
    }
    const auto& rtp = out_refs[nprog];
    auto tp = data.field(t + 1, rtp.var, rtp.level);
    for (size_t i = 0; i < n; ++i)
      stack[nprog * n + i] = (tp[i] - rtp.mean) / rtp.denom;
    return stack;
  }
};

void fisher_yates(std::vector<uint64_t>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng() % i]);
}

}  // namespace

void write_history(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("history: cannot open " + path + " for writing");
  os << "# epoch variable weight train_loss val_loss\n";
  os.precision(12);
  for (const auto& rec : history)
    for (const auto& [key, vl] : rec.val_losses) {
      auto it = rec.weights.find(key);
      double w = it == rec.weights.end() ? 0.0 : it->second;
      os << rec.epoch << ' ' << key << ' ' << w << ' ' << rec.train_loss << ' '
         << vl << '\n';
    }
}

TrainResult train(const Dataset& dataset, const TrainConfig& config,
                  const ModelConfig& model_config, const GridSpec& grid,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (dataset.time.count < 2) throw std::invalid_argument("train: empty dataset");
  if (dataset.nlat != grid.nlat || dataset.nlon != grid.nlon)
    throw std::invalid_argument("train: dataset grid mismatch");

  bool with_sst = dataset.var_index("sst") >= 0;
  ChannelLayout layout = ChannelLayout::standard(grid.nlevels(), with_sst);
  if (layout.in_channels() != model_config.in_channels ||
      layout.out_channels() != model_config.out_channels)
    throw std::invalid_argument("train: model channel counts do not match dataset layout");

  NormStats stats = compute_norm_stats(dataset);
  StackBuilder builder(dataset, layout, stats);
  SphtPlan plan(grid);

  // Chronological split: final 10% of tendency pairs for validation.
  uint64_t npairs = dataset.time.count - 1;
  uint64_t nval = std::max<uint64_t>(1, npairs / 10);
  uint64_t ntrain = npairs - nval;
  if (ntrain == 0) throw std::invalid_argument("train: not enough samples for a split");
  std::vector<uint64_t> train_idx;
  for (uint64_t t = 0; t < ntrain; t += config.sample_stride) train_idx.push_back(t);
  std::vector<uint64_t> val_idx;
  {
    uint64_t step = std::max<uint64_t>(1, nval / std::max(1, config.val_max_samples));
    for (uint64_t t = ntrain; t < npairs; t += step) val_idx.push_back(t);
  }

  ModelParams params = init_params(model_config, config.seed);
  OptimizerState opt;
  LossWeights weights = LossWeights::uniform(layout);
  std::vector<std::string> excluded;
  for (size_t c = 0; c < layout.outputs.size(); ++c)
    if (builder.out_refs[c].excluded) excluded.push_back(layout.outputs[c]);
  for (const auto& key : excluded) weights.weights[key] = 0.0;

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  const int cin = layout.in_channels(), cout = layout.out_channels();
  const int n = grid.npoints();
  const int pretrain_epochs = config.total_epochs - config.finetune_epochs;

  TrainResult result;
  std::map<std::string, double> last_val;

  for (int epoch = 0; epoch < config.total_epochs; ++epoch) {
    if (epoch > 0) {
      weights = update_adaptive_weights(last_val, weights, epoch);
      for (const auto& key : excluded) weights.weights[key] = 0.0;
    }
    RegularizerConfig reg = config.regularizer;
    reg.active = epoch >= pretrain_epochs;
    double lr = lr_schedule(epoch, config);

    fisher_yates(train_idx, rng);
    double epoch_loss = 0.0;
    size_t nbatches = 0;
    for (size_t start = 0; start < train_idx.size(); start += config.batch_size) {
      size_t end = std::min(train_idx.size(), start + config.batch_size);
      std::vector<std::vector<double>> grads(params.tensors.size());
      for (size_t i = 0; i < params.tensors.size(); ++i)
        grads[i].assign(params.tensors[i].values.size(), 0.0);
      double batch_loss = 0.0;
      for (size_t s = start; s < end; ++s) {
        uint64_t t = train_idx[s];
        try {
          ad::Tape tape;
          ad::Var input = tape.constant(builder.input_stack(t), {cin, n});
          ad::Var target = tape.constant(builder.target_stack(t), {cout, n});
          auto pvars = register_params(tape, params, true);
          ad::Var pred = forward_stack(tape, input, pvars, model_config, plan);
          ad::Var loss = total_loss(tape, pred, target, layout, weights, reg, grid);
          batch_loss += tape.value(loss)[0];
          tape.backward(loss);
          for (size_t i = 0; i < pvars.size(); ++i) {
            const auto& g = tape.grad(pvars[i]);
            if (g.empty()) continue;
            for (size_t k = 0; k < g.size(); ++k) grads[i][k] += g[k];
          }
        } catch (const std::exception& e) {
          throw std::runtime_error("train: aborted at epoch " + std::to_string(epoch) +
                                   ", sample t=" + std::to_string(t) + ": " + e.what());
        }
      }
      double inv = 1.0 / static_cast<double>(end - start);
      for (auto& g : grads)
        for (auto& x : g) x *= inv;
      adam_step(params, grads, opt, lr, config);
      epoch_loss += batch_loss * inv;
      ++nbatches;
    }
    epoch_loss /= static_cast<double>(std::max<size_t>(1, nbatches));

    // Per-channel validation losses in normalized space.
    std::map<std::string, double> val;
    for (const auto& key : layout.outputs) val[key] = 0.0;
    for (uint64_t t : val_idx) {
      ad::Tape tape(/*grad_enabled=*/false);
      ad::Var input = tape.constant(builder.input_stack(t), {cin, n});
      auto pvars = register_params(tape, params, false);
      ad::Var pred = forward_stack(tape, input, pvars, model_config, plan);
      auto target = builder.target_stack(t);
      const auto& pv = tape.value(pred);
      for (int c = 0; c < cout; ++c) {
        std::span<const double> p(pv.data() + static_cast<size_t>(c) * n, n);
        std::span<const double> tg(target.data() + static_cast<size_t>(c) * n, n);
        val[layout.outputs[c]] +=
            layout.outputs[c] == "TP" ? plain_l2(p, tg) : weighted_l2(p, tg, grid);
      }
    }
    for (auto& [key, v] : val) v /= static_cast<double>(std::max<size_t>(1, val_idx.size()));
    last_val = val;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = epoch_loss;
    rec.regularizer_active = reg.active;
    rec.val_losses = val;
    rec.weights = weights.weights;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  result.checkpoint.params = std::move(params);
  result.checkpoint.layout = layout;
  result.checkpoint.stats = stats;
  result.checkpoint.nlat = grid.nlat;
  result.checkpoint.nlon = grid.nlon;
  result.checkpoint.sigma_levels = grid.sigma_levels;
  return result;
}

}  // namespace lucie
