#include "lucie/losses.hpp"

#include <cmath>
#include <numbers>

namespace lucie {

LossWeights LossWeights::uniform(const ChannelLayout& layout, double w) {
  LossWeights lw;
  for (const auto& key : layout.outputs) lw.weights[key] = w;
  return lw;
}

double weighted_l2(std::span<const double> pred, std::span<const double> target,
                   const GridSpec& grid) {
  if (pred.size() != target.size() || static_cast<int>(pred.size()) != grid.npoints())
    throw std::invalid_argument("weighted_l2: shape mismatch");
  double acc = 0.0;
  for (int i = 0; i < grid.nlat; ++i) {
    double rowsum = 0.0;
    for (int j = 0; j < grid.nlon; ++j) {
      size_t p = static_cast<size_t>(i) * grid.nlon + j;
      double d = pred[p] - target[p];
      rowsum += d * d;
    }
    acc += grid.gauss_weights[i] * rowsum;
  }
  return acc / (2.0 * grid.nlon);
}

double plain_l2(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size())
    throw std::invalid_argument("plain_l2: shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

LossWeights update_adaptive_weights(const std::map<std::string, double>& val_losses,
                                    LossWeights weights, int epoch) {
  if (epoch < 0) throw std::invalid_argument("update_adaptive_weights: epoch < 0");
  if (epoch < weights.activation_epoch ||
      (epoch - weights.activation_epoch) % weights.update_epoch_interval != 0)
    return weights;
  for (auto& [key, w] : weights.weights) {
    auto it = val_losses.find(key);
    if (it == val_losses.end()) continue;
    double denom = it->second;
    if (denom < 1e-8) {
      denom = 1e-8;
      weights.clamped = true;
    }
    w = weights.scale_constant / denom;
    auto mf = weights.manual_factors.find(key);
    if (mf != weights.manual_factors.end()) w *= mf->second;
  }
  return weights;
}

std::vector<int> regularizer_band(const GridSpec& grid, double band_fraction) {
  if (band_fraction <= 0.0 || band_fraction > 1.0)
    throw std::invalid_argument("regularizer_band: fraction outside (0,1]");
  int nk = grid.nlon / 2 + 1;
  int band_size = std::max(1, static_cast<int>(std::floor(band_fraction * nk)));
  std::vector<int> ks;
  for (int k = nk - band_size; k < nk; ++k) ks.push_back(k);
  return ks;
}

namespace {

// Quadrature-weighted zonal log-amplitude spectrum of one field.
std::vector<double> zonal_log_amp(std::span<const double> field,
                                  const GridSpec& grid, double eps) {
  const int nlat = grid.nlat, nlon = grid.nlon;
  const int nk = nlon / 2 + 1;
  const double pi = std::numbers::pi;
  std::vector<double> out(nk);
  for (int k = 0; k < nk; ++k) {
    double amp = 0.0;
    for (int i = 0; i < nlat; ++i) {
      double fr = 0.0, fi = 0.0;
      for (int j = 0; j < nlon; ++j) {
        double ang = 2.0 * pi * k * j / nlon;
        fr += field[static_cast<size_t>(i) * nlon + j] * std::cos(ang);
        fi -= field[static_cast<size_t>(i) * nlon + j] * std::sin(ang);
      }
      amp += grid.gauss_weights[i] / 2.0 * std::sqrt(fr * fr + fi * fi);
    }
    out[k] = std::log(amp + eps);
  }
  return out;
}

}  // namespace

double spectral_regularizer(const std::vector<std::span<const double>>& pred,
                            const std::vector<std::span<const double>>& target,
                            const RegularizerConfig& config, const GridSpec& grid) {
  if (pred.size() != target.size())
    throw std::invalid_argument("spectral_regularizer: channel count mismatch");
  if (!config.active || config.lambda == 0.0 || pred.empty()) return 0.0;
  auto band = regularizer_band(grid, config.wavenumber_band);
  double acc = 0.0;
  for (size_t c = 0; c < pred.size(); ++c) {
    auto lp = zonal_log_amp(pred[c], grid, config.eps);
    auto lt = zonal_log_amp(target[c], grid, config.eps);
    for (int k : band) {
      double d = lp[k] - lt[k];
      acc += d * d;
    }
  }
  return config.lambda * acc / (static_cast<double>(pred.size()) * band.size());
}

ad::Var weighted_l2_node(ad::Tape& tape, ad::Var pred, ad::Var target,
                         const GridSpec& grid) {
  ad::Var d = tape.sub(pred, target);
  ad::Var sq = tape.mul(d, d);
  std::vector<double> w(grid.npoints());
  for (int i = 0; i < grid.nlat; ++i)
    for (int j = 0; j < grid.nlon; ++j)
      w[static_cast<size_t>(i) * grid.nlon + j] =
          grid.gauss_weights[i] / (2.0 * grid.nlon);
  return tape.dot_const(sq, w);
}

ad::Var plain_l2_node(ad::Tape& tape, ad::Var pred, ad::Var target) {
  ad::Var d = tape.sub(pred, target);
  ad::Var sq = tape.mul(d, d);
  std::vector<double> w(tape.value(sq).size(), 1.0 / tape.value(sq).size());
  return tape.dot_const(sq, w);
}

ad::Var total_loss(ad::Tape& tape, ad::Var pred, ad::Var target,
                   const ChannelLayout& layout, const LossWeights& weights,
                   const RegularizerConfig& reg, const GridSpec& grid) {
  const int cout = layout.out_channels();
  const size_t n = static_cast<size_t>(grid.npoints());
  if (tape.value(pred).size() != static_cast<size_t>(cout) * n)
    throw std::invalid_argument("total_loss: stack shape mismatch");

  ad::Var d = tape.sub(pred, target);
  ad::Var sq = tape.mul(d, d);
  // One flat weight vector: quadrature weights scaled by per-channel
  // loss weights for prognostics, plain 1/N for the TP channel.
  std::vector<double> wall(static_cast<size_t>(cout) * n, 0.0);
  for (int c = 0; c < cout; ++c) {
    const std::string& key = layout.outputs[c];
    auto it = weights.weights.find(key);
    double w = it == weights.weights.end() ? 0.0 : it->second;
    if (key == "TP") {
      for (size_t i = 0; i < n; ++i) wall[c * n + i] = w / static_cast<double>(n);
    } else {
      for (int i = 0; i < grid.nlat; ++i)
        for (int j = 0; j < grid.nlon; ++j)
          wall[c * n + static_cast<size_t>(i) * grid.nlon + j] =
              w * grid.gauss_weights[i] / (2.0 * grid.nlon);
    }
  }
  ad::Var loss = tape.dot_const(sq, wall);

  if (reg.active && reg.lambda != 0.0) {
    auto band = regularizer_band(grid, reg.wavenumber_band);
    ad::Var la_p = tape.zonal_log_amplitude(pred, grid, reg.eps);
    ad::Var la_t = tape.zonal_log_amplitude(target, grid, reg.eps);
    ad::Var ld = tape.sub(la_p, la_t);
    ad::Var lsq = tape.mul(ld, ld);
    int nk = grid.nlon / 2 + 1;
    int nprog = layout.prognostic_channels();
    std::vector<double> mask(static_cast<size_t>(cout) * nk, 0.0);
    double scale = reg.lambda / (static_cast<double>(nprog) * band.size());
    for (int c = 0; c < nprog; ++c)
      for (int k : band) mask[static_cast<size_t>(c) * nk + k] = scale;
    loss = tape.add(loss, tape.dot_const(lsq, mask));
  }
  return loss;
}

}  // namespace lucie
