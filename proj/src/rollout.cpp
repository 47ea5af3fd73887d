#include "lucie/rollout.hpp"

#include <cmath>
#include <cstring>

#include "lucie/sfno.hpp"
#include "lucie/tensor.hpp"

namespace lucie {

ForcingSeries forcing_from_dataset(const Dataset& data) {
  ForcingSeries f;
  f.start_seconds = data.time.start_seconds;
  f.step_seconds = data.time.step_seconds;
  int ico2 = data.var_index("co2");
  int ioro = data.var_index("orography");
  int ilsm = data.var_index("lsm");
  if (ico2 < 0 || ioro < 0 || ilsm < 0)
    throw std::runtime_error("forcing_from_dataset: missing forcing variables");
  auto oro = data.field(0, ioro, 0);
  auto lsm = data.field(0, ilsm, 0);
  f.orography.assign(oro.begin(), oro.end());
  f.land_sea_mask.assign(lsm.begin(), lsm.end());

  double span_days = static_cast<double>(data.time.count) * data.time.step_seconds / 86400.0;
  int nmonths = std::max(1, static_cast<int>(span_days / 30.0));
  for (int m = 0; m < nmonths; ++m) {
    double mid_sec = (30.0 * m + 15.0) * 86400.0;
    uint64_t idx = std::min<uint64_t>(
        data.time.count - 1,
        static_cast<uint64_t>(mid_sec / data.time.step_seconds));
    f.co2_monthly.push_back(data.field(idx, ico2, 0)[0]);
  }
  int isst = data.var_index("sst");
  if (isst >= 0) {
    f.sst.reserve(data.time.count);
    for (uint64_t t = 0; t < data.time.count; ++t) {
      auto s = data.field(t, isst, 0);
      f.sst.emplace_back(s.begin(), s.end());
    }
  }
  return f;
}

FieldSet euler_step(const FieldSet& state, const FieldSet& tendencies, double dt) {
  FieldSet out = state;
  for (size_t v = 0; v < state.variables.size(); ++v) {
    if (state.variables[v].role != Role::Prognostic) continue;
    int ti = tendencies.find(state.variables[v].name);
    if (ti < 0)
      throw std::invalid_argument("euler_step: missing tendency for " +
                                  state.variables[v].name);
    if (tendencies.data[ti].size() != state.data[v].size())
      throw std::invalid_argument("euler_step: layout mismatch for " +
                                  state.variables[v].name);
    for (size_t i = 0; i < out.data[v].size(); ++i) {
      out.data[v][i] += dt * tendencies.data[ti][i];
      if (!std::isfinite(out.data[v][i]))
        throw std::runtime_error("euler_step: non-finite state in " +
                                 state.variables[v].name);
    }
  }
  return out;
}

double interpolate_co2(const std::vector<double>& monthly, int64_t series_start_seconds,
                       double t_seconds) {
  if (monthly.empty()) throw std::invalid_argument("interpolate_co2: empty series");
  double rel_days = (t_seconds - static_cast<double>(series_start_seconds)) / 86400.0;
  if (rel_days < 0.0 || rel_days > 30.0 * static_cast<double>(monthly.size()))
    throw std::out_of_range("interpolate_co2: timestamp outside series span");
  double pos = (rel_days - 15.0) / 30.0;
  if (pos <= 0.0) return monthly.front();
  if (pos >= static_cast<double>(monthly.size() - 1)) return monthly.back();
  int i = static_cast<int>(pos);
  double f = pos - i;
  return monthly[i] * (1.0 - f) + monthly[i + 1] * f;
}

double co2_at(const ForcingSeries& forcings, const RolloutConfig& config,
              double t_seconds) {
  if (config.co2_mode == Co2Mode::Observed)
    return interpolate_co2(forcings.co2_monthly, forcings.start_seconds, t_seconds);
  // Stationary: replay the anchor year's 12 monthly values cyclically.
  int base = config.stationary_year * 12;
  if (base + 12 > static_cast<int>(forcings.co2_monthly.size()))
    throw std::out_of_range("co2_at: stationary year outside series");
  double rel_days = (t_seconds - static_cast<double>(forcings.start_seconds)) / 86400.0;
  double pos = (rel_days - 15.0) / 30.0;
  double fl = std::floor(pos);
  int i = static_cast<int>(fl);
  double f = pos - fl;
  auto anchor = [&](int k) {
    int m = ((k % 12) + 12) % 12;
    return forcings.co2_monthly[base + m];
  };
  return anchor(i) * (1.0 - f) + anchor(i + 1) * f;
}

std::vector<double> smooth_sst(std::span<const double> sst,
                               std::span<const double> land_sea_mask,
                               double kernel_sigma, int nlat, int nlon,
                               bool* all_land_flag) {
  size_t n = static_cast<size_t>(nlat) * nlon;
  if (sst.size() != n || land_sea_mask.size() != n)
    throw std::invalid_argument("smooth_sst: shape mismatch");
  if (all_land_flag) *all_land_flag = false;

  std::vector<double> ocean(n);
  double ocean_total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (land_sea_mask[i] < 0.0 || land_sea_mask[i] > 1.0)
      throw std::invalid_argument("smooth_sst: mask outside [0,1]");
    ocean[i] = 1.0 - land_sea_mask[i];
    ocean_total += ocean[i];
  }
  std::vector<double> out(sst.begin(), sst.end());
  if (ocean_total == 0.0) {
    if (all_land_flag) *all_land_flag = true;
    return out;  // all-land no-op
  }

  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * kernel_sigma)));
  std::vector<double> kernel(2 * radius + 1);
  for (int d = -radius; d <= radius; ++d)
    kernel[d + radius] = std::exp(-0.5 * d * d / (kernel_sigma * kernel_sigma));

  constexpr double kMaskFloor = 1e-6;
  for (int i = 0; i < nlat; ++i) {
    for (int j = 0; j < nlon; ++j) {
      double num = 0.0, den = 0.0;
      for (int di = -radius; di <= radius; ++di) {
        int ii = i + di;
        if (ii < 0 || ii >= nlat) continue;  // latitude edge-clamped footprint
        for (int dj = -radius; dj <= radius; ++dj) {
          int jj = ((j + dj) % nlon + nlon) % nlon;  // longitude-periodic
          double g = kernel[di + radius] * kernel[dj + radius];
          size_t p = static_cast<size_t>(ii) * nlon + jj;
          num += g * sst[p] * ocean[p];
          den += g * ocean[p];
        }
      }
      if (den > kMaskFloor)
        out[static_cast<size_t>(i) * nlon + j] = num / den;
      // else: no ocean in the footprint, inland value preserved
    }
  }
  return out;
}

FieldSet climatology_init(const Dataset& data, uint64_t t_begin, uint64_t t_end) {
  if (t_end <= t_begin || t_end > data.time.count)
    throw std::invalid_argument("climatology_init: bad span");
  FieldSet fs;
  fs.nlat = data.nlat;
  fs.nlon = data.nlon;
  size_t n = static_cast<size_t>(data.nlat) * data.nlon;
  for (size_t v = 0; v < data.variables.size(); ++v) {
    if (data.variables[v].role != Role::Prognostic) continue;
    const auto& spec = data.variables[v];
    std::vector<double> mean(static_cast<size_t>(spec.levels) * n, 0.0);
    for (uint64_t t = t_begin; t < t_end; ++t)
      for (int l = 0; l < spec.levels; ++l) {
        auto f = data.field(t, static_cast<int>(v), l);
        for (size_t i = 0; i < n; ++i) mean[l * n + i] += f[i];
      }
    double inv = 1.0 / static_cast<double>(t_end - t_begin);
    for (auto& x : mean) x *= inv;
    fs.add(spec, std::move(mean));
  }
  return fs;
}

FieldSet zero_init(const GridSpec& grid) {
  FieldSet fs;
  fs.nlat = grid.nlat;
  fs.nlon = grid.nlon;
  size_t n = static_cast<size_t>(grid.npoints());
  int nlev = grid.nlevels();
  for (const char* var : {"T", "SH", "U", "V"})
    fs.add({var, nlev, Role::Prognostic}, std::vector<double>(nlev * n, 0.0));
  fs.add({"logP", 1, Role::Prognostic}, std::vector<double>(n, 0.0));
  return fs;
}

FieldSet state_init(const Dataset& data, uint64_t t) {
  if (t >= data.time.count) throw std::invalid_argument("state_init: t out of range");
  FieldSet fs;
  fs.nlat = data.nlat;
  fs.nlon = data.nlon;
  for (size_t v = 0; v < data.variables.size(); ++v) {
    if (data.variables[v].role != Role::Prognostic) continue;
    const auto& spec = data.variables[v];
    size_t sz = static_cast<size_t>(spec.levels) * data.nlat * data.nlon;
    const double* p = data.payload.data() + t * data.frame_size() +
                      data.var_offset(static_cast<int>(v));
    fs.add(spec, std::vector<double>(p, p + sz));
  }
  return fs;
}

Dataset run_rollout(const Checkpoint& ckpt, const FieldSet& init,
                    const ForcingSeries& forcings, const RolloutConfig& config,
                    const GridSpec& grid) {
  if (ckpt.nlat != grid.nlat || ckpt.nlon != grid.nlon)
    throw std::invalid_argument("rollout: checkpoint grid mismatch");
  if (ckpt.layout.with_sst && config.sst_mode == SstMode::None)
    throw std::invalid_argument("rollout: SST-trained checkpoint requires an SST mode");
  if (!ckpt.layout.with_sst && config.sst_mode != SstMode::None)
    throw std::invalid_argument("rollout: checkpoint was not trained with SST forcing");
  if (config.sst_mode != SstMode::None && forcings.sst.empty())
    throw std::runtime_error("rollout: SST mode requested but no SST series provided");
  if (config.store_stride < 1)
    throw std::invalid_argument("rollout: store_stride must be >= 1");

  const int nlat = grid.nlat, nlon = grid.nlon, nlev = grid.nlevels();
  const size_t n = static_cast<size_t>(nlat) * nlon;
  const auto& layout = ckpt.layout;
  SphtPlan plan(grid);

  // Trajectory store: prognostics + TP + the applied CO2/TISR forcings.
  Dataset traj;
  traj.nlat = nlat;
  traj.nlon = nlon;
  traj.sigma_levels = grid.sigma_levels;
  uint64_t stored = config.horizon / config.store_stride + 1;
  traj.time = TimeAxis{forcings.start_seconds,
                       static_cast<int64_t>(config.store_stride) * config.dt_seconds,
                       stored};
  traj.variables = {{"T", nlev, Role::Prognostic}, {"SH", nlev, Role::Prognostic},
                    {"U", nlev, Role::Prognostic}, {"V", nlev, Role::Prognostic},
                    {"logP", 1, Role::Prognostic}, {"TP", 1, Role::Diagnostic},
                    {"tisr", 1, Role::Forcing},    {"co2", 1, Role::Forcing}};
  traj.payload.assign(traj.frame_size() * stored, 0.0);

  FieldSet state = init;
  for (const char* var : {"T", "SH", "U", "V", "logP"})
    if (state.find(var) < 0)
      throw std::invalid_argument(std::string("rollout: init missing ") + var);

  std::vector<double> tp_phys(n, 0.0);
  const auto& tp_stats = ckpt.stats.at("TP");

  auto store_step = [&](uint64_t slot, double t_sec) {
    for (const char* var : {"T", "SH", "U", "V", "logP"}) {
      int sv = state.find(var);
      int tv = traj.var_index(var);
      for (int l = 0; l < traj.variables[tv].levels; ++l) {
        auto src = state.level_view(sv, l);
        auto dst = traj.field(slot, tv, l);
        std::copy(src.begin(), src.end(), dst.begin());
      }
    }
    auto tp = traj.field(slot, traj.var_index("TP"), 0);
    std::copy(tp_phys.begin(), tp_phys.end(), tp.begin());
    auto tisr = traj.field(slot, traj.var_index("tisr"), 0);
    auto co2f = traj.field(slot, traj.var_index("co2"), 0);
    double co2;
    try {
      co2 = co2_at(forcings, config, t_sec);
    } catch (const std::out_of_range&) {
      throw std::runtime_error("rollout: CO2 forcing exhausted at stored step " +
                               std::to_string(slot));
    }
    for (int i = 0; i < nlat; ++i)
      for (int j = 0; j < nlon; ++j) {
        tisr[static_cast<size_t>(i) * nlon + j] =
            tisr_analytic(grid.latitude_deg(i), 360.0 * j / nlon, t_sec);
        co2f[static_cast<size_t>(i) * nlon + j] = co2;
      }
  };
  store_step(0, static_cast<double>(forcings.start_seconds));

  // Resolve input channel order once.
  struct InRef {
    const char* var;
    int level;
    double mean, denom;
  };
  std::vector<InRef> in_refs;
  for (const auto& key : layout.inputs) {
    auto colon = key.find(':');
    std::string var = colon == std::string::npos ? key : key.substr(0, colon);
    int level = colon == std::string::npos ? 0 : std::stoi(key.substr(colon + 1));
    const auto& cs = ckpt.stats.at(key);
    static const char* kVars[] = {"T", "SH", "U", "V", "logP", "orography",
                                  "tisr", "lsm", "co2", "sst"};
    const char* vptr = nullptr;
    for (const char* v : kVars)
      if (var == v) vptr = v;
    if (!vptr) throw std::runtime_error("rollout: unknown channel " + key);
    in_refs.push_back({vptr, level, cs.mean, cs.degenerate ? 1.0 : cs.std});
  }

  std::vector<double> stack(layout.inputs.size() * n);
  for (uint64_t step = 0; step < config.horizon; ++step) {
    double t_sec = static_cast<double>(forcings.start_seconds) +
                   static_cast<double>(step) * config.dt_seconds;
    double co2;
    try {
      co2 = co2_at(forcings, config, t_sec);
    } catch (const std::out_of_range&) {
      throw std::runtime_error("rollout: CO2 forcing exhausted at step " +
                               std::to_string(step));
    }
    std::vector<double> sst_field;
    if (config.sst_mode != SstMode::None) {
      if (step >= forcings.sst.size())
        throw std::runtime_error("rollout: SST forcing exhausted at step " +
                                 std::to_string(step));
      sst_field = forcings.sst[step];
      if (config.sst_mode == SstMode::Biased || config.sst_mode == SstMode::BiasedSmoothed)
        for (size_t i = 0; i < n; ++i)
          if (forcings.land_sea_mask[i] < 0.5) sst_field[i] += config.sst_bias_kelvin;
      if (config.sst_mode == SstMode::BiasedSmoothed)
        sst_field = smooth_sst(sst_field, forcings.land_sea_mask,
                               config.sst_smooth_sigma, nlat, nlon);
    }

    for (size_t c = 0; c < in_refs.size(); ++c) {
      const auto& r = in_refs[c];
      std::string var(r.var);
      double* dst = stack.data() + c * n;
      if (var == "orography") {
        for (size_t i = 0; i < n; ++i) dst[i] = (forcings.orography[i] - r.mean) / r.denom;
      } else if (var == "lsm") {
        for (size_t i = 0; i < n; ++i)
          dst[i] = (forcings.land_sea_mask[i] - r.mean) / r.denom;
      } else if (var == "co2") {
        double v = (co2 - r.mean) / r.denom;
        for (size_t i = 0; i < n; ++i) dst[i] = v;
      } else if (var == "tisr") {
        for (int i = 0; i < nlat; ++i)
          for (int j = 0; j < nlon; ++j)
            dst[static_cast<size_t>(i) * nlon + j] =
                (tisr_analytic(grid.latitude_deg(i), 360.0 * j / nlon, t_sec) - r.mean) /
                r.denom;
      } else if (var == "sst") {
        for (size_t i = 0; i < n; ++i) dst[i] = (sst_field[i] - r.mean) / r.denom;
      } else {
        auto f = state.level_view(state.find(var.c_str()), r.level);
        for (size_t i = 0; i < n; ++i) dst[i] = (f[i] - r.mean) / r.denom;
      }
    }

    ad::Tape tape(/*grad_enabled=*/false);
    ad::Var input;
    ad::Var out;
    try {
      input = tape.constant(stack, {layout.in_channels(), static_cast<int>(n)});
      auto pvars = register_params(tape, ckpt.params, false);
      out = forward_stack(tape, input, pvars, ckpt.params.config, plan);
    } catch (const std::exception& e) {
      throw std::runtime_error("rollout: aborted at step " + std::to_string(step) +
                               ": " + e.what());
    }
    const auto& pred = tape.value(out);

    // Denormalized tendencies (tendency std only, no mean shift), per dt.
    FieldSet tend;
    tend.nlat = nlat;
    tend.nlon = nlon;
    std::vector<std::vector<double>> tmp(5);
    const char* pvarnames[5] = {"T", "SH", "U", "V", "logP"};
    int pvls[5] = {nlev, nlev, nlev, nlev, 1};
    int c = 0;
    for (int v = 0; v < 5; ++v) {
      tmp[v].resize(static_cast<size_t>(pvls[v]) * n);
      for (int l = 0; l < pvls[v]; ++l, ++c) {
        const auto& cs = ckpt.stats.at(layout.outputs[c]);
        double s = cs.tend_degenerate ? 0.0 : cs.tend_std;
        for (size_t i = 0; i < n; ++i)
          tmp[v][l * n + i] = pred[static_cast<size_t>(c) * n + i] * s /
                              static_cast<double>(config.dt_seconds);
      }
      tend.add({pvarnames[v], pvls[v], Role::Prognostic}, std::move(tmp[v]));
    }
    try {
      state = euler_step(state, tend, static_cast<double>(config.dt_seconds));
    } catch (const std::exception& e) {
      throw std::runtime_error("rollout: aborted at step " + std::to_string(step) +
                               ": " + e.what());
    }
    size_t tp_row = static_cast<size_t>(layout.prognostic_channels()) * n;
    for (size_t i = 0; i < n; ++i) {
      double v = pred[tp_row + i] * (tp_stats.degenerate ? 1.0 : tp_stats.std) +
                 tp_stats.mean;
      tp_phys[i] = v > 0.0 ? v : 0.0;  // non-negativity clamp
    }

    uint64_t next = step + 1;
    if (next % config.store_stride == 0)
      store_step(next / config.store_stride,
                 static_cast<double>(forcings.start_seconds) +
                     static_cast<double>(next) * config.dt_seconds);
  }
  return traj;
}

}  // namespace lucie
