// lucie: synthesize forced-climate data, train the SFNO emulator, roll it
// out under forcing scenarios, and run the diagnostics battery.
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lucie/checkpoint.hpp"
#include "lucie/data_io.hpp"
#include "lucie/diagnostics.hpp"
#include "lucie/grid.hpp"
#include "lucie/rollout.hpp"
#include "lucie/trainer.hpp"

namespace fs = std::filesystem;
using namespace lucie;

namespace {

// Largest alias-free triangular truncation a grid supports.
int grid_truncation(int nlat, int nlon) {
  return std::min(nlat - 1, (nlon - 1) / 2);
}

GridSpec grid_for_dataset(const Dataset& data) {
  return build_grid(grid_truncation(data.nlat, data.nlon), data.nlat, data.nlon,
                    data.sigma_levels);
}

GridSpec grid_for_checkpoint(const Checkpoint& ckpt) {
  return build_grid(ckpt.params.config.truncation, ckpt.nlat, ckpt.nlon,
                    ckpt.sigma_levels);
}

// FNV-1a 64-bit over the file bytes, for the experiment manifests.
uint64_t file_checksum(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checksum: cannot open " + path.string());
  uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i)
      h = (h ^ static_cast<unsigned char>(buf[i])) * 1099511628211ull;
    if (!in) break;
  }
  return h;
}

void write_manifest(const fs::path& dir, const std::vector<fs::path>& files) {
  std::vector<std::string> lines;
  for (const auto& f : files) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(file_checksum(f)));
    lines.push_back(std::string(hex) + "  " + fs::relative(f, dir).string());
  }
  std::sort(lines.begin(), lines.end(),
            [](const std::string& a, const std::string& b) {
              return a.substr(18) < b.substr(18);
            });
  std::ofstream out(dir / "manifest.txt");
  if (!out) throw std::runtime_error("cannot write manifest");
  for (const auto& l : lines) out << l << "\n";
}

// Area-weighted global-mean series of one (variable, level).
std::vector<double> global_mean_series(const Dataset& traj, const GridSpec& grid,
                                       const std::string& variable, int level) {
  int v = traj.var_index(variable);
  if (v < 0) throw std::runtime_error("unknown variable " + variable);
  std::vector<double> series(traj.time.count);
  double wsum = 0.0;
  for (double w : grid.gauss_weights) wsum += w;
  for (uint64_t t = 0; t < traj.time.count; ++t) {
    auto f = traj.field(t, v, level);
    double acc = 0.0;
    for (int i = 0; i < traj.nlat; ++i) {
      double zm = 0.0;
      for (int j = 0; j < traj.nlon; ++j) zm += f[static_cast<size_t>(i) * traj.nlon + j];
      acc += grid.gauss_weights[i] * zm / traj.nlon;
    }
    series[t] = acc / wsum;
  }
  return series;
}

fs::path trend_report(const Dataset& traj, const GridSpec& grid,
                      const std::string& variable, const fs::path& dir,
                      const std::string& stem) {
  int v = traj.var_index(variable);
  int nlev = traj.variables[v].levels;
  std::vector<std::vector<double>> rows;
  for (int l = 0; l < nlev; ++l) {
    auto series = global_mean_series(traj, grid, variable, l);
    TrendFit fit = fit_trend(series, static_cast<double>(traj.time.step_seconds));
    rows.push_back({static_cast<double>(l), fit.slope_per_decade, fit.intercept,
                    fit.residual_variance});
  }
  fs::path path = dir / (stem + ".txt");
  write_table(path.string(), "global-mean trend of " + variable,
              {"level", "slope_per_decade", "intercept", "residual_variance"}, rows);
  return path;
}

fs::path zonal_map_report(const ZonalMeanMap& map, const fs::path& dir,
                          const std::string& stem, const std::string& title) {
  std::vector<std::vector<double>> rows;
  for (int l = 0; l < map.nlev; ++l)
    for (int i = 0; i < map.nlat; ++i)
      rows.push_back({static_cast<double>(l), static_cast<double>(i), map.at(l, i)});
  fs::path path = dir / (stem + ".txt");
  write_table(path.string(), title, {"level", "lat_row", "value"}, rows);
  render_heatmap_svg((dir / (stem + ".svg")).string(), map.values, map.nlev,
                     map.nlat, title);
  return path;
}

Co2Mode parse_co2(const std::string& s, int& year) {
  if (s == "observed") return Co2Mode::Observed;
  if (s.rfind("stationary:", 0) == 0) {
    year = std::stoi(s.substr(11));
    return Co2Mode::Stationary;
  }
  if (s == "stationary") return Co2Mode::Stationary;
  throw CLI::ValidationError("--co2", "expected observed or stationary[:YEAR]");
}

SstMode parse_sst(const std::string& s, double& bias) {
  if (s == "none") return SstMode::None;
  if (s == "observed") return SstMode::Observed;
  if (s.rfind("biased:", 0) == 0) {
    bias = std::stod(s.substr(7));
    return SstMode::Biased;
  }
  if (s.rfind("smoothed:", 0) == 0) {
    bias = std::stod(s.substr(9));
    return SstMode::BiasedSmoothed;
  }
  throw CLI::ValidationError("--sst", "expected none|observed|biased:K|smoothed:K");
}

struct ExperimentSpec {
  Co2Mode co2 = Co2Mode::Observed;
  int stationary_year = 0;
  SstMode sst = SstMode::None;
  double sst_bias = 0.0;
  InitMode init = InitMode::State;
  bool shift_init = false;  // era-shift: initialize from the trajectory midpoint
};

ExperimentSpec preset_spec(const std::string& name, bool with_sst) {
  ExperimentSpec s;
  s.sst = with_sst ? SstMode::Observed : SstMode::None;
  if (name == "forcing-response") return s;
  if (name == "stationary-forcing") {
    s.co2 = Co2Mode::Stationary;
    return s;
  }
  auto sst_preset = [&](double bias, bool smoothed) {
    s.sst = smoothed ? SstMode::BiasedSmoothed : SstMode::Biased;
    s.sst_bias = bias;
    return s;
  };
  if (name == "biased-sst-0") return sst_preset(0.0, false);
  if (name == "biased-sst-2") return sst_preset(2.0, false);
  if (name == "biased-sst-4") return sst_preset(4.0, false);
  if (name == "biased-sst-smoothed-0") return sst_preset(0.0, true);
  if (name == "biased-sst-smoothed-2") return sst_preset(2.0, true);
  if (name == "biased-sst-smoothed-4") return sst_preset(4.0, true);
  if (name == "spinup-climatology") {
    s.init = InitMode::Climatology;
    return s;
  }
  if (name == "spinup-zero") {
    s.init = InitMode::Zero;
    return s;
  }
  if (name == "era-shift") {
    s.shift_init = true;
    return s;
  }
  throw CLI::ValidationError(
      "--preset",
      "unknown preset '" + name +
          "'; expected one of forcing-response, stationary-forcing, "
          "biased-sst-{0,2,4}, biased-sst-smoothed-{0,2,4}, "
          "spinup-climatology, spinup-zero, era-shift");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LUCIE-3D desk-scale climate emulator pipeline"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "Generate a synthetic forced climate");
  synth->set_config("--config", "", "Flat key=value config; flags win");
  std::string synth_out;
  SynthConfig sc;
  int s_trunc = 15, s_nlat = 16, s_nlon = 32;
  synth->add_option("--out", synth_out, "Output container path")->required();
  synth->add_option("--seed", sc.seed, "RNG seed")->capture_default_str();
  synth->add_option("--years", sc.years, "Synthetic 360-day years")
      ->capture_default_str();
  synth->add_option("--truncation", s_trunc, "Triangular truncation")
      ->capture_default_str();
  synth->add_option("--nlat", s_nlat, "Gaussian latitudes")->capture_default_str();
  synth->add_option("--nlon", s_nlon, "Longitudes")->capture_default_str();
  synth->add_option("--co2-start", sc.co2_start_ppm, "CO2 at t0 (ppm)")
      ->capture_default_str();
  synth->add_option("--co2-end", sc.co2_end_ppm, "CO2 at the end (ppm)")
      ->capture_default_str();
  synth->add_option("--sensitivity", sc.forcing_sensitivity, "K per ppm")
      ->capture_default_str();
  synth->add_option("--noise", sc.noise_amplitude, "Red-noise amplitude")
      ->capture_default_str();
  synth->add_flag("--with-sst", sc.with_sst, "Include an SST forcing channel");

  // ---- stats ----
  auto* stats = app.add_subcommand("stats", "Per-channel normalization statistics");
  std::string stats_in, stats_out;
  stats->add_option("--in", stats_in, "Input container")->required();
  stats->add_option("--out", stats_out, "Output stats file")->required();

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "Train the emulator");
  train_cmd->set_config("--config", "", "Flat key=value config; flags win");
  std::string train_data, train_out, train_history;
  TrainConfig tc;
  int t_blocks = 2, t_latent = 32;
  train_cmd->add_option("--data", train_data, "Training container")->required();
  train_cmd->add_option("--out", train_out, "Checkpoint path")->required();
  train_cmd->add_option("--history", train_history, "Per-epoch history file");
  train_cmd->add_option("--epochs", tc.total_epochs, "Total epochs")
      ->capture_default_str();
  train_cmd->add_option("--finetune", tc.finetune_epochs, "Regularized final epochs")
      ->capture_default_str();
  train_cmd->add_option("--batch", tc.batch_size, "Batch size")->capture_default_str();
  train_cmd->add_option("--lr-max", tc.lr_max, "Peak learning rate")
      ->capture_default_str();
  train_cmd->add_option("--lr-min", tc.lr_min, "Final learning rate")
      ->capture_default_str();
  train_cmd->add_option("--weight-decay", tc.weight_decay, "Decoupled weight decay")
      ->capture_default_str();
  train_cmd->add_option("--seed", tc.seed, "RNG seed")->capture_default_str();
  train_cmd->add_option("--stride", tc.sample_stride, "Take every k-th sample")
      ->capture_default_str();
  train_cmd->add_option("--blocks", t_blocks, "SFNO blocks")->capture_default_str();
  train_cmd->add_option("--latent", t_latent, "Latent channels")->capture_default_str();

  // ---- rollout ----
  auto* roll = app.add_subcommand("rollout", "Autoregressive inference");
  std::string r_ckpt, r_data, r_out, r_init = "state", r_co2 = "observed",
                                     r_sst = "none";
  uint64_t r_horizon = 0, r_init_t = 0, r_stride = 1;
  roll->add_option("--checkpoint", r_ckpt, "Trained checkpoint")->required();
  roll->add_option("--forcing", r_data, "Container providing forcings and init")
      ->required();
  roll->add_option("--out", r_out, "Trajectory container path")->required();
  roll->add_option("--horizon", r_horizon, "Steps to integrate")->required();
  roll->add_option("--init", r_init, "state|climatology|zero")->capture_default_str();
  roll->add_option("--init-t", r_init_t, "Step index for --init state")
      ->capture_default_str();
  roll->add_option("--co2", r_co2, "observed|stationary[:YEAR]")
      ->capture_default_str();
  roll->add_option("--sst", r_sst, "none|observed|biased:K|smoothed:K")
      ->capture_default_str();
  roll->add_option("--store-stride", r_stride, "Store every k-th step")
      ->capture_default_str();

  // ---- diag ----
  auto* diag = app.add_subcommand("diag", "Diagnostics battery");
  std::string d_kind, d_model, d_ref, d_out = ".", d_var = "T",
                                      d_hemi = "north";
  int d_level = -1, d_bins = 60;
  double d_lo = 0.0, d_hi = 0.0;
  uint64_t d_eb = 0, d_ee = 0, d_lb = 0, d_le = 0;
  diag->add_option("kind", d_kind, "clim|change|trend|wk|eof|ssw|pdf")->required();
  diag->add_option("--model", d_model, "Model trajectory container")->required();
  diag->add_option("--reference", d_ref, "Reference container (clim)");
  diag->add_option("--out", d_out, "Output directory")->capture_default_str();
  diag->add_option("--variable", d_var, "Variable name")->capture_default_str();
  diag->add_option("--level", d_level, "Level index (-1 = surface)")
      ->capture_default_str();
  diag->add_option("--hemisphere", d_hemi, "north|south (eof)")
      ->capture_default_str();
  diag->add_option("--bins", d_bins, "Histogram bins (pdf)")->capture_default_str();
  diag->add_option("--lo", d_lo, "Histogram lower edge (pdf)");
  diag->add_option("--hi", d_hi, "Histogram upper edge (pdf)");
  diag->add_option("--early-begin", d_eb, "Early span start (change)");
  diag->add_option("--early-end", d_ee, "Early span end (change)");
  diag->add_option("--late-begin", d_lb, "Late span start (change)");
  diag->add_option("--late-end", d_le, "Late span end (change)");

  // ---- experiment ----
  auto* exp = app.add_subcommand("experiment", "Named end-to-end experiments");
  exp->set_config("--config", "", "Flat key=value config; flags win");
  std::string e_preset, e_ckpt, e_data, e_out;
  uint64_t e_horizon = 4 * static_cast<uint64_t>(kStepsPerYear);
  uint64_t e_seed = 0;
  exp->add_option("--preset", e_preset, "Experiment preset name")->required();
  exp->add_option("--checkpoint", e_ckpt, "Trained checkpoint")->required();
  exp->add_option("--data", e_data, "Forcing/init container")->required();
  exp->add_option("--out", e_out, "Output directory")->required();
  exp->add_option("--horizon", e_horizon, "Rollout steps")->capture_default_str();
  exp->add_option("--seed", e_seed, "RNG seed (provenance only)")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      GridSpec grid = build_grid(s_trunc, s_nlat, s_nlon);
      Dataset data = generate_synthetic_climate(sc, grid);
      write_container(synth_out, data);
      std::cout << "wrote " << synth_out << " (" << data.time.count << " steps, "
                << data.variables.size() << " variables)\n";
    } else if (*stats) {
      Dataset data = read_container(stats_in);
      write_norm_stats(stats_out, compute_norm_stats(data));
      std::cout << "wrote " << stats_out << "\n";
    } else if (*train_cmd) {
      Dataset data = read_container(train_data);
      GridSpec grid = grid_for_dataset(data);
      ChannelLayout layout = ChannelLayout::standard(
          grid.nlevels(), data.var_index("sst") >= 0);
      ModelConfig mc =
          ModelConfig::desk_scale(grid.truncation, layout, t_blocks, t_latent);
      TrainResult result = train(data, tc, mc, grid, [](const EpochRecord& r) {
        std::cout << "epoch " << r.epoch << " lr " << r.lr << " train "
                  << r.train_loss << (r.regularizer_active ? " [reg]" : "") << "\n";
      });
      write_checkpoint(train_out, result.checkpoint);
      if (!train_history.empty()) write_history(train_history, result.history);
      std::cout << "wrote " << train_out << "\n";
    } else if (*roll) {
      Checkpoint ckpt = read_checkpoint(r_ckpt);
      Dataset data = read_container(r_data);
      GridSpec grid = grid_for_checkpoint(ckpt);
      RolloutConfig rc;
      rc.dt_seconds = data.time.step_seconds;
      rc.horizon = r_horizon;
      rc.store_stride = r_stride;
      rc.co2_mode = parse_co2(r_co2, rc.stationary_year);
      rc.sst_mode = parse_sst(r_sst, rc.sst_bias_kelvin);
      ForcingSeries forcings = forcing_from_dataset(data);
      FieldSet init;
      if (r_init == "state")
        init = state_init(data, r_init_t);
      else if (r_init == "climatology")
        init = climatology_init(data, 0, data.time.count);
      else if (r_init == "zero")
        init = zero_init(grid);
      else
        throw CLI::ValidationError("--init", "expected state|climatology|zero");
      Dataset traj = run_rollout(ckpt, init, forcings, rc, grid);
      write_container(r_out, traj);
      std::cout << "wrote " << r_out << " (" << traj.time.count << " steps)\n";
    } else if (*diag) {
      Dataset model = read_container(d_model);
      GridSpec grid = grid_for_dataset(model);
      fs::create_directories(d_out);
      fs::path dir(d_out);
      int v = model.var_index(d_var);
      if (v < 0) throw std::runtime_error("unknown variable " + d_var);
      int level = d_level >= 0 ? d_level : model.variables[v].levels - 1;
      if (d_kind == "clim") {
        if (d_ref.empty()) throw std::runtime_error("clim requires --reference");
        Dataset ref = read_container(d_ref);
        ClimatologyBias cb = climatology_bias(model, ref, d_var);
        zonal_map_report(cb.bias, dir, "clim_bias_" + d_var,
                         "climatology bias: " + d_var);
        zonal_map_report(cb.reference, dir, "clim_reference_" + d_var,
                         "reference climatology: " + d_var);
      } else if (d_kind == "change") {
        if (d_ee == 0) d_ee = model.time.count / 4;
        if (d_le == 0) {
          d_lb = model.time.count - model.time.count / 4;
          d_le = model.time.count;
        }
        ZonalMeanMap map = climate_change_map(model, d_var, d_eb, d_ee, d_lb, d_le);
        zonal_map_report(map, dir, "change_" + d_var, "climate change: " + d_var);
      } else if (d_kind == "trend") {
        trend_report(model, grid, d_var, dir, "trend_" + d_var);
      } else if (d_kind == "wk") {
        WKSpectrum wk = wheeler_kiladis(model, d_var, level, grid);
        for (bool sym : {true, false}) {
          std::string stem = std::string(sym ? "wk_sym_" : "wk_antisym_") + d_var;
          std::vector<std::vector<double>> rows;
          for (int k = -wk.params.kmax; k <= wk.params.kmax; ++k)
            for (int f = 0; f < wk.nfreq; ++f)
              rows.push_back({static_cast<double>(k), wk.freq_cpd[f],
                              wk.power(sym, k, f),
                              (sym ? wk.symmetric_normalized
                                   : wk.antisymmetric_normalized)
                                  [static_cast<size_t>(k + wk.params.kmax) *
                                       wk.nfreq +
                                   f]});
          write_table((dir / (stem + ".txt")).string(),
                      "Wheeler-Kiladis spectrum: " + d_var,
                      {"k", "freq_cpd", "power", "power_normalized"}, rows);
          render_heatmap_svg((dir / (stem + ".svg")).string(),
                             sym ? wk.symmetric : wk.antisymmetric,
                             2 * wk.params.kmax + 1, wk.nfreq, stem);
        }
      } else if (d_kind == "eof") {
        Hemisphere hemi = d_hemi == "south" ? Hemisphere::South : Hemisphere::North;
        std::string var = d_var == "T" ? "logP" : d_var;  // annular modes use pressure
        EOFResult eof = leading_eof(model, var, hemi, grid);
        std::vector<std::vector<double>> rows;
        for (size_t i = 0; i < eof.pattern.size(); ++i)
          rows.push_back({static_cast<double>(i), eof.pattern[i]});
        write_table((dir / ("eof_pattern_" + var + ".txt")).string(),
                    "leading EOF pattern (explained " +
                        std::to_string(eof.explained_variance) + ")",
                    {"cell", "loading"}, rows);
        rows.clear();
        for (size_t t = 0; t < eof.pc.size(); ++t)
          rows.push_back({static_cast<double>(t), eof.pc[t]});
        write_table((dir / ("eof_pc_" + var + ".txt")).string(),
                    "leading EOF principal component", {"day", "pc"}, rows);
        render_heatmap_svg((dir / ("eof_pattern_" + var + ".svg")).string(),
                           eof.pattern, static_cast<int>(eof.lat_rows.size()),
                           model.nlon, "leading EOF: " + var);
      } else if (d_kind == "ssw") {
        SSWDiagnostics ssw = ssw_diagnostics(model, grid);
        std::vector<std::vector<double>> rows;
        for (size_t d = 0; d < ssw.u_index.size(); ++d)
          rows.push_back({static_cast<double>(d), ssw.u_index[d], ssw.t_index[d]});
        write_table((dir / "ssw_indices.txt").string(),
                    "daily polar indices: U 55-65N, T north of 60N (top level)",
                    {"day", "u_index", "t_index"}, rows);
        if (ssw.has_climatology) {
          rows.clear();
          for (int doy = 0; doy < 360; ++doy)
            rows.push_back({static_cast<double>(doy), ssw.u_clim[doy],
                            ssw.u_sigma[doy], ssw.t_clim[doy], ssw.t_sigma[doy]});
          write_table((dir / "ssw_climatology.txt").string(),
                      "day-of-year climatology and 2-sigma envelope",
                      {"doy", "u_clim", "u_sigma", "t_clim", "t_sigma"}, rows);
        }
        rows.clear();
        for (const auto& ev : ssw.events)
          rows.push_back({static_cast<double>(ev.onset_day),
                          static_cast<double>(ev.duration_days),
                          ev.peak_temp_anomaly});
        write_table((dir / "ssw_events.txt").string(), "detected SSW events",
                    {"onset_day", "duration_days", "peak_temp_anomaly"}, rows);
        std::vector<double> days(ssw.u_index.size());
        for (size_t d = 0; d < days.size(); ++d) days[d] = static_cast<double>(d);
        render_lines_svg((dir / "ssw_indices.svg").string(), days,
                         {ssw.u_index, ssw.t_index}, {"U 55-65N", "T >60N"},
                         "SSW indices");
      } else if (d_kind == "pdf") {
        if (!(d_hi > d_lo)) {
          d_lo = std::numeric_limits<double>::infinity();
          d_hi = -d_lo;
          for (uint64_t t = 0; t < model.time.count; ++t)
            for (double x : model.field(t, v, level)) {
              d_lo = std::min(d_lo, x);
              d_hi = std::max(d_hi, x);
            }
          d_hi += 1e-9 * (d_hi - d_lo + 1.0);  // include the maximum sample
        }
        LogPdf pdf = log_pdf_field(model, d_var, level, grid,
                                   make_edges(d_lo, d_hi, d_bins));
        std::vector<std::vector<double>> rows;
        for (size_t b = 0; b + 1 < pdf.edges.size(); ++b)
          rows.push_back({0.5 * (pdf.edges[b] + pdf.edges[b + 1]),
                          pdf.log10_density[b]});
        write_table((dir / ("pdf_" + d_var + ".txt")).string(),
                    "area-weighted log10 PDF: " + d_var,
                    {"bin_center", "log10_density"}, rows);
      } else {
        throw CLI::ValidationError("kind", "expected clim|change|trend|wk|eof|ssw|pdf");
      }
      std::cout << "wrote diagnostics to " << d_out << "\n";
    } else if (*exp) {
      Checkpoint ckpt = read_checkpoint(e_ckpt);
      ExperimentSpec spec = preset_spec(e_preset, ckpt.layout.with_sst);
      if (spec.sst != SstMode::None && !ckpt.layout.with_sst)
        throw std::runtime_error("preset " + e_preset +
                                 " requires an SST-trained checkpoint");
      Dataset data = read_container(e_data);
      GridSpec grid = grid_for_checkpoint(ckpt);
      fs::create_directories(e_out);
      fs::path dir(e_out);
      std::vector<fs::path> files;

      RolloutConfig rc;
      rc.dt_seconds = data.time.step_seconds;
      rc.horizon = e_horizon;
      rc.co2_mode = spec.co2;
      rc.stationary_year = spec.stationary_year;
      rc.sst_mode = spec.sst;
      rc.sst_bias_kelvin = spec.sst_bias;
      rc.init_mode = spec.init;
      FieldSet init;
      if (spec.init == InitMode::Climatology)
        init = climatology_init(data, 0, data.time.count);
      else if (spec.init == InitMode::Zero)
        init = zero_init(grid);
      else
        init = state_init(data, spec.shift_init ? data.time.count / 2 : 0);
      ForcingSeries forcings = forcing_from_dataset(data);
      if (spec.shift_init)
        forcings.start_seconds +=
            static_cast<int64_t>(data.time.count / 2) * data.time.step_seconds;
      Dataset traj = run_rollout(ckpt, init, forcings, rc, grid);
      fs::path traj_path = dir / "trajectory.lc3";
      write_container(traj_path.string(), traj);
      files.push_back(traj_path);

      files.push_back(trend_report(traj, grid, "T", dir, "trend_T"));
      if (traj.time.count >= 2) {
        std::vector<double> days(traj.time.count);
        auto surface = global_mean_series(traj, grid, "T", grid.nlevels() - 1);
        for (size_t t = 0; t < days.size(); ++t)
          days[t] = static_cast<double>(t) * traj.time.step_seconds / 86400.0;
        render_lines_svg((dir / "global_mean_T.svg").string(), days, {surface},
                         {"surface T"}, "global-mean surface temperature");
        files.push_back(dir / "global_mean_T.svg");
      }
      if (spec.sst == SstMode::Biased || spec.sst == SstMode::BiasedSmoothed ||
          spec.init != InitMode::State || spec.shift_init) {
        uint64_t span = std::max<uint64_t>(1, traj.time.count / 4);
        if (traj.time.count >= 2 * span + 1) {
          ZonalMeanMap map =
              climate_change_map(traj, "T", 0, span, traj.time.count - span,
                                 traj.time.count);
          files.push_back(
              zonal_map_report(map, dir, "change_T", "late minus early: T"));
        }
      }
      write_manifest(dir, files);
      std::cout << "wrote " << (dir / "manifest.txt").string() << " ("
                << files.size() << " files)\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
