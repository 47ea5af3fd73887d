#include "lucie/data_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace lucie {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr char kMagic[4] = {'L', 'U', 'C', '3'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("container: truncated file");
  return v;
}

}  // namespace

int Dataset::var_index(const std::string& name) const {
  for (size_t i = 0; i < variables.size(); ++i)
    if (variables[i].name == name) return static_cast<int>(i);
  return -1;
}

size_t Dataset::frame_size() const {
  size_t n = 0;
  for (const auto& v : variables) n += static_cast<size_t>(v.levels);
  return n * nlat * nlon;
}

size_t Dataset::var_offset(int var) const {
  size_t off = 0;
  for (int i = 0; i < var; ++i)
    off += static_cast<size_t>(variables[i].levels) * nlat * nlon;
  return off;
}

std::span<const double> Dataset::field(uint64_t t, int var, int level) const {
  size_t n = static_cast<size_t>(nlat) * nlon;
  return {payload.data() + t * frame_size() + var_offset(var) + level * n, n};
}

std::span<double> Dataset::field(uint64_t t, int var, int level) {
  size_t n = static_cast<size_t>(nlat) * nlon;
  return {payload.data() + t * frame_size() + var_offset(var) + level * n, n};
}

FieldSet Dataset::slice(uint64_t t) const {
  FieldSet fs;
  fs.nlat = nlat;
  fs.nlon = nlon;
  for (size_t v = 0; v < variables.size(); ++v) {
    size_t n = static_cast<size_t>(variables[v].levels) * nlat * nlon;
    const double* p = payload.data() + t * frame_size() + var_offset(static_cast<int>(v));
    fs.add(variables[v], std::vector<double>(p, p + n));
  }
  return fs;
}

void Dataset::validate() const {
  std::set<std::string> names;
  for (const auto& v : variables)
    if (!names.insert(v.name).second)
      throw std::runtime_error("container: duplicate variable name " + v.name);
  if (payload.size() != frame_size() * time.count)
    throw std::runtime_error("container: payload length mismatch");
}

void write_container(const std::string& path, const Dataset& data) {
  data.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("container: cannot open " + path + " for writing");
  os.write(kMagic, 4);
  put<uint32_t>(os, kContainerVersion);
  put<uint32_t>(os, 0);  // flags; compression reserved
  put<uint32_t>(os, static_cast<uint32_t>(data.nlat));
  put<uint32_t>(os, static_cast<uint32_t>(data.nlon));
  put<uint32_t>(os, static_cast<uint32_t>(data.sigma_levels.size()));
  for (double s : data.sigma_levels) put<double>(os, s);
  put<int64_t>(os, data.time.start_seconds);
  put<int64_t>(os, data.time.step_seconds);
  put<uint64_t>(os, data.time.count);
  put<uint32_t>(os, static_cast<uint32_t>(data.variables.size()));
  for (const auto& v : data.variables) {
    put<uint16_t>(os, static_cast<uint16_t>(v.name.size()));
    os.write(v.name.data(), static_cast<std::streamsize>(v.name.size()));
    put<uint32_t>(os, static_cast<uint32_t>(v.levels));
    put<uint8_t>(os, static_cast<uint8_t>(v.role));
  }
  os.write(reinterpret_cast<const char*>(data.payload.data()),
           static_cast<std::streamsize>(data.payload.size() * sizeof(double)));
  if (!os) throw std::runtime_error("container: write failed for " + path);
}

Dataset read_container(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("container: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("container: bad magic in " + path);
  uint32_t version = get<uint32_t>(is);
  if (version != kContainerVersion)
    throw std::runtime_error("container: unsupported version " + std::to_string(version));
  get<uint32_t>(is);  // flags
  Dataset d;
  d.nlat = static_cast<int>(get<uint32_t>(is));
  d.nlon = static_cast<int>(get<uint32_t>(is));
  uint32_t nsig = get<uint32_t>(is);
  d.sigma_levels.resize(nsig);
  for (auto& s : d.sigma_levels) s = get<double>(is);
  d.time.start_seconds = get<int64_t>(is);
  d.time.step_seconds = get<int64_t>(is);
  d.time.count = get<uint64_t>(is);
  uint32_t nvar = get<uint32_t>(is);
  std::set<std::string> names;
  for (uint32_t i = 0; i < nvar; ++i) {
    VariableSpec v;
    uint16_t len = get<uint16_t>(is);
    v.name.resize(len);
    is.read(v.name.data(), len);
    v.levels = static_cast<int>(get<uint32_t>(is));
    v.role = static_cast<Role>(get<uint8_t>(is));
    if (!is) throw std::runtime_error("container: truncated variable table");
    if (!names.insert(v.name).second)
      throw std::runtime_error("container: duplicate variable name " + v.name);
    d.variables.push_back(std::move(v));
  }
  d.payload.resize(d.frame_size() * d.time.count);
  is.read(reinterpret_cast<char*>(d.payload.data()),
          static_cast<std::streamsize>(d.payload.size() * sizeof(double)));
  if (static_cast<size_t>(is.gcount()) != d.payload.size() * sizeof(double))
    throw std::runtime_error("container: payload length mismatch in " + path);
  return d;
}

const ChannelStats& NormStats::at(const std::string& key) const {
  auto it = channels.find(key);
  if (it == channels.end()) throw std::runtime_error("norm stats: unknown channel " + key);
  return it->second;
}

NormStats compute_norm_stats(const Dataset& data) {
  if (data.time.count < 2)
    throw std::runtime_error("compute_norm_stats: need >= 2 time steps");
  NormStats stats;
  const size_t n = static_cast<size_t>(data.nlat) * data.nlon;
  const uint64_t T = data.time.count;
  for (size_t v = 0; v < data.variables.size(); ++v) {
    const auto& spec = data.variables[v];
    for (int l = 0; l < spec.levels; ++l) {
      ChannelStats cs;
      double sum = 0.0, sumsq = 0.0;
      double tsum = 0.0, tsumsq = 0.0;
      for (uint64_t t = 0; t < T; ++t) {
        auto f = data.field(t, static_cast<int>(v), l);
        for (double x : f) {
          sum += x;
          sumsq += x * x;
        }
        if (t + 1 < T) {
          auto g = data.field(t + 1, static_cast<int>(v), l);
          for (size_t i = 0; i < n; ++i) {
            double d = g[i] - f[i];
            tsum += d;
            tsumsq += d * d;
          }
        }
      }
      double cnt = static_cast<double>(T) * n;
      cs.mean = sum / cnt;
      double var = sumsq / cnt - cs.mean * cs.mean;
      cs.std = var > 0.0 ? std::sqrt(var) : 0.0;
      cs.degenerate = !(cs.std > 0.0);
      double tcnt = static_cast<double>(T - 1) * n;
      cs.tend_mean = tsum / tcnt;
      double tvar = tsumsq / tcnt - cs.tend_mean * cs.tend_mean;
      cs.tend_std = tvar > 0.0 ? std::sqrt(tvar) : 0.0;
      cs.tend_degenerate = !(cs.tend_std > 0.0);
      stats.channels[channel_key(spec.name, l, spec.levels)] = cs;
    }
  }
  return stats;
}

void write_norm_stats(const std::string& path, const NormStats& stats) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("stats: cannot open " + path + " for writing");
  os << "# channel mean std tend_mean tend_std degenerate tend_degenerate\n";
  os.precision(17);
  for (const auto& [key, cs] : stats.channels)
    os << key << ' ' << cs.mean << ' ' << cs.std << ' ' << cs.tend_mean << ' '
       << cs.tend_std << ' ' << (cs.degenerate ? 1 : 0) << ' '
       << (cs.tend_degenerate ? 1 : 0) << '\n';
}

NormStats read_norm_stats(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("stats: cannot open " + path);
  NormStats stats;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ChannelStats cs;
    int deg = 0, tdeg = 0;
    ss >> key >> cs.mean >> cs.std >> cs.tend_mean >> cs.tend_std >> deg >> tdeg;
    if (!ss) throw std::runtime_error("stats: malformed line: " + line);
    cs.degenerate = deg != 0;
    cs.tend_degenerate = tdeg != 0;
    stats.channels[key] = cs;
  }
  return stats;
}

double solar_declination_sin(double t_seconds) {
  double day = t_seconds / 86400.0;
  double decl = -23.44 * kPi / 180.0 *
                std::cos(2.0 * kPi * (day + 10.0) / kDaysPerYear);
  return std::sin(decl);
}

double tisr_analytic(double lat_deg, double lon_deg, double t_seconds) {
  constexpr double kSolarConstant = 1361.0;
  double phi = lat_deg * kPi / 180.0;
  double sdecl = solar_declination_sin(t_seconds);
  double cdecl = std::sqrt(1.0 - sdecl * sdecl);
  double day_frac = std::fmod(t_seconds, 86400.0) / 86400.0;
  // Hour angle: local solar noon when day_frac*360 + lon = 180.
  double hour_angle = 2.0 * kPi * day_frac + lon_deg * kPi / 180.0 - kPi;
  double cosz = std::sin(phi) * sdecl + std::cos(phi) * cdecl * std::cos(hour_angle);
  return cosz > 0.0 ? kSolarConstant * cosz : 0.0;
}

double co2_response_weight(double sigma_level) {
  const auto& levels = default_sigma_levels();
  double lo = levels.front(), hi = levels.back();
  return 2.0 * (sigma_level - 0.5 * (lo + hi)) / (hi - lo);
}

double synthetic_analytic_trend_per_second(const SynthConfig& config, double sigma_level) {
  double span_seconds = static_cast<double>(config.years) * kDaysPerYear * 86400.0;
  double ramp = (config.co2_end_ppm - config.co2_start_ppm) / span_seconds;  // ppm/s
  return co2_response_weight(sigma_level) * config.forcing_sensitivity * ramp;
}

namespace {

// Monthly CO2 anchors at month midpoints, linear ramp across the span.
std::vector<double> monthly_co2(const SynthConfig& cfg) {
  int nmonths = cfg.years * 12;
  std::vector<double> out(nmonths);
  double span_days = static_cast<double>(cfg.years) * kDaysPerYear;
  for (int m = 0; m < nmonths; ++m) {
    double mid_day = 30.0 * m + 15.0;
    double frac = mid_day / span_days;
    out[m] = cfg.co2_start_ppm + frac * (cfg.co2_end_ppm - cfg.co2_start_ppm);
  }
  return out;
}

double interp_monthly(const std::vector<double>& anchors, double t_seconds) {
  double t_days = t_seconds / 86400.0;
  double pos = (t_days - 15.0) / 30.0;  // index in anchor space
  if (pos <= 0.0) return anchors.front();
  if (pos >= static_cast<double>(anchors.size() - 1)) return anchors.back();
  int i = static_cast<int>(pos);
  double f = pos - i;
  return anchors[i] * (1.0 - f) + anchors[i + 1] * f;
}

// Band-limited AR(1) noise: spectral coefficients up to degree 4 advance
// as an AR(1) process and the field is synthesized each step.
class RedNoise {
 public:
  RedNoise(const SphtPlan& plan, double rho, std::mt19937_64& rng)
      : plan_(plan), rho_(rho), lmax_(std::min(4, plan.grid().truncation)) {
    int L = plan_.grid().truncation;
    state_.assign(2 * coeff_count(L), 0.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    // Warm start from the stationary distribution.
    for (int m = 0; m <= lmax_; ++m)
      for (int l = m; l <= lmax_; ++l) {
        int idx = coeff_index(l, m, L);
        double s = scale(l);
        state_[2 * idx] = s * gauss(rng);
        state_[2 * idx + 1] = (m == 0) ? 0.0 : s * gauss(rng);
      }
  }

  void step(std::mt19937_64& rng) {
    int L = plan_.grid().truncation;
    std::normal_distribution<double> gauss(0.0, 1.0);
    double innov = std::sqrt(1.0 - rho_ * rho_);
    for (int m = 0; m <= lmax_; ++m)
      for (int l = m; l <= lmax_; ++l) {
        int idx = coeff_index(l, m, L);
        double s = scale(l);
        state_[2 * idx] = rho_ * state_[2 * idx] + innov * s * gauss(rng);
        double gi = gauss(rng);  // always draw to keep the stream aligned
        if (m != 0)
          state_[2 * idx + 1] = rho_ * state_[2 * idx + 1] + innov * s * gi;
      }
  }

  std::vector<double> synthesize() const {
    SpectralCoeffs c;
    c.truncation = plan_.grid().truncation;
    c.values = state_;
    return plan_.inverse(c);
  }

 private:
  double scale(int l) const { return 0.6 / (1.0 + l); }

  const SphtPlan& plan_;
  double rho_;
  int lmax_;
  std::vector<double> state_;
};

}  // namespace

Dataset generate_synthetic_climate(const SynthConfig& config, const GridSpec& grid) {
  if (config.years < 1) throw std::invalid_argument("synth: years must be >= 1");
  if (config.noise_rho < 0.0 || config.noise_rho >= 1.0)
    throw std::invalid_argument("synth: noise_rho must be in [0,1)");
  const int nlat = grid.nlat, nlon = grid.nlon;
  const size_t n = static_cast<size_t>(nlat) * nlon;
  const int nlev = grid.nlevels();
  const uint64_t nsteps = static_cast<uint64_t>(config.years) * kStepsPerYear;

  Dataset d;
  d.nlat = nlat;
  d.nlon = nlon;
  d.sigma_levels = grid.sigma_levels;
  d.time = TimeAxis{0, 86400 / kStepsPerDay, nsteps};
  d.variables = {
      {"T", nlev, Role::Prognostic},   {"SH", nlev, Role::Prognostic},
      {"U", nlev, Role::Prognostic},   {"V", nlev, Role::Prognostic},
      {"logP", 1, Role::Prognostic},   {"TP", 1, Role::Diagnostic},
      {"orography", 1, Role::Static},  {"tisr", 1, Role::Forcing},
      {"lsm", 1, Role::Static},        {"co2", 1, Role::Forcing},
  };
  if (config.with_sst) d.variables.push_back({"sst", 1, Role::Forcing});
  d.payload.resize(d.frame_size() * nsteps);

  // Static fields: orography with a zonal backbone plus two continents;
  // land where the surface stands above 400 m.
  std::vector<double> oro(n), lsm(n);
  std::vector<double> latdeg(nlat), sinlat(nlat);
  for (int i = 0; i < nlat; ++i) {
    sinlat[i] = grid.gauss_nodes[i];
    latdeg[i] = grid.latitude_deg(i);
  }
  for (int i = 0; i < nlat; ++i)
    for (int j = 0; j < nlon; ++j) {
      double lam = 2.0 * kPi * j / nlon;
      double h = 500.0 * sinlat[i] * sinlat[i] +
                 900.0 * (0.5 + 0.5 * std::cos(2.0 * lam)) *
                     std::exp(-(latdeg[i] - 45.0) * (latdeg[i] - 45.0) / 350.0) +
                 700.0 * (0.5 - 0.5 * std::cos(lam)) *
                     std::exp(-(latdeg[i] + 30.0) * (latdeg[i] + 30.0) / 450.0);
      oro[i * nlon + j] = h;
      lsm[i * nlon + j] = h > 400.0 ? 1.0 : 0.0;
    }

  auto co2_anchors = monthly_co2(config);

  SphtPlan plan(grid);
  std::mt19937_64 rng(config.seed);
  // One noise process per prognostic channel, in a fixed channel order.
  int nchan = 4 * nlev + 1;
  std::vector<RedNoise> noise;
  noise.reserve(nchan);
  for (int c = 0; c < nchan; ++c) noise.emplace_back(plan, config.noise_rho, rng);

  const double co2_0 = config.co2_start_ppm;
  const int iT = 0, iSH = 1, iU = 2, iV = 3, ilogP = 4, iTP = 5, iOro = 6,
            iTisr = 7, iLsm = 8, iCo2 = 9, iSst = 10;

  for (uint64_t t = 0; t < nsteps; ++t) {
    double ts = static_cast<double>(d.time.start_seconds) +
                static_cast<double>(t) * d.time.step_seconds;
    double sd = solar_declination_sin(ts) / std::sin(23.44 * kPi / 180.0);
    double co2 = interp_monthly(co2_anchors, ts);
    double dco2 = config.forcing_sensitivity * (co2 - co2_0);

    if (t > 0)
      for (auto& nz : noise) nz.step(rng);
    std::vector<std::vector<double>> nfield(nchan);
    for (int c = 0; c < nchan; ++c) nfield[c] = noise[c].synthesize();

    // Planted equatorial waves, per target channel.
    auto wave_value = [&](const std::string& var, int level, int i, int j) {
      double val = 0.0;
      for (const auto& w : config.waves) {
        if (w.variable != var || w.level != level) continue;
        double lam = 2.0 * kPi * j / nlon;
        double omega = 2.0 * kPi / (w.period_days * 86400.0);
        double y = latdeg[i] / 15.0;
        double envelope = std::exp(-y * y);
        if (w.antisymmetric) envelope *= y;
        val += w.amplitude * envelope * std::cos(w.wavenumber * lam - omega * ts);
      }
      return val;
    };

    for (int l = 0; l < nlev; ++l) {
      double sig = grid.sigma_levels[l];
      double resp = co2_response_weight(sig);
      auto fT = d.field(t, iT, l);
      auto fSH = d.field(t, iSH, l);
      auto fU = d.field(t, iU, l);
      auto fV = d.field(t, iV, l);
      const auto& nT = nfield[l];
      const auto& nSH = nfield[nlev + l];
      const auto& nU = nfield[2 * nlev + l];
      const auto& nV = nfield[3 * nlev + l];
      for (int i = 0; i < nlat; ++i) {
        double x = sinlat[i];
        for (int j = 0; j < nlon; ++j) {
          size_t p = static_cast<size_t>(i) * nlon + j;
          double baseT = 230.0 + 70.0 * sig - 35.0 * sig * x * x -
                         0.006 * sig * oro[p];
          double seasT = 12.0 * sig * x * sd;
          fT[p] = baseT + seasT + resp * dco2 +
                  config.noise_amplitude * nT[p] + wave_value("T", l, i, j);

          double baseQ = 0.016 * sig * sig * sig * std::exp(-x * x / 0.2) + 1e-4;
          double q = baseQ * (1.0 + 0.15 * x * sd) +
                     0.08 * baseQ * config.noise_amplitude * nSH[p] +
                     0.001 * wave_value("SH", l, i, j);
          fSH[p] = q > 1e-6 ? q : 1e-6;

          double jet = (4.0 + 18.0 * (1.0 - sig)) * 4.0 * x * x * (1.0 - x * x);
          fU[p] = jet + 3.0 * x * sd + 2.0 * config.noise_amplitude * nU[p] +
                  wave_value("U", l, i, j);

          fV[p] = 2.0 * config.noise_amplitude * nV[p] + wave_value("V", l, i, j);
        }
      }
    }

    auto flogP = d.field(t, ilogP, 0);
    auto fTP = d.field(t, iTP, 0);
    auto fTisr = d.field(t, iTisr, 0);
    auto fCo2 = d.field(t, iCo2, 0);
    auto fOro = d.field(t, iOro, 0);
    auto fLsm = d.field(t, iLsm, 0);
    const auto& nP = nfield[4 * nlev];
    auto shBottom = d.field(t, iSH, nlev - 1);
    for (int i = 0; i < nlat; ++i) {
      for (int j = 0; j < nlon; ++j) {
        size_t p = static_cast<size_t>(i) * nlon + j;
        flogP[p] = std::log(1013.0) - oro[p] / 8435.0 +
                   0.003 * sinlat[i] * sd +
                   0.004 * config.noise_amplitude * nP[p];
        fTP[p] = 4000.0 * shBottom[p] * shBottom[p];
        fTisr[p] = tisr_analytic(latdeg[i], 360.0 * j / nlon, ts);
        fCo2[p] = co2;
        fOro[p] = oro[p];
        fLsm[p] = lsm[p];
      }
    }
    if (config.with_sst) {
      auto fSst = d.field(t, iSst, 0);
      double sig = grid.sigma_levels[nlev - 1];
      for (int i = 0; i < nlat; ++i) {
        double x = sinlat[i];
        for (int j = 0; j < nlon; ++j) {
          size_t p = static_cast<size_t>(i) * nlon + j;
          if (lsm[p] > 0.5) {
            fSst[p] = 270.0;  // land fill
          } else {
            double baseT = 230.0 + 70.0 * sig - 35.0 * sig * x * x;
            fSst[p] = baseT + 12.0 * sig * x * sd + co2_response_weight(sig) * dco2;
          }
        }
      }
    }
  }
  return d;
}

}  // namespace lucie
