#include "lucie/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace lucie {

namespace {
constexpr double kPi = 3.14159265358979323846;

int steps_per_day(const Dataset& traj) {
  if (traj.time.step_seconds <= 0 || 86400 % traj.time.step_seconds != 0)
    throw std::invalid_argument("diagnostics: step must divide one day");
  return static_cast<int>(86400 / traj.time.step_seconds);
}

int day_of_year(const Dataset& traj, uint64_t day) {
  int64_t day0 = traj.time.start_seconds / 86400;
  return static_cast<int>((day0 + static_cast<int64_t>(day)) % 360);
}

bool in_winter_window(int doy) {  // November through March, 360-day calendar
  return doy >= 300 || doy < 90;
}
}  // namespace

TrendFit fit_trend(std::span<const double> series, double step_seconds) {
  if (series.size() < 2) throw std::invalid_argument("fit_trend: need >= 2 points");
  if (!(step_seconds > 0.0))
    throw std::invalid_argument("fit_trend: constant time axis");
  const size_t n = series.size();
  const double dx = step_seconds / kSecondsPerDecade;
  double xbar = 0.5 * dx * static_cast<double>(n - 1);
  double ybar = std::accumulate(series.begin(), series.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double xd = i * dx - xbar;
    sxx += xd * xd;
    sxy += xd * (series[i] - ybar);
  }
  TrendFit fit;
  fit.slope_per_decade = sxy / sxx;
  fit.intercept = ybar - fit.slope_per_decade * xbar;
  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double r = series[i] - (fit.intercept + fit.slope_per_decade * i * dx);
    ss += r * r;
  }
  fit.residual_variance = ss / n;
  return fit;
}

ZonalMeanMap zonal_time_mean(const Dataset& traj, const std::string& variable,
                             uint64_t t_begin, uint64_t t_end) {
  int v = traj.var_index(variable);
  if (v < 0) throw std::invalid_argument("zonal_time_mean: unknown variable " + variable);
  if (t_end <= t_begin || t_end > traj.time.count)
    throw std::invalid_argument("zonal_time_mean: bad span");
  ZonalMeanMap m;
  m.variable = variable;
  m.nlev = traj.variables[v].levels;
  m.nlat = traj.nlat;
  m.values.assign(static_cast<size_t>(m.nlev) * m.nlat, 0.0);
  for (uint64_t t = t_begin; t < t_end; ++t)
    for (int l = 0; l < m.nlev; ++l) {
      auto f = traj.field(t, v, l);
      for (int i = 0; i < traj.nlat; ++i) {
        double s = 0.0;
        for (int j = 0; j < traj.nlon; ++j) s += f[static_cast<size_t>(i) * traj.nlon + j];
        m.at(l, i) += s;
      }
    }
  double inv = 1.0 / (static_cast<double>(t_end - t_begin) * traj.nlon);
  for (auto& x : m.values) x *= inv;
  return m;
}

ClimatologyBias climatology_bias(const Dataset& model, const Dataset& reference,
                                 const std::string& variable) {
  if (model.nlat != reference.nlat || model.nlon != reference.nlon)
    throw std::invalid_argument("climatology_bias: grid mismatch");
  if (model.time.count != reference.time.count)
    throw std::invalid_argument("climatology_bias: span mismatch");
  ClimatologyBias out;
  out.bias = zonal_time_mean(model, variable, 0, model.time.count);
  out.reference = zonal_time_mean(reference, variable, 0, reference.time.count);
  if (out.bias.nlev != out.reference.nlev)
    throw std::invalid_argument("climatology_bias: level mismatch");
  for (size_t i = 0; i < out.bias.values.size(); ++i)
    out.bias.values[i] -= out.reference.values[i];
  return out;
}

ZonalMeanMap climate_change_map(const Dataset& traj, const std::string& variable,
                                uint64_t early_begin, uint64_t early_end,
                                uint64_t late_begin, uint64_t late_end) {
  const bool identical = early_begin == late_begin && early_end == late_end;
  if (!identical && early_begin < late_end && late_begin < early_end)
    throw std::invalid_argument("climate_change_map: overlapping spans");
  ZonalMeanMap late = zonal_time_mean(traj, variable, late_begin, late_end);
  ZonalMeanMap early = zonal_time_mean(traj, variable, early_begin, early_end);
  for (size_t i = 0; i < late.values.size(); ++i) late.values[i] -= early.values[i];
  return late;
}

double WKSpectrum::power(bool symmetric_part, int k, int ifreq) const {
  const auto& arr = symmetric_part ? symmetric : antisymmetric;
  size_t row = static_cast<size_t>(k + params.kmax);
  return arr[row * nfreq + ifreq];
}

namespace {
// One 1-2-1 smoothing pass along the frequency axis, then the wavenumber
// axis, with edge replication.
void smooth_121(std::vector<double>& a, int nk, int nf) {
  std::vector<double> tmp(a.size());
  for (int k = 0; k < nk; ++k)
    for (int f = 0; f < nf; ++f) {
      double lo = a[static_cast<size_t>(k) * nf + std::max(0, f - 1)];
      double mid = a[static_cast<size_t>(k) * nf + f];
      double hi = a[static_cast<size_t>(k) * nf + std::min(nf - 1, f + 1)];
      tmp[static_cast<size_t>(k) * nf + f] = 0.25 * lo + 0.5 * mid + 0.25 * hi;
    }
  for (int k = 0; k < nk; ++k)
    for (int f = 0; f < nf; ++f) {
      double lo = tmp[static_cast<size_t>(std::max(0, k - 1)) * nf + f];
      double mid = tmp[static_cast<size_t>(k) * nf + f];
      double hi = tmp[static_cast<size_t>(std::min(nk - 1, k + 1)) * nf + f];
      a[static_cast<size_t>(k) * nf + f] = 0.25 * lo + 0.5 * mid + 0.25 * hi;
    }
}
}  // namespace

WKSpectrum wheeler_kiladis(const Dataset& traj, const std::string& variable,
                           int level, const GridSpec& grid,
                           const WKParams& params) {
  int v = traj.var_index(variable);
  if (v < 0) throw std::invalid_argument("wheeler_kiladis: unknown variable");
  if (level < 0 || level >= traj.variables[v].levels)
    throw std::invalid_argument("wheeler_kiladis: level out of range");
  const int spd = steps_per_day(traj);
  const int nlat = traj.nlat, nlon = traj.nlon;
  const int nt = params.segment_days * spd;
  const uint64_t stride =
      static_cast<uint64_t>(params.segment_days - params.overlap_days) * spd;
  if (params.overlap_days >= params.segment_days || stride == 0)
    throw std::invalid_argument("wheeler_kiladis: bad segmentation");
  if (traj.time.count < static_cast<uint64_t>(nt))
    throw std::invalid_argument("wheeler_kiladis: segment longer than trajectory");

  // Mirrored latitude pairs inside the equatorial band (northern row first).
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < nlat / 2; ++i) {
    double lat = grid.latitude_deg(i);
    if (lat > 0.0 && lat <= params.band_deg) pairs.emplace_back(i, nlat - 1 - i);
  }
  if (pairs.empty())
    throw std::invalid_argument("wheeler_kiladis: band contains no latitude pairs");

  WKSpectrum spec;
  spec.params = params;
  spec.nfreq = nt / 2 + 1;
  spec.freq_cpd.resize(spec.nfreq);
  for (int m = 0; m < spec.nfreq; ++m)
    spec.freq_cpd[m] = static_cast<double>(m) / params.segment_days;
  const int nk = 2 * params.kmax + 1;
  spec.symmetric.assign(static_cast<size_t>(nk) * spec.nfreq, 0.0);
  spec.antisymmetric.assign(static_cast<size_t>(nk) * spec.nfreq, 0.0);

  std::vector<double> hann(nt);
  for (int t = 0; t < nt; ++t)
    hann[t] = 0.5 * (1.0 - std::cos(2.0 * kPi * t / (nt - 1)));
  // Trig tables: longitude DFT e^{-i 2pi k j / nlon}, time DFT e^{+i 2pi m t / nt}.
  std::vector<double> clon(static_cast<size_t>(nk) * nlon), slon(clon.size());
  for (int ki = 0; ki < nk; ++ki) {
    int k = ki - params.kmax;
    for (int j = 0; j < nlon; ++j) {
      double ph = -2.0 * kPi * k * j / nlon;
      clon[static_cast<size_t>(ki) * nlon + j] = std::cos(ph);
      slon[static_cast<size_t>(ki) * nlon + j] = std::sin(ph);
    }
  }
  std::vector<double> ct(static_cast<size_t>(spec.nfreq) * nt), st(ct.size());
  for (int m = 0; m < spec.nfreq; ++m)
    for (int t = 0; t < nt; ++t) {
      double ph = 2.0 * kPi * m * t / nt;
      ct[static_cast<size_t>(m) * nt + t] = std::cos(ph);
      st[static_cast<size_t>(m) * nt + t] = std::sin(ph);
    }

  std::vector<double> comp(static_cast<size_t>(nt) * nlon);
  std::vector<double> lr(static_cast<size_t>(nt) * nk), li(lr.size());
  const double norm = 1.0 / (static_cast<double>(nlon) * nt);
  for (uint64_t s0 = 0; s0 + nt <= traj.time.count; s0 += stride) {
    ++spec.nsegments;
    for (const auto& [in, is] : pairs) {
      for (int part = 0; part < 2; ++part) {  // 0: symmetric, 1: antisymmetric
        for (int t = 0; t < nt; ++t) {
          auto f = traj.field(s0 + t, v, level);
          const double* north = f.data() + static_cast<size_t>(in) * nlon;
          const double* south = f.data() + static_cast<size_t>(is) * nlon;
          for (int j = 0; j < nlon; ++j)
            comp[static_cast<size_t>(t) * nlon + j] =
                part == 0 ? 0.5 * (north[j] + south[j]) : 0.5 * (north[j] - south[j]);
        }
        // Remove the per-longitude segment mean, then taper in time.
        for (int j = 0; j < nlon; ++j) {
          double mean = 0.0;
          for (int t = 0; t < nt; ++t) mean += comp[static_cast<size_t>(t) * nlon + j];
          mean /= nt;
          for (int t = 0; t < nt; ++t)
            comp[static_cast<size_t>(t) * nlon + j] =
                (comp[static_cast<size_t>(t) * nlon + j] - mean) * hann[t];
        }
        // Longitude DFT first, then the time DFT per wavenumber.
        for (int t = 0; t < nt; ++t)
          for (int ki = 0; ki < nk; ++ki) {
            double re = 0.0, im = 0.0;
            const double* row = comp.data() + static_cast<size_t>(t) * nlon;
            const double* cr = clon.data() + static_cast<size_t>(ki) * nlon;
            const double* ci = slon.data() + static_cast<size_t>(ki) * nlon;
            for (int j = 0; j < nlon; ++j) {
              re += row[j] * cr[j];
              im += row[j] * ci[j];
            }
            lr[static_cast<size_t>(t) * nk + ki] = re;
            li[static_cast<size_t>(t) * nk + ki] = im;
          }
        auto& acc = part == 0 ? spec.symmetric : spec.antisymmetric;
        for (int ki = 0; ki < nk; ++ki) {
          int k = ki - params.kmax;
          if (std::abs(k) > nlon / 2) continue;
          for (int m = 0; m < spec.nfreq; ++m) {
            double re = 0.0, im = 0.0;
            const double* cm = ct.data() + static_cast<size_t>(m) * nt;
            const double* sm = st.data() + static_cast<size_t>(m) * nt;
            for (int t = 0; t < nt; ++t) {
              double xr = lr[static_cast<size_t>(t) * nk + ki];
              double xi = li[static_cast<size_t>(t) * nk + ki];
              re += xr * cm[t] - xi * sm[t];
              im += xr * sm[t] + xi * cm[t];
            }
            re *= norm;
            im *= norm;
            acc[static_cast<size_t>(ki) * spec.nfreq + m] += re * re + im * im;
          }
        }
      }
    }
  }
  double inv = 1.0 / (static_cast<double>(spec.nsegments) * pairs.size());
  for (auto& x : spec.symmetric) x *= inv;
  for (auto& x : spec.antisymmetric) x *= inv;

  // Background: smoothed mean of both parts; normalized spectra divide by it.
  std::vector<double> bg(spec.symmetric.size());
  for (size_t i = 0; i < bg.size(); ++i)
    bg[i] = 0.5 * (spec.symmetric[i] + spec.antisymmetric[i]);
  for (int p = 0; p < params.background_passes; ++p) smooth_121(bg, nk, spec.nfreq);
  spec.symmetric_normalized.resize(bg.size());
  spec.antisymmetric_normalized.resize(bg.size());
  for (size_t i = 0; i < bg.size(); ++i) {
    double d = bg[i] > 0.0 ? bg[i] : 1.0;
    spec.symmetric_normalized[i] = spec.symmetric[i] / d;
    spec.antisymmetric_normalized[i] = spec.antisymmetric[i] / d;
  }
  return spec;
}

namespace {
// Cyclic Jacobi eigensolver for a dense symmetric matrix; returns
// eigenvalues descending with matching eigenvector columns.
void jacobi_eigh(std::vector<double> a, int n, std::vector<double>& eigval,
                 std::vector<double>& eigvec) {
  eigvec.assign(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) eigvec[static_cast<size_t>(i) * n + i] = 1.0;
  auto A = [&](int r, int c) -> double& { return a[static_cast<size_t>(r) * n + c]; };
  auto V = [&](int r, int c) -> double& {
    return eigvec[static_cast<size_t>(r) * n + c];
  };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (off < 1e-28 * n * n) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        double apq = A(p, q);
        if (std::abs(apq) < 1e-300) continue;
        double theta = 0.5 * (A(q, q) - A(p, p)) / apq;
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int r = 0; r < n; ++r) {
          double arp = A(r, p), arq = A(r, q);
          A(r, p) = c * arp - s * arq;
          A(r, q) = s * arp + c * arq;
        }
        for (int cidx = 0; cidx < n; ++cidx) {
          double apc = A(p, cidx), aqc = A(q, cidx);
          A(p, cidx) = c * apc - s * aqc;
          A(q, cidx) = s * apc + c * aqc;
        }
        for (int r = 0; r < n; ++r) {
          double vrp = V(r, p), vrq = V(r, q);
          V(r, p) = c * vrp - s * vrq;
          V(r, q) = s * vrp + c * vrq;
        }
      }
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return A(x, x) > A(y, y); });
  eigval.resize(n);
  std::vector<double> sorted(eigvec.size());
  for (int c = 0; c < n; ++c) {
    eigval[c] = std::max(0.0, A(order[c], order[c]));
    for (int r = 0; r < n; ++r)
      sorted[static_cast<size_t>(r) * n + c] = V(r, order[c]);
  }
  eigvec.swap(sorted);
}
}  // namespace

EOFResult eof_modes(const std::vector<double>& anomalies, int ntime, int nspace,
                    std::span<const double> weights,
                    std::span<const double> polar_cap_mask) {
  if (ntime < 2 || nspace < 1)
    throw std::invalid_argument("eof_modes: need >= 2 samples");
  if (weights.size() != static_cast<size_t>(nspace))
    throw std::invalid_argument("eof_modes: weight shape mismatch");
  std::vector<double> wa(anomalies.size());
  for (int t = 0; t < ntime; ++t)
    for (int x = 0; x < nspace; ++x)
      wa[static_cast<size_t>(t) * nspace + x] =
          anomalies[static_cast<size_t>(t) * nspace + x] * weights[x];

  // Eigendecomposition of the smaller Gram matrix.
  const bool time_side = ntime <= nspace;
  const int n = time_side ? ntime : nspace;
  std::vector<double> gram(static_cast<size_t>(n) * n, 0.0);
  for (int r = 0; r < n; ++r)
    for (int c = r; c < n; ++c) {
      double s = 0.0;
      if (time_side)
        for (int x = 0; x < nspace; ++x)
          s += wa[static_cast<size_t>(r) * nspace + x] *
               wa[static_cast<size_t>(c) * nspace + x];
      else
        for (int t = 0; t < ntime; ++t)
          s += wa[static_cast<size_t>(t) * nspace + r] *
               wa[static_cast<size_t>(t) * nspace + c];
      gram[static_cast<size_t>(r) * n + c] = s;
      gram[static_cast<size_t>(c) * n + r] = s;
    }
  std::vector<double> eigval, eigvec;
  jacobi_eigh(std::move(gram), n, eigval, eigvec);
  double total = std::accumulate(eigval.begin(), eigval.end(), 0.0);
  if (total <= 0.0) throw std::invalid_argument("eof_modes: zero-variance input");

  EOFResult res;
  res.explained.resize(n);
  for (int i = 0; i < n; ++i) res.explained[i] = eigval[i] / total;
  res.explained_variance = res.explained[0];
  res.degenerate = n > 1 && (eigval[0] - eigval[1]) < 1e-8 * eigval[0];

  res.pattern.assign(nspace, 0.0);
  res.pc.assign(ntime, 0.0);
  if (time_side) {
    double sigma = std::sqrt(eigval[0]);
    for (int t = 0; t < ntime; ++t) {
      double u = eigvec[static_cast<size_t>(t) * n + 0];
      res.pc[t] = sigma * u;
      for (int x = 0; x < nspace; ++x)
        res.pattern[x] += wa[static_cast<size_t>(t) * nspace + x] * u;
    }
    double pn = std::sqrt(std::inner_product(res.pattern.begin(), res.pattern.end(),
                                             res.pattern.begin(), 0.0));
    if (pn > 0.0)
      for (auto& x : res.pattern) x /= pn;
  } else {
    for (int x = 0; x < nspace; ++x)
      res.pattern[x] = eigvec[static_cast<size_t>(x) * n + 0];
    for (int t = 0; t < ntime; ++t)
      for (int x = 0; x < nspace; ++x)
        res.pc[t] += wa[static_cast<size_t>(t) * nspace + x] * res.pattern[x];
  }

  // Sign convention: the polar-cap mean loading is negative.
  double cap = 0.0;
  double capn = 0.0;
  for (int x = 0; x < nspace; ++x)
    if (x < static_cast<int>(polar_cap_mask.size()) && polar_cap_mask[x] > 0.0) {
      cap += res.pattern[x];
      capn += 1.0;
    }
  double pivot = capn > 0.0 ? cap / capn : res.pattern[0];
  if (pivot > 0.0) {
    res.sign_flipped = true;
    for (auto& x : res.pattern) x = -x;
    for (auto& x : res.pc) x = -x;
  }
  return res;
}

EOFResult leading_eof(const Dataset& traj, const std::string& variable,
                      Hemisphere hemisphere, const GridSpec& grid) {
  int v = traj.var_index(variable);
  if (v < 0) throw std::invalid_argument("leading_eof: unknown variable");
  const int spd = steps_per_day(traj);
  const uint64_t ndays = traj.time.count / spd;
  const int nlon = traj.nlon;

  std::vector<int> rows;
  for (int i = 0; i < traj.nlat; ++i) {
    double lat = grid.latitude_deg(i);
    if ((hemisphere == Hemisphere::North && lat >= 20.0) ||
        (hemisphere == Hemisphere::South && lat <= -20.0))
      rows.push_back(i);
  }
  const int nspace = static_cast<int>(rows.size()) * nlon;

  // Daily means on the hemisphere rows.
  std::vector<double> daily(static_cast<size_t>(ndays) * nspace, 0.0);
  for (uint64_t d = 0; d < ndays; ++d) {
    for (int s = 0; s < spd; ++s) {
      auto f = traj.field(d * spd + s, v, 0);
      for (size_t r = 0; r < rows.size(); ++r)
        for (int j = 0; j < nlon; ++j)
          daily[d * nspace + r * nlon + j] +=
              f[static_cast<size_t>(rows[r]) * nlon + j];
    }
  }
  for (auto& x : daily) x /= spd;

  // Deseasonalize against the day-of-year climatology.
  std::vector<double> clim(static_cast<size_t>(360) * nspace, 0.0);
  std::vector<int> count(360, 0);
  for (uint64_t d = 0; d < ndays; ++d) {
    int doy = day_of_year(traj, d);
    ++count[doy];
    for (int x = 0; x < nspace; ++x)
      clim[static_cast<size_t>(doy) * nspace + x] += daily[d * nspace + x];
  }
  for (int doy = 0; doy < 360; ++doy)
    if (count[doy] > 0)
      for (int x = 0; x < nspace; ++x)
        clim[static_cast<size_t>(doy) * nspace + x] /= count[doy];

  // Winter (Dec-Feb) anomalies; December belongs to the following season.
  std::vector<double> anomalies;
  int nwinter = 0;
  int seasons = 0;
  int prev_doy = -1;
  for (uint64_t d = 0; d < ndays; ++d) {
    int doy = day_of_year(traj, d);
    if (doy >= 330 || doy < 60) {
      if (doy == 330 || (prev_doy != -1 && !(prev_doy >= 330 || prev_doy < 60)))
        ++seasons;
      for (int x = 0; x < nspace; ++x)
        anomalies.push_back(daily[d * nspace + x] -
                            clim[static_cast<size_t>(doy) * nspace + x]);
      ++nwinter;
      prev_doy = doy;
    } else {
      prev_doy = doy;
    }
  }
  if (seasons < 2)
    throw std::invalid_argument("leading_eof: need at least two winter seasons");

  std::vector<double> weights(nspace), cap(nspace, 0.0);
  for (size_t r = 0; r < rows.size(); ++r) {
    double lat = grid.latitude_deg(rows[r]);
    double w = std::sqrt(std::max(0.0, std::cos(lat * kPi / 180.0)));
    for (int j = 0; j < nlon; ++j) {
      weights[r * nlon + j] = w;
      if (std::abs(lat) >= 70.0) cap[r * nlon + j] = 1.0;
    }
  }
  EOFResult res = eof_modes(anomalies, nwinter, nspace, weights, cap);
  res.lat_rows = rows;
  return res;
}

std::vector<SSWEvent> detect_ssw_events(std::span<const double> u_index,
                                        std::span<const double> t_index,
                                        std::span<const double> t_clim,
                                        int day0_of_year, const SSWParams& params) {
  std::vector<SSWEvent> events;
  double t_mean = 0.0;
  if (t_clim.empty() && !t_index.empty())
    t_mean = std::accumulate(t_index.begin(), t_index.end(), 0.0) / t_index.size();
  int westerly_run = 0;
  size_t d = 0;
  while (d < u_index.size()) {
    if (u_index[d] >= 0.0) {
      ++westerly_run;
      ++d;
      continue;
    }
    size_t run = 0;
    while (d + run < u_index.size() && u_index[d + run] < 0.0) ++run;
    int doy = (day0_of_year + static_cast<int>(d)) % 360;
    if (westerly_run >= params.min_westerly_days &&
        run >= static_cast<size_t>(params.min_reversal_days) && in_winter_window(doy)) {
      SSWEvent ev;
      ev.onset_day = static_cast<int>(d);
      ev.duration_days = static_cast<int>(run);
      ev.peak_temp_anomaly = -std::numeric_limits<double>::infinity();
      for (size_t r = 0; r < run && d + r < t_index.size(); ++r) {
        int rdoy = (day0_of_year + static_cast<int>(d + r)) % 360;
        double base = t_clim.empty() ? t_mean : t_clim[rdoy];
        ev.peak_temp_anomaly = std::max(ev.peak_temp_anomaly, t_index[d + r] - base);
      }
      events.push_back(ev);
    }
    d += run;
    westerly_run = 0;
  }
  return events;
}

SSWDiagnostics ssw_diagnostics(const Dataset& traj, const GridSpec& grid,
                               const SSWParams& params) {
  int iu = traj.var_index("U");
  int it = traj.var_index("T");
  if (iu < 0 || it < 0) throw std::invalid_argument("ssw_diagnostics: need U and T");
  const int spd = steps_per_day(traj);
  const uint64_t ndays = traj.time.count / spd;
  if (ndays == 0) throw std::invalid_argument("ssw_diagnostics: trajectory < 1 day");
  const int nlon = traj.nlon;

  std::vector<int> u_rows, t_rows;
  double u_wsum = 0.0, t_wsum = 0.0;
  for (int i = 0; i < traj.nlat; ++i) {
    double lat = grid.latitude_deg(i);
    if (lat >= 55.0 && lat <= 65.0) {
      u_rows.push_back(i);
      u_wsum += grid.gauss_weights[i];
    }
    if (lat >= 60.0) {
      t_rows.push_back(i);
      t_wsum += grid.gauss_weights[i];
    }
  }
  if (u_rows.empty() || t_rows.empty())
    throw std::invalid_argument("ssw_diagnostics: grid too coarse for index bands");

  SSWDiagnostics out;
  out.u_index.resize(ndays);
  out.t_index.resize(ndays);
  auto band_mean = [&](int var, uint64_t day, const std::vector<int>& rows,
                       double wsum) {
    double acc = 0.0;
    for (int s = 0; s < spd; ++s) {
      auto f = traj.field(day * spd + s, var, 0);  // level 0 = top sigma level
      for (int i : rows) {
        double zm = 0.0;
        for (int j = 0; j < nlon; ++j) zm += f[static_cast<size_t>(i) * nlon + j];
        acc += grid.gauss_weights[i] * zm / nlon;
      }
    }
    return acc / (wsum * spd);
  };
  for (uint64_t d = 0; d < ndays; ++d) {
    out.u_index[d] = band_mean(iu, d, u_rows, u_wsum);
    out.t_index[d] = band_mean(it, d, t_rows, t_wsum);
  }

  if (ndays >= 360) {
    out.has_climatology = true;
    out.u_clim.assign(360, 0.0);
    out.u_sigma.assign(360, 0.0);
    out.t_clim.assign(360, 0.0);
    out.t_sigma.assign(360, 0.0);
    std::vector<int> count(360, 0);
    for (uint64_t d = 0; d < ndays; ++d) {
      int doy = day_of_year(traj, d);
      ++count[doy];
      out.u_clim[doy] += out.u_index[d];
      out.t_clim[doy] += out.t_index[d];
    }
    for (int doy = 0; doy < 360; ++doy) {
      out.u_clim[doy] /= count[doy];
      out.t_clim[doy] /= count[doy];
    }
    for (uint64_t d = 0; d < ndays; ++d) {
      int doy = day_of_year(traj, d);
      double du = out.u_index[d] - out.u_clim[doy];
      double dt = out.t_index[d] - out.t_clim[doy];
      out.u_sigma[doy] += du * du;
      out.t_sigma[doy] += dt * dt;
    }
    for (int doy = 0; doy < 360; ++doy) {
      out.u_sigma[doy] = std::sqrt(out.u_sigma[doy] / count[doy]);
      out.t_sigma[doy] = std::sqrt(out.t_sigma[doy] / count[doy]);
    }
  }
  out.events = detect_ssw_events(out.u_index, out.t_index, out.t_clim,
                                 day_of_year(traj, 0), params);
  return out;
}

LogPdf log_pdf(std::span<const double> values, std::span<const double> weights,
               const std::vector<double>& edges) {
  if (edges.size() < 2) throw std::invalid_argument("log_pdf: need >= 1 bin");
  if (values.size() != weights.size() || values.empty())
    throw std::invalid_argument("log_pdf: empty or mismatched samples");
  const int nbins = static_cast<int>(edges.size()) - 1;
  std::vector<double> mass(nbins, 0.0);
  double total = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    double x = values[i];
    if (x < edges.front() || x >= edges.back()) continue;
    auto it = std::upper_bound(edges.begin(), edges.end(), x);
    int b = static_cast<int>(it - edges.begin()) - 1;
    mass[b] += weights[i];
    total += weights[i];
  }
  if (total <= 0.0) throw std::invalid_argument("log_pdf: no in-range samples");

  LogPdf pdf;
  pdf.edges = edges;
  pdf.log10_density.resize(nbins);
  int occupied = 0;
  for (int b = 0; b < nbins; ++b) {
    double density = mass[b] / (total * (edges[b + 1] - edges[b]));
    if (mass[b] > 0.0) ++occupied;
    pdf.log10_density[b] = density > 0.0
                               ? std::log10(density)
                               : -std::numeric_limits<double>::infinity();
  }
  pdf.single_bin = occupied == 1;
  return pdf;
}

LogPdf log_pdf_field(const Dataset& traj, const std::string& variable, int level,
                     const GridSpec& grid, const std::vector<double>& edges) {
  int v = traj.var_index(variable);
  if (v < 0) throw std::invalid_argument("log_pdf_field: unknown variable");
  std::vector<double> values, weights;
  values.reserve(traj.time.count * traj.nlat * traj.nlon);
  weights.reserve(values.capacity());
  for (uint64_t t = 0; t < traj.time.count; ++t) {
    auto f = traj.field(t, v, level);
    for (int i = 0; i < traj.nlat; ++i)
      for (int j = 0; j < traj.nlon; ++j) {
        values.push_back(f[static_cast<size_t>(i) * traj.nlon + j]);
        weights.push_back(grid.gauss_weights[i]);
      }
  }
  return log_pdf(values, weights, edges);
}

std::vector<double> make_edges(double lo, double hi, int nbins) {
  if (!(hi > lo) || nbins < 1) throw std::invalid_argument("make_edges: bad range");
  std::vector<double> edges(nbins + 1);
  for (int b = 0; b <= nbins; ++b)
    edges[b] = lo + (hi - lo) * static_cast<double>(b) / nbins;
  return edges;
}

void write_table(const std::string& path, const std::string& title,
                 const std::vector<std::string>& columns,
                 const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_table: cannot open " + path);
  out << "# lucie-report v" << kReportVersion << "\n";
  out << "# title: " << title << "\n";
  out << "# columns:";
  for (const auto& c : columns) out << ' ' << c;
  out << "\n";
  out.precision(17);
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? " " : "") << row[i];
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_table: write failed for " + path);
}

namespace {
std::pair<double, double> finite_range(std::span<const double> v) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double x : v)
    if (std::isfinite(x)) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  if (!(hi > lo)) {
    lo = std::isfinite(lo) ? lo - 1.0 : -1.0;
    hi = lo + 2.0;
  }
  return {lo, hi};
}
}  // namespace

void render_lines_svg(const std::string& path, std::span<const double> x,
                      const std::vector<std::vector<double>>& series,
                      const std::vector<std::string>& labels,
                      const std::string& title) {
  const int W = 720, H = 420, M = 50;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("render_lines_svg: cannot open " + path);
  double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
  for (const auto& s : series) {
    auto [lo, hi] = finite_range(s);
    ylo = std::min(ylo, lo);
    yhi = std::max(yhi, hi);
  }
  if (!(yhi > ylo)) yhi = ylo + 1.0;
  auto [xlo, xhi] = finite_range(x);
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>"
      << title << "</text>\n";
  for (size_t s = 0; s < series.size(); ++s) {
    out << "<polyline fill='none' stroke='" << kColors[s % 6]
        << "' stroke-width='1.2' points='";
    for (size_t i = 0; i < series[s].size() && i < x.size(); ++i) {
      if (!std::isfinite(series[s][i])) continue;
      double px = M + (W - 2 * M) * (x[i] - xlo) / (xhi - xlo);
      double py = H - M - (H - 2 * M) * (series[s][i] - ylo) / (yhi - ylo);
      out << px << ',' << py << ' ';
    }
    out << "'/>\n";
    if (s < labels.size())
      out << "<text x='" << W - M + 4 << "' y='" << 40 + 16 * s
          << "' font-size='11' fill='" << kColors[s % 6] << "'>" << labels[s]
          << "</text>\n";
  }
  out << "</svg>\n";
}

void render_heatmap_svg(const std::string& path, const std::vector<double>& values,
                        int nrows, int ncols, const std::string& title) {
  if (values.size() != static_cast<size_t>(nrows) * ncols)
    throw std::invalid_argument("render_heatmap_svg: shape mismatch");
  const int cell = std::max(2, 600 / std::max(nrows, ncols));
  const int W = ncols * cell + 100, H = nrows * cell + 60;
  auto [lo, hi] = finite_range(values);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("render_heatmap_svg: cannot open " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>"
      << title << "</text>\n";
  for (int r = 0; r < nrows; ++r)
    for (int c = 0; c < ncols; ++c) {
      double v = values[static_cast<size_t>(r) * ncols + c];
      double u = std::isfinite(v) ? (v - lo) / (hi - lo) : 0.0;
      // Blue-white-red ramp.
      int red = static_cast<int>(255 * std::min(1.0, 2.0 * u));
      int blue = static_cast<int>(255 * std::min(1.0, 2.0 * (1.0 - u)));
      int green = std::min(red, blue);
      out << "<rect x='" << 50 + c * cell << "' y='" << 40 + r * cell << "' width='"
          << cell << "' height='" << cell << "' fill='rgb(" << red << ',' << green
          << ',' << blue << ")'/>\n";
    }
  out << "</svg>\n";
}

}  // namespace lucie
