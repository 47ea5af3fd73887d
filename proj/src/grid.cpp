#include "lucie/grid.hpp"

#include <cmath>
#include <numbers>

namespace lucie {

namespace {

constexpr double kPi = std::numbers::pi;

// Legendre polynomial P_n and derivative at x, by the three-term recurrence.
void legendre_poly(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= n; ++k) {
    double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  p = (n == 0) ? p0 : p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace

double GridSpec::latitude_deg(int i) const {
  return std::asin(gauss_nodes[i]) * 180.0 / kPi;
}

const std::vector<double>& default_sigma_levels() {
  static const std::vector<double> levels = {0.025, 0.095, 0.20, 0.34,
                                             0.51,  0.685, 0.835, 0.95};
  return levels;
}

GridSpec build_grid(int truncation, int nlat, int nlon,
                    std::vector<double> sigma_levels) {
  if (truncation < 1) throw std::invalid_argument("build_grid: truncation must be >= 1");
  if (nlon < 2 * truncation + 1)
    throw std::invalid_argument("build_grid: nlon < 2*truncation+1 (aliasing)");
  if (nlat < truncation + 1)
    throw std::invalid_argument("build_grid: nlat < truncation+1 (aliasing)");
  for (size_t i = 0; i < sigma_levels.size(); ++i) {
    if (sigma_levels[i] <= 0.0 || sigma_levels[i] > 1.0)
      throw std::invalid_argument("build_grid: sigma level outside (0,1]");
    if (i > 0 && sigma_levels[i] <= sigma_levels[i - 1])
      throw std::invalid_argument("build_grid: sigma levels not strictly increasing");
  }

  GridSpec g;
  g.nlat = nlat;
  g.nlon = nlon;
  g.truncation = truncation;
  g.sigma_levels = std::move(sigma_levels);
  g.gauss_nodes.resize(nlat);
  g.gauss_weights.resize(nlat);

  // Newton iteration on the roots of P_nlat, seeded by the Chebyshev-like
  // asymptotic guess. Roots come out in decreasing order (north first).
  for (int i = 0; i < nlat; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (nlat + 0.5));
    double p, dp;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      legendre_poly(nlat, x, p, dp);
      double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) {
        converged = true;
        break;
      }
    }
    if (!converged) throw std::runtime_error("build_grid: Newton iteration did not converge");
    legendre_poly(nlat, x, p, dp);
    g.gauss_nodes[i] = x;
    g.gauss_weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  // Enforce exact antisymmetry of the node set.
  for (int i = 0; i < nlat / 2; ++i) {
    double a = 0.5 * (g.gauss_nodes[i] - g.gauss_nodes[nlat - 1 - i]);
    g.gauss_nodes[i] = a;
    g.gauss_nodes[nlat - 1 - i] = -a;
    double w = 0.5 * (g.gauss_weights[i] + g.gauss_weights[nlat - 1 - i]);
    g.gauss_weights[i] = w;
    g.gauss_weights[nlat - 1 - i] = w;
  }
  if (nlat % 2 == 1) g.gauss_nodes[nlat / 2] = 0.0;
  return g;
}

double legendre_normalized(int l, int m, double x) {
  // P~_mm seed, then upward recurrence in l.
  double pmm = 1.0 / std::sqrt(4.0 * kPi);
  double sx = std::sqrt((1.0 - x) * (1.0 + x));
  for (int k = 1; k <= m; ++k)
    pmm *= -std::sqrt((2.0 * k + 1.0) / (2.0 * k)) * sx;
  if (l == m) return pmm;
  double pm1 = std::sqrt(2.0 * m + 3.0) * x * pmm;
  if (l == m + 1) return pm1;
  for (int k = m + 2; k <= l; ++k) {
    double a = std::sqrt((4.0 * k * k - 1.0) / (double(k) * k - double(m) * m));
    double b = std::sqrt(((k - 1.0) * (k - 1.0) - double(m) * m) /
                         (4.0 * (k - 1.0) * (k - 1.0) - 1.0));
    double pk = a * (x * pm1 - b * pmm);
    pmm = pm1;
    pm1 = pk;
  }
  return pm1;
}

SphtPlan::SphtPlan(GridSpec grid) : grid_(std::move(grid)) {
  const int L = grid_.truncation;
  ncoef_ = coeff_count(L);
  plm_.resize(static_cast<size_t>(grid_.nlat) * ncoef_);
  for (int i = 0; i < grid_.nlat; ++i) {
    double x = grid_.gauss_nodes[i];
    for (int m = 0; m <= L; ++m) {
      // Recurrence inline over l for this m (avoids re-seeding per l).
      double pmm = 1.0 / std::sqrt(4.0 * kPi);
      double sx = std::sqrt((1.0 - x) * (1.0 + x));
      for (int k = 1; k <= m; ++k)
        pmm *= -std::sqrt((2.0 * k + 1.0) / (2.0 * k)) * sx;
      plm_[static_cast<size_t>(i) * ncoef_ + coeff_index(m, m, L)] = pmm;
      if (m + 1 <= L) {
        double pm1 = std::sqrt(2.0 * m + 3.0) * x * pmm;
        plm_[static_cast<size_t>(i) * ncoef_ + coeff_index(m + 1, m, L)] = pm1;
        for (int l = m + 2; l <= L; ++l) {
          double a = std::sqrt((4.0 * l * l - 1.0) / (double(l) * l - double(m) * m));
          double b = std::sqrt(((l - 1.0) * (l - 1.0) - double(m) * m) /
                               (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
          double pl = a * (x * pm1 - b * pmm);
          plm_[static_cast<size_t>(i) * ncoef_ + coeff_index(l, m, L)] = pl;
          pmm = pm1;
          pm1 = pl;
        }
      }
    }
  }
  cos_mj_.resize(static_cast<size_t>(L + 1) * grid_.nlon);
  sin_mj_.resize(static_cast<size_t>(L + 1) * grid_.nlon);
  for (int m = 0; m <= L; ++m)
    for (int j = 0; j < grid_.nlon; ++j) {
      double phi = 2.0 * kPi * j / grid_.nlon;
      cos_mj_[static_cast<size_t>(m) * grid_.nlon + j] = std::cos(m * phi);
      sin_mj_[static_cast<size_t>(m) * grid_.nlon + j] = std::sin(m * phi);
    }
}

SpectralCoeffs SphtPlan::forward(std::span<const double> field) const {
  if (static_cast<int>(field.size()) != grid_.npoints())
    throw std::invalid_argument("sht_forward: field shape mismatch");
  for (double v : field)
    if (!std::isfinite(v)) throw std::invalid_argument("sht_forward: non-finite input");

  const int L = grid_.truncation, nlat = grid_.nlat, nlon = grid_.nlon;
  SpectralCoeffs out;
  out.truncation = L;
  out.values.assign(2 * ncoef_, 0.0);

  // Zonal DFT per latitude: F_m(i) = (2pi/nlon) * sum_j f(i,j) e^{-im phi_j}
  std::vector<double> fm_re(static_cast<size_t>(nlat) * (L + 1));
  std::vector<double> fm_im(static_cast<size_t>(nlat) * (L + 1));
  const double dftw = 2.0 * kPi / nlon;
  for (int i = 0; i < nlat; ++i) {
    const double* row = field.data() + static_cast<size_t>(i) * nlon;
    for (int m = 0; m <= L; ++m) {
      const double* cm = cos_mj_.data() + static_cast<size_t>(m) * nlon;
      const double* sm = sin_mj_.data() + static_cast<size_t>(m) * nlon;
      double re = 0.0, im = 0.0;
      for (int j = 0; j < nlon; ++j) {
        re += row[j] * cm[j];
        im -= row[j] * sm[j];
      }
      fm_re[static_cast<size_t>(i) * (L + 1) + m] = dftw * re;
      fm_im[static_cast<size_t>(i) * (L + 1) + m] = dftw * im;
    }
  }
  // Legendre integration: c_lm = sum_i w_i P~_lm(x_i) F_m(i)
  for (int i = 0; i < nlat; ++i) {
    double w = grid_.gauss_weights[i];
    const double* p = plm_.data() + static_cast<size_t>(i) * ncoef_;
    for (int m = 0; m <= L; ++m) {
      double fr = w * fm_re[static_cast<size_t>(i) * (L + 1) + m];
      double fi = w * fm_im[static_cast<size_t>(i) * (L + 1) + m];
      int base = coeff_index(m, m, L);
      for (int l = m; l <= L; ++l) {
        out.values[2 * (base + l - m)] += p[base + l - m] * fr;
        out.values[2 * (base + l - m) + 1] += p[base + l - m] * fi;
      }
    }
  }
  return out;
}

std::vector<double> SphtPlan::inverse(const SpectralCoeffs& coeffs) const {
  if (coeffs.truncation != grid_.truncation)
    throw std::invalid_argument("sht_inverse: truncation mismatch");
  const int L = grid_.truncation, nlat = grid_.nlat, nlon = grid_.nlon;
  std::vector<double> field(static_cast<size_t>(nlat) * nlon, 0.0);

  for (int i = 0; i < nlat; ++i) {
    const double* p = plm_.data() + static_cast<size_t>(i) * ncoef_;
    double* row = field.data() + static_cast<size_t>(i) * nlon;
    for (int m = 0; m <= L; ++m) {
      int base = coeff_index(m, m, L);
      double gr = 0.0, gi = 0.0;
      for (int l = m; l <= L; ++l) {
        gr += p[base + l - m] * coeffs.values[2 * (base + l - m)];
        gi += p[base + l - m] * coeffs.values[2 * (base + l - m) + 1];
      }
      const double* cm = cos_mj_.data() + static_cast<size_t>(m) * nlon;
      const double* sm = sin_mj_.data() + static_cast<size_t>(m) * nlon;
      double fac = (m == 0) ? 1.0 : 2.0;
      for (int j = 0; j < nlon; ++j)
        row[j] += fac * (gr * cm[j] - gi * sm[j]);
    }
  }
  return field;
}

std::vector<double> SphtPlan::adjoint_forward(std::span<const double> coeff_cotangent) const {
  if (static_cast<int>(coeff_cotangent.size()) != 2 * ncoef_)
    throw std::invalid_argument("sht_adjoint: truncation mismatch");
  const int L = grid_.truncation, nlat = grid_.nlat, nlon = grid_.nlon;
  std::vector<double> out(static_cast<size_t>(nlat) * nlon, 0.0);
  const double dftw = 2.0 * kPi / nlon;
  for (int i = 0; i < nlat; ++i) {
    const double* p = plm_.data() + static_cast<size_t>(i) * ncoef_;
    double w = grid_.gauss_weights[i];
    double* row = out.data() + static_cast<size_t>(i) * nlon;
    for (int m = 0; m <= L; ++m) {
      int base = coeff_index(m, m, L);
      double gr = 0.0, gi = 0.0;
      for (int l = m; l <= L; ++l) {
        gr += p[base + l - m] * coeff_cotangent[2 * (base + l - m)];
        gi += p[base + l - m] * coeff_cotangent[2 * (base + l - m) + 1];
      }
      gr *= w * dftw;
      gi *= w * dftw;
      const double* cm = cos_mj_.data() + static_cast<size_t>(m) * nlon;
      const double* sm = sin_mj_.data() + static_cast<size_t>(m) * nlon;
      for (int j = 0; j < nlon; ++j)
        row[j] += gr * cm[j] - gi * sm[j];
    }
  }
  return out;
}

std::vector<double> SphtPlan::adjoint_inverse(std::span<const double> field_cotangent) const {
  if (static_cast<int>(field_cotangent.size()) != grid_.npoints())
    throw std::invalid_argument("sht adjoint_inverse: field shape mismatch");
  const int L = grid_.truncation, nlat = grid_.nlat, nlon = grid_.nlon;
  std::vector<double> out(2 * ncoef_, 0.0);
  for (int i = 0; i < nlat; ++i) {
    const double* p = plm_.data() + static_cast<size_t>(i) * ncoef_;
    const double* row = field_cotangent.data() + static_cast<size_t>(i) * nlon;
    for (int m = 0; m <= L; ++m) {
      const double* cm = cos_mj_.data() + static_cast<size_t>(m) * nlon;
      const double* sm = sin_mj_.data() + static_cast<size_t>(m) * nlon;
      double fac = (m == 0) ? 1.0 : 2.0;
      double sr = 0.0, si = 0.0;
      for (int j = 0; j < nlon; ++j) {
        sr += row[j] * cm[j];
        si -= row[j] * sm[j];
      }
      int base = coeff_index(m, m, L);
      for (int l = m; l <= L; ++l) {
        out[2 * (base + l - m)] += fac * p[base + l - m] * sr;
        out[2 * (base + l - m) + 1] += fac * p[base + l - m] * si;
      }
    }
  }
  return out;
}

double quadrature_mean(std::span<const double> field, const GridSpec& grid) {
  if (static_cast<int>(field.size()) != grid.npoints())
    throw std::invalid_argument("quadrature_mean: shape mismatch");
  double acc = 0.0;
  for (int i = 0; i < grid.nlat; ++i) {
    double rowsum = 0.0;
    for (int j = 0; j < grid.nlon; ++j)
      rowsum += field[static_cast<size_t>(i) * grid.nlon + j];
    acc += grid.gauss_weights[i] * rowsum;
  }
  return acc / (2.0 * grid.nlon);
}

}  // namespace lucie
