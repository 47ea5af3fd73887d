#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lucie {

/// Gaussian grid geometry: quadrature nodes/weights, triangular truncation,
/// and the sigma-level table shared by every module.
struct GridSpec {
  int nlat = 0;
  int nlon = 0;
  int truncation = 0;
  std::vector<double> gauss_nodes;    // sin(latitude), north to south (decreasing)
  std::vector<double> gauss_weights;  // positive, sum to 2
  std::vector<double> sigma_levels;   // strictly increasing, in (0,1]

  int npoints() const { return nlat * nlon; }
  int nlevels() const { return static_cast<int>(sigma_levels.size()); }
  double latitude_deg(int i) const;  // degrees, from gauss_nodes[i]
};

/// The eight sigma levels used throughout (0.025 near model top, ~25 hPa).
const std::vector<double>& default_sigma_levels();

/// Gaussian grid with nodes/weights from Newton iteration on Legendre roots.
/// Enforces the alias-free bounds nlon >= 2*truncation+1, nlat >= truncation+1.
GridSpec build_grid(int truncation, int nlat, int nlon,
                    std::vector<double> sigma_levels = default_sigma_levels());

/// Triangular-truncation coefficient storage: m-major over 0 <= m <= l <= L.
inline int coeff_count(int truncation) {
  return (truncation + 1) * (truncation + 2) / 2;
}
inline int coeff_index(int l, int m, int truncation) {
  return m * (truncation + 1) - m * (m - 1) / 2 + (l - m);
}

/// Complex spherical-harmonic coefficients, m >= 0 half with conjugate
/// symmetry implied for real fields. Interleaved (re, im) pairs.
struct SpectralCoeffs {
  int truncation = 0;
  std::vector<double> values;  // 2 * coeff_count(truncation)

  double re(int l, int m) const { return values[2 * coeff_index(l, m, truncation)]; }
  double im(int l, int m) const { return values[2 * coeff_index(l, m, truncation) + 1]; }
};

/// Precomputed spherical-harmonic transform plan. Immutable after
/// construction; application is pure and reentrant.
///
/// Harmonics are orthonormal (4pi-normalized): Y_00 = 1/sqrt(4pi);
/// analysis of a constant c gives coeff(0,0) = c*sqrt(4pi).
class SphtPlan {
 public:
  explicit SphtPlan(GridSpec grid);

  const GridSpec& grid() const { return grid_; }
  int ncoef() const { return ncoef_; }

  /// Analysis: quadrature-weighted projection onto the orthonormal basis.
  SpectralCoeffs forward(std::span<const double> field) const;

  /// Synthesis; exact inverse of forward on band-limited fields.
  std::vector<double> inverse(const SpectralCoeffs& coeffs) const;

  /// Exact linear adjoint of forward (includes quadrature weights),
  /// mapping a spectral cotangent back to grid space.
  std::vector<double> adjoint_forward(std::span<const double> coeff_cotangent) const;

  /// Exact linear adjoint of inverse, mapping a grid cotangent to
  /// spectral space.
  std::vector<double> adjoint_inverse(std::span<const double> field_cotangent) const;

  /// Normalized associated Legendre value table entry P~_lm(x_i).
  double plm(int ilat, int l, int m) const {
    return plm_[static_cast<size_t>(ilat) * ncoef_ + coeff_index(l, m, grid_.truncation)];
  }

 private:
  GridSpec grid_;
  int ncoef_;
  std::vector<double> plm_;      // [nlat][ncoef]
  std::vector<double> cos_mj_;   // [m][nlon]
  std::vector<double> sin_mj_;   // [m][nlon]
};

/// Area mean under Gaussian quadrature: sum_ij w_i f(i,j) / (2*nlon).
double quadrature_mean(std::span<const double> field, const GridSpec& grid);

/// Normalized associated Legendre P~_lm(x) such that the orthonormal
/// harmonic is Y_lm = P~_lm(sin(lat)) * exp(i m lon). Condon-Shortley phase.
double legendre_normalized(int l, int m, double x);

}  // namespace lucie
