#pragma once

// Pixel-integrated Gaussian PSF. The 2D atom of a spike at (x, y) is the
// separable product of 1D pixel integrals of a normalized Gaussian:
//   atom[r*W + c] = I(y; r) * I(x; c),   I(t; k) = ∫_k^{k+1} g_σ(s - t) ds.

#include "flucsr/measure.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace flucsr {

/// Pixels farther than this many σ from a spike get exactly zero weight.
inline constexpr double kTruncationSigmas = 12.0;

template <typename Scalar>
struct PsfModel {
  Scalar sigma;
  Eigen::Index height;
  Eigen::Index width;

  PsfModel(Scalar sigma_px, Eigen::Index h, Eigen::Index w) : sigma(sigma_px), height(h), width(w) {
    if (!(sigma_px > 0)) throw std::invalid_argument("psf sigma must be positive");
    if (h <= 0 || w <= 0) throw std::invalid_argument("psf grid must be nonempty");
  }

  Eigen::Index pixel_count() const { return height * width; }
  Domain<Scalar> domain() const { return {Scalar(width), Scalar(height)}; }

  static Scalar fwhm_factor() { return Scalar(2) * std::sqrt(Scalar(2) * std::log(Scalar(2))); }
  Scalar fwhm() const { return fwhm_factor() * sigma; }
  static Scalar sigma_from_fwhm(Scalar fwhm) { return fwhm / fwhm_factor(); }
};

template <typename Scalar>
Scalar gaussian_1d_pixel_integral(Scalar center, Eigen::Index pixel_index, Scalar sigma) {
  const Scalar a = Scalar(pixel_index);
  const Scalar b = a + 1;
  const Scalar reach = Scalar(kTruncationSigmas) * sigma;
  if (center < a - reach || center > b + reach) return Scalar(0);
  const Scalar scale = Scalar(1) / (sigma * std::numbers::sqrt2_v<Scalar>);
  const Scalar ua = (a - center) * scale;
  const Scalar ub = (b - center) * scale;
  // Take the difference on the side where the complementary function is
  // small so tail pixels keep their relative precision.
  if (ua >= 0) return Scalar(0.5) * (std::erfc(ua) - std::erfc(ub));
  if (ub <= 0) return Scalar(0.5) * (std::erfc(-ub) - std::erfc(-ua));
  return Scalar(0.5) * (std::erf(ub) - std::erf(ua));
}

/// d/dcenter of gaussian_1d_pixel_integral: g_σ(a - c) - g_σ(b - c).
template <typename Scalar>
Scalar gaussian_1d_pixel_integral_derivative(Scalar center, Eigen::Index pixel_index, Scalar sigma) {
  const Scalar a = Scalar(pixel_index);
  const Scalar b = a + 1;
  const Scalar reach = Scalar(kTruncationSigmas) * sigma;
  if (center < a - reach || center > b + reach) return Scalar(0);
  const Scalar norm = Scalar(1) / (sigma * std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>));
  auto density = [&](Scalar d) { return norm * std::exp(-d * d / (Scalar(2) * sigma * sigma)); };
  return density(a - center) - density(b - center);
}

/// The two 1D factors of an atom: `rows` holds I(y; r) for r < H and `cols`
/// holds I(x; c) for c < W.
template <typename Scalar>
struct AtomFactors {
  Vector<Scalar> rows;
  Vector<Scalar> cols;
};

template <typename Scalar>
AtomFactors<Scalar> atom_factors(const Point2<Scalar>& x, const PsfModel<Scalar>& psf) {
  AtomFactors<Scalar> f{Vector<Scalar>(psf.height), Vector<Scalar>(psf.width)};
  for (Eigen::Index r = 0; r < psf.height; ++r) f.rows[r] = gaussian_1d_pixel_integral(x.y(), r, psf.sigma);
  for (Eigen::Index c = 0; c < psf.width; ++c) f.cols[c] = gaussian_1d_pixel_integral(x.x(), c, psf.sigma);
  return f;
}

template <typename Scalar>
AtomFactors<Scalar> atom_factor_derivatives(const Point2<Scalar>& x, const PsfModel<Scalar>& psf) {
  AtomFactors<Scalar> f{Vector<Scalar>(psf.height), Vector<Scalar>(psf.width)};
  for (Eigen::Index r = 0; r < psf.height; ++r) {
    f.rows[r] = gaussian_1d_pixel_integral_derivative(x.y(), r, psf.sigma);
  }
  for (Eigen::Index c = 0; c < psf.width; ++c) {
    f.cols[c] = gaussian_1d_pixel_integral_derivative(x.x(), c, psf.sigma);
  }
  return f;
}

/// Row-major flattening of the outer product rows * cols^T.
template <typename Scalar>
Vector<Scalar> outer_flat(const Vector<Scalar>& rows, const Vector<Scalar>& cols) {
  Vector<Scalar> out(rows.size() * cols.size());
  for (Eigen::Index r = 0; r < rows.size(); ++r) {
    out.segment(r * cols.size(), cols.size()) = rows[r] * cols;
  }
  return out;
}

/// Pixel values [φ(x)]_i, row-major over the H x W grid.
template <typename Scalar>
Vector<Scalar> atom(const Point2<Scalar>& x, const PsfModel<Scalar>& psf) {
  const auto f = atom_factors(x, psf);
  return outer_flat(f.rows, f.cols);
}

template <typename Scalar>
struct AtomGradient {
  Vector<Scalar> dx;  // ∂φ/∂x (column coordinate)
  Vector<Scalar> dy;  // ∂φ/∂y (row coordinate)
};

template <typename Scalar>
AtomGradient<Scalar> atom_gradient(const Point2<Scalar>& x, const PsfModel<Scalar>& psf) {
  const auto f = atom_factors(x, psf);
  const auto d = atom_factor_derivatives(x, psf);
  return {outer_flat(f.rows, d.cols), outer_flat(d.rows, f.cols)};
}

using Psf = PsfModel<double>;

}  // namespace flucsr
