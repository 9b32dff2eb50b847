#pragma once

// Forward operators on discrete measures.
//   Φ m = Σ a_i φ(x_i)                       (image, length P)
//   Λ m = Σ a_i φ(x_i) φ(x_i)^T              (P x P covariance)
// and the adjoint pairings used by certificates and the sliding step.

#include "flucsr/measure.hpp"
#include "flucsr/psf.hpp"

#include <Eigen/Core>

namespace flucsr {

template <typename Scalar>
using CovarianceMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using ImageView = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename Scalar>
Vector<Scalar> phi_apply(const DiscreteMeasure<Scalar>& m, const PsfModel<Scalar>& psf) {
  Vector<Scalar> out = Vector<Scalar>::Zero(psf.pixel_count());
  for (Eigen::Index i = 0; i < m.size(); ++i) out += m.amplitude(i) * atom(m.position(i), psf);
  return out;
}

/// <φ(x), residual>, computed through the separable factors.
template <typename Scalar>
Scalar phi_adjoint_eval(const Vector<Scalar>& residual, const Point2<Scalar>& x, const PsfModel<Scalar>& psf) {
  const auto f = atom_factors(x, psf);
  const ImageView<Scalar> img(residual.data(), psf.height, psf.width);
  return f.rows.dot(img * f.cols);
}

/// Gradient of phi_adjoint_eval with respect to x, as (d/dx, d/dy).
template <typename Scalar>
Point2<Scalar> phi_adjoint_gradient(const Vector<Scalar>& residual, const Point2<Scalar>& x,
                                    const PsfModel<Scalar>& psf) {
  const auto f = atom_factors(x, psf);
  const auto d = atom_factor_derivatives(x, psf);
  const ImageView<Scalar> img(residual.data(), psf.height, psf.width);
  return {f.rows.dot(img * d.cols), d.rows.dot(img * f.cols)};
}

template <typename Scalar>
CovarianceMatrix<Scalar> lambda_apply(const DiscreteMeasure<Scalar>& m, const PsfModel<Scalar>& psf) {
  const Eigen::Index p = psf.pixel_count();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> atoms(p, m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) atoms.col(i) = atom(m.position(i), psf);
  CovarianceMatrix<Scalar> out = atoms * m.amplitudes().asDiagonal() * atoms.transpose();
  // exact symmetry regardless of the product's summation order
  out = (Scalar(0.5) * (out + out.transpose())).eval();
  return out;
}

/// φ(x)^T R φ(x).
template <typename Scalar>
Scalar lambda_adjoint_eval(const CovarianceMatrix<Scalar>& r, const Point2<Scalar>& x, const PsfModel<Scalar>& psf) {
  const Vector<Scalar> a = atom(x, psf);
  return a.dot(r * a);
}

/// 2 (∂φ/∂x)^T R φ(x), using the symmetry of R.
template <typename Scalar>
Point2<Scalar> lambda_adjoint_gradient(const CovarianceMatrix<Scalar>& r, const Point2<Scalar>& x,
                                       const PsfModel<Scalar>& psf) {
  const Vector<Scalar> a = atom(x, psf);
  const auto g = atom_gradient(x, psf);
  const Vector<Scalar> ra = r * a;
  return {Scalar(2) * g.dx.dot(ra), Scalar(2) * g.dy.dot(ra)};
}

using Covariance = CovarianceMatrix<double>;
using Image = Vector<double>;

}  // namespace flucsr
