#pragma once

#include "flucsr/operators.hpp"

#include <Eigen/Core>

#include <stdexcept>

namespace flucsr {

/// T frames of an H x W image; frame t is row t of `frames`, flattened row-major.
struct ImageStack {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> frames;
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  double frame_rate = 1.0;

  ImageStack() = default;
  ImageStack(Eigen::Index t, Eigen::Index h, Eigen::Index w, double rate = 1.0)
      : frames(Eigen::MatrixXd::Zero(t, h * w)), height(h), width(w), frame_rate(rate) {}

  Eigen::Index frame_count() const { return frames.rows(); }
  Eigen::Index pixel_count() const { return height * width; }

  void validate() const {
    if (frame_count() < 1) throw std::invalid_argument("stack has no frames");
    if (frames.cols() != height * width) throw std::invalid_argument("stack frame size does not match H*W");
    if (!frames.allFinite()) throw std::invalid_argument("stack contains non-finite intensities");
    if (!(frame_rate > 0)) throw std::invalid_argument("frame rate must be positive");
  }
};

inline Image empirical_mean(const ImageStack& stack) {
  if (stack.frame_count() < 1) throw std::invalid_argument("mean requires at least 1 frame");
  return stack.frames.colwise().sum().transpose() / double(stack.frame_count());
}

/// Unbiased (1/(T-1)) second-order cumulant of the vectorized frames,
/// computed in two passes over mean-centered data.
inline Covariance empirical_covariance(const ImageStack& stack) {
  const Eigen::Index t = stack.frame_count();
  if (t < 2) throw std::invalid_argument("covariance requires at least 2 frames");
  const Image mean = empirical_mean(stack);
  const Eigen::MatrixXd centered = stack.frames.rowwise() - mean.transpose();
  Covariance r = Covariance::Zero(stack.pixel_count(), stack.pixel_count());
  r.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / double(t - 1));
  r.triangularView<Eigen::StrictlyUpper>() = r.transpose();
  return r;
}

}  // namespace flucsr
