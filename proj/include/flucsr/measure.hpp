#pragma once

// Discrete Radon measures: finite sums of weighted Dirac masses on a
// rectangular domain. Positions are in continuous pixel units, x along
// columns and y along rows; pixel (r, c) covers [c, c+1] x [r, r+1].

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace flucsr {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Positions = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>;

template <typename Scalar>
struct Domain {
  Scalar width;
  Scalar height;

  Domain(Scalar w, Scalar h) : width(w), height(h) {
    if (!(w > 0) || !(h > 0)) {
      throw std::invalid_argument("domain extent must be positive");
    }
  }

  bool contains(const Point2<Scalar>& p) const {
    return p.x() >= 0 && p.x() <= width && p.y() >= 0 && p.y() <= height;
  }

  Point2<Scalar> clamp(const Point2<Scalar>& p) const {
    return {std::clamp(p.x(), Scalar(0), width), std::clamp(p.y(), Scalar(0), height)};
  }
};

/// Finite list of spikes (amplitude, position). Spikes sharing an exact
/// position are merged on construction by summing amplitudes; the first
/// occurrence keeps its slot in the ordering.
template <typename Scalar>
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;

  DiscreteMeasure(const Vector<Scalar>& amplitudes, const Positions<Scalar>& positions) {
    if (amplitudes.size() != positions.cols()) {
      throw std::invalid_argument("amplitude and position counts differ");
    }
    std::vector<Scalar> a;
    std::vector<Point2<Scalar>> p;
    for (Eigen::Index i = 0; i < amplitudes.size(); ++i) {
      const Point2<Scalar> pi = positions.col(i);
      auto it = std::find(p.begin(), p.end(), pi);
      if (it != p.end()) {
        a[static_cast<std::size_t>(it - p.begin())] += amplitudes[i];
      } else {
        a.push_back(amplitudes[i]);
        p.push_back(pi);
      }
    }
    amplitudes_.resize(static_cast<Eigen::Index>(a.size()));
    positions_.resize(2, static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
      amplitudes_[static_cast<Eigen::Index>(i)] = a[i];
      positions_.col(static_cast<Eigen::Index>(i)) = p[i];
    }
  }

  Eigen::Index size() const { return amplitudes_.size(); }
  bool empty() const { return size() == 0; }

  const Vector<Scalar>& amplitudes() const { return amplitudes_; }
  const Positions<Scalar>& positions() const { return positions_; }

  Scalar amplitude(Eigen::Index i) const { return amplitudes_[i]; }
  Point2<Scalar> position(Eigen::Index i) const { return positions_.col(i); }

  bool inside(const Domain<Scalar>& domain) const {
    for (Eigen::Index i = 0; i < size(); ++i) {
      if (!domain.contains(position(i))) return false;
    }
    return true;
  }

  bool nonnegative() const { return (amplitudes_.array() >= 0).all(); }

  /// Amplitudes multiplied by c, positions unchanged.
  DiscreteMeasure scaled(Scalar c) const { return DiscreteMeasure(amplitudes_ * c, positions_); }

  /// Concatenation m1 ⊎ m2 (shared positions merge).
  friend DiscreteMeasure operator+(const DiscreteMeasure& lhs, const DiscreteMeasure& rhs) {
    Vector<Scalar> a(lhs.size() + rhs.size());
    Positions<Scalar> p(2, lhs.size() + rhs.size());
    a << lhs.amplitudes_, rhs.amplitudes_;
    p << lhs.positions_, rhs.positions_;
    return DiscreteMeasure(a, p);
  }

 private:
  Vector<Scalar> amplitudes_;
  Positions<Scalar> positions_{2, 0};
};

template <typename Scalar>
Scalar tv_norm(const DiscreteMeasure<Scalar>& m) {
  return m.amplitudes().cwiseAbs().sum();
}

/// Single-linkage clustering at `radius`; each cluster becomes one spike with
/// the summed amplitude at the amplitude-weighted centroid. Clusters whose
/// amplitudes sum to zero fall back to the unweighted centroid.
template <typename Scalar>
DiscreteMeasure<Scalar> merge_close_spikes(const DiscreteMeasure<Scalar>& m, Scalar radius) {
  if (radius < 0) throw std::invalid_argument("merge radius must be nonnegative");
  const Eigen::Index n = m.size();
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), Eigen::Index{0});
  auto find = [&](Eigen::Index i) {
    while (parent[static_cast<std::size_t>(i)] != i) {
      auto& pi = parent[static_cast<std::size_t>(i)];
      pi = parent[static_cast<std::size_t>(pi)];
      i = pi;
    }
    return i;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if ((m.position(i) - m.position(j)).norm() <= radius) {
        const auto ri = find(i);
        const auto rj = find(j);
        if (ri != rj) parent[static_cast<std::size_t>(std::max(ri, rj))] = std::min(ri, rj);
      }
    }
  }

  std::vector<Eigen::Index> roots;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (find(i) == i) roots.push_back(i);
  }
  Vector<Scalar> a = Vector<Scalar>::Zero(static_cast<Eigen::Index>(roots.size()));
  Positions<Scalar> p = Positions<Scalar>::Zero(2, a.size());
  for (std::size_t k = 0; k < roots.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    Point2<Scalar> weighted = Point2<Scalar>::Zero();
    Point2<Scalar> plain = Point2<Scalar>::Zero();
    Eigen::Index members = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (find(i) != roots[k]) continue;
      a[kk] += m.amplitude(i);
      weighted += m.amplitude(i) * m.position(i);
      plain += m.position(i);
      ++members;
    }
    if (members == 1) {
      p.col(kk) = m.position(roots[k]);
    } else if (a[kk] != 0) {
      p.col(kk) = weighted / a[kk];
    } else {
      p.col(kk) = plain / Scalar(members);
    }
  }
  return DiscreteMeasure<Scalar>(a, p);
}

template <typename Scalar>
DiscreteMeasure<Scalar> prune_zero_amplitudes(const DiscreteMeasure<Scalar>& m, Scalar threshold) {
  if (threshold < 0) throw std::invalid_argument("prune threshold must be nonnegative");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (std::abs(m.amplitude(i)) > threshold) keep.push_back(i);
  }
  Vector<Scalar> a(static_cast<Eigen::Index>(keep.size()));
  Positions<Scalar> p(2, a.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    a[static_cast<Eigen::Index>(k)] = m.amplitude(keep[k]);
    p.col(static_cast<Eigen::Index>(k)) = m.position(keep[k]);
  }
  return DiscreteMeasure<Scalar>(a, p);
}

using Measure = DiscreteMeasure<double>;
using Point = Point2<double>;

}  // namespace flucsr
