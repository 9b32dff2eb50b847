#pragma once

#include "flucsr/measure.hpp"
#include "flucsr/operators.hpp"
#include "flucsr/psf.hpp"

#include <vector>

namespace flucsr {

struct MatchedPair {
  Eigen::Index truth;
  Eigen::Index recon;
  double distance;
};

struct MatchResult {
  std::vector<MatchedPair> pairs;
  std::vector<Eigen::Index> unmatched_truth;
  std::vector<Eigen::Index> unmatched_recon;
  double radius = 0.0;

  std::size_t true_positives() const { return pairs.size(); }
  std::size_t false_negatives() const { return unmatched_truth.size(); }
  std::size_t false_positives() const { return unmatched_recon.size(); }
};

/// Optimal assignment between spike positions (amplitudes ignored): the
/// largest number of pairs within `radius`, and among those the smallest
/// total distance.
MatchResult match_spikes(const Measure& truth, const Measure& recon, double radius);

/// TP / (TP + FN + FP); two empty measures score 1.
double jaccard_index(const MatchResult& match);

/// Root mean square of matched-pair distances; throws on an empty match.
double localization_rmse(const MatchResult& match);

/// Relative ℓ1 amplitude error Σ|a_recon − a_truth| / Σ|a_truth| over matched pairs.
double matched_amplitude_error(const MatchResult& match, const Measure& truth, const Measure& recon);

/// Rasterizes each spike as a pixel-integrated Gaussian of `render_sigma`
/// fine pixels on the (upscale·H) x (upscale·W) grid, row-major.
Image render_measure(const Measure& m, const Psf& psf, int upscale, double render_sigma);

}  // namespace flucsr
