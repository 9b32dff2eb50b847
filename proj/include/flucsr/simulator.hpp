#pragma once

// Synthetic blinking-emitter stacks:
//   y_t = Gauss(Poisson(Φ μ(t) + b))
// with independent on/off telegraph photophysics per emitter, exponential
// bleaching, and frame-integrated photon counts.

#include "flucsr/measure.hpp"
#include "flucsr/psf.hpp"
#include "flucsr/statistics.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>

namespace flucsr {

struct PhotoPhysics {
  double tau_on = 0.020;      // s
  double tau_off = 0.040;     // s
  double tau_bleach = 20.0;   // s
  double photons_on = 1000.0; // photons per frame while on

  void validate() const;
};

struct NoiseModel {
  double background_photons = 0.0;
  std::optional<double> gaussian_snr_db;  // disabled when empty
  bool poisson_enabled = false;

  void validate() const;
};

struct SimulationConfig {
  Measure ground_truth;
  Psf psf{1.0, 16, 16};
  PhotoPhysics photo;
  NoiseModel noise;
  Eigen::Index frames = 100;
  double frame_rate = 100.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

using Traces = Eigen::MatrixXd;  // T x N, column i is emitter i

/// Photon count per frame of every emitter; the on-time fraction of each
/// frame interval is integrated exactly from the simulated event times.
Traces simulate_amplitude_traces(const SimulationConfig& config);

struct SimulatedStack {
  ImageStack stack;
  Traces traces;
  ImageStack noiseless;  // Φ μ(t) + b
  double gaussian_sigma = 0.0;
};

SimulatedStack simulate_detailed(const SimulationConfig& config);
ImageStack simulate_stack(const SimulationConfig& config);

/// Overall SNR in dB: emitter signal Φ μ(t) against everything else in the
/// recorded frames (background, shot noise and additive noise).
double overall_snr_db(const SimulatedStack& sim, double background_photons);

struct AmplitudeMoments {
  double mean;
  double variance;
};

/// Stationary mean and variance of one emitter's frame-integrated photon
/// count, ignoring bleaching.
AmplitudeMoments stationary_amplitude_moments(const PhotoPhysics& photo, double frame_rate);

/// Uniformly scattered emitters at least `margin` pixels from the border.
Measure random_emitters(const Domain<double>& domain, Eigen::Index count, double margin, std::uint64_t seed);

/// Two straight filaments crossing near the domain center, with emitters
/// spread along each at jittered, roughly even spacing.
Measure crossing_filaments(const Domain<double>& domain, Eigen::Index count, double margin, std::uint64_t seed);

}  // namespace flucsr
