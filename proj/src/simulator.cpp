#include "flucsr/simulator.hpp"

#include "flucsr/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace flucsr {

void PhotoPhysics::validate() const {
  if (!(tau_on > 0) || !(tau_off > 0) || !(tau_bleach > 0) || !(photons_on > 0)) {
    throw std::invalid_argument("photophysics parameters must be strictly positive");
  }
}

void NoiseModel::validate() const {
  if (!(background_photons >= 0)) throw std::invalid_argument("background must be nonnegative");
  if (gaussian_snr_db && !std::isfinite(*gaussian_snr_db)) throw std::invalid_argument("gaussian snr must be finite");
}

void SimulationConfig::validate() const {
  photo.validate();
  noise.validate();
  if (frames < 1) throw std::invalid_argument("frame count must be at least 1");
  if (!(frame_rate > 0)) throw std::invalid_argument("frame rate must be positive");
  if (!ground_truth.inside(psf.domain())) throw std::invalid_argument("ground truth lies outside the grid");
}

Traces simulate_amplitude_traces(const SimulationConfig& config) {
  config.validate();
  const Eigen::Index t_count = config.frames;
  const Eigen::Index n = config.ground_truth.size();
  const double dt = 1.0 / config.frame_rate;
  const double total = double(t_count) * dt;
  const auto& ph = config.photo;
  const double p_on = ph.tau_on / (ph.tau_on + ph.tau_off);

  Traces traces = Traces::Zero(t_count, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    CounterRng rng(config.rng_seed, stream_id(StreamKind::EmitterTrace, static_cast<std::uint64_t>(i)));
    const double bleach = rng.exponential(ph.tau_bleach);
    const double end = std::min(total, bleach);
    bool on = rng.uniform() < p_on;
    double t = 0.0;
    while (t < end) {
      const double dur = rng.exponential(on ? ph.tau_on : ph.tau_off);
      const double seg_end = std::min(t + dur, end);
      if (on) {
        auto f = static_cast<Eigen::Index>(std::floor(t / dt));
        for (; f < t_count && double(f) * dt < seg_end; ++f) {
          const double lo = std::max(t, double(f) * dt);
          const double hi = std::min(seg_end, double(f + 1) * dt);
          if (hi > lo) traces(f, i) += hi - lo;
        }
      }
      t += dur;
      on = !on;
    }
  }
  traces *= ph.photons_on / dt;
  return traces;
}

SimulatedStack simulate_detailed(const SimulationConfig& config) {
  SimulatedStack out;
  out.traces = simulate_amplitude_traces(config);
  const auto& psf = config.psf;
  const Eigen::Index p = psf.pixel_count();
  const Eigen::Index n = config.ground_truth.size();

  Eigen::MatrixXd atoms(p, n);
  for (Eigen::Index i = 0; i < n; ++i) atoms.col(i) = atom(config.ground_truth.position(i), psf);

  out.noiseless = ImageStack(config.frames, psf.height, psf.width, config.frame_rate);
  out.noiseless.frames = out.traces * atoms.transpose();
  out.noiseless.frames.array() += config.noise.background_photons;
  if ((out.noiseless.frames.array() < 0).any()) {
    throw std::logic_error("negative noiseless intensity");
  }

  if (config.noise.gaussian_snr_db) {
    const double rms = std::sqrt(out.noiseless.frames.squaredNorm() / double(out.noiseless.frames.size()));
    out.gaussian_sigma = rms * std::pow(10.0, -*config.noise.gaussian_snr_db / 20.0);
  }

  out.stack = out.noiseless;
  const bool poisson = config.noise.poisson_enabled;
  const double sigma_w = out.gaussian_sigma;
  if (poisson || sigma_w > 0) {
    for (Eigen::Index t = 0; t < config.frames; ++t) {
      CounterRng rng(config.rng_seed, stream_id(StreamKind::FrameNoise, static_cast<std::uint64_t>(t)));
      auto frame = out.stack.frames.row(t);
      for (Eigen::Index j = 0; j < p; ++j) {
        double v = frame[j];
        if (poisson) v = static_cast<double>(rng.poisson(v));
        if (sigma_w > 0) v += sigma_w * rng.normal();
        frame[j] = v;
      }
    }
  }
  return out;
}

ImageStack simulate_stack(const SimulationConfig& config) { return simulate_detailed(config).stack; }

double overall_snr_db(const SimulatedStack& sim, double background_photons) {
  const Eigen::ArrayXXd signal = sim.noiseless.frames.array() - background_photons;
  const Eigen::ArrayXXd noise = sim.stack.frames.array() - signal;
  return 10.0 * std::log10(signal.square().sum() / noise.square().sum());
}

AmplitudeMoments stationary_amplitude_moments(const PhotoPhysics& photo, double frame_rate) {
  photo.validate();
  const double p = photo.tau_on / (photo.tau_on + photo.tau_off);
  const double tau_c = 1.0 / (1.0 / photo.tau_on + 1.0 / photo.tau_off);
  const double u = (1.0 / frame_rate) / tau_c;
  // variance of the time average over one frame of an exponentially
  // correlated two-state signal
  const double averaging = 2.0 * (u - 1.0 + std::exp(-u)) / (u * u);
  const double scale = photo.photons_on;
  return {scale * p, scale * scale * p * (1.0 - p) * averaging};
}

Measure random_emitters(const Domain<double>& domain, Eigen::Index count, double margin, std::uint64_t seed) {
  if (2 * margin >= domain.width || 2 * margin >= domain.height) throw std::invalid_argument("margin too large");
  CounterRng rng(seed, stream_id(StreamKind::Layout, 0));
  Positions<double> pos(2, count);
  for (Eigen::Index i = 0; i < count; ++i) {
    pos(0, i) = margin + rng.uniform() * (domain.width - 2 * margin);
    pos(1, i) = margin + rng.uniform() * (domain.height - 2 * margin);
  }
  return Measure(Eigen::VectorXd::Ones(count), pos);
}

Measure crossing_filaments(const Domain<double>& domain, Eigen::Index count, double margin, std::uint64_t seed) {
  if (2 * margin >= domain.width || 2 * margin >= domain.height) throw std::invalid_argument("margin too large");
  CounterRng rng(seed, stream_id(StreamKind::Layout, 1));
  const double w = domain.width - 2 * margin;
  const double h = domain.height - 2 * margin;
  // filament A runs corner to corner, filament B is shallower and crosses it
  const Point a0{margin, margin + 0.1 * h}, a1{margin + w, margin + 0.9 * h};
  const Point b0{margin, margin + 0.7 * h}, b1{margin + w, margin + 0.3 * h};
  const Eigen::Index na = (count + 1) / 2;
  const Eigen::Index nb = count - na;
  Positions<double> pos(2, count);
  auto place = [&](const Point& s, const Point& e, Eigen::Index n, Eigen::Index offset) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double u = (double(k) + 0.5 + 0.4 * (rng.uniform() - 0.5)) / double(n);
      pos.col(offset + k) = s + u * (e - s);
    }
  };
  place(a0, a1, na, 0);
  place(b0, b1, nb, na);
  return Measure(Eigen::VectorXd::Ones(count), pos);
}

}  // namespace flucsr
