#include "flucsr/evaluation.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace flucsr {

namespace {

// Minimum-cost perfect assignment on a square cost matrix (shortest
// augmenting paths with potentials). Returns the column assigned to each row.
std::vector<Eigen::Index> assign(const Eigen::MatrixXd& cost) {
  const Eigen::Index n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays with a virtual column 0
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Eigen::Index> owner(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (Eigen::Index row = 1; row <= n; ++row) {
    owner[0] = row;
    Eigen::Index col0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(col0)] = true;
      const Eigen::Index r0 = owner[static_cast<std::size_t>(col0)];
      double delta = inf;
      Eigen::Index col1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) continue;
        const double cur = cost(r0 - 1, j - 1) - u[static_cast<std::size_t>(r0)] - v[sj];
        if (cur < minv[sj]) {
          minv[sj] = cur;
          way[sj] = col0;
        }
        if (minv[sj] < delta) {
          delta = minv[sj];
          col1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) {
          u[static_cast<std::size_t>(owner[sj])] += delta;
          v[sj] -= delta;
        } else {
          minv[sj] -= delta;
        }
      }
      col0 = col1;
    } while (owner[static_cast<std::size_t>(col0)] != 0);
    do {
      const Eigen::Index col1 = way[static_cast<std::size_t>(col0)];
      owner[static_cast<std::size_t>(col0)] = owner[static_cast<std::size_t>(col1)];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<Eigen::Index> out(static_cast<std::size_t>(n), -1);
  for (Eigen::Index j = 1; j <= n; ++j) out[static_cast<std::size_t>(owner[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return out;
}

}  // namespace

MatchResult match_spikes(const Measure& truth, const Measure& recon, double radius) {
  if (!(radius > 0)) throw std::invalid_argument("match radius must be positive");
  const Eigen::Index nt = truth.size(), nr = recon.size();
  MatchResult result;
  result.radius = radius;

  const Eigen::Index n = std::max(nt, nr);
  // pairs within reach cost (distance − big) so the assignment maximizes the
  // number of pairs before it minimizes their total distance
  const double big = radius * double(std::min(nt, nr) + 1) + 1.0;
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd dist = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < nt; ++i) {
    for (Eigen::Index j = 0; j < nr; ++j) {
      const double d = (truth.position(i) - recon.position(j)).norm();
      dist(i, j) = d;
      if (d <= radius) cost(i, j) = d - big;
    }
  }
  std::vector<bool> recon_used(static_cast<std::size_t>(nr), false);
  const auto cols = n > 0 ? assign(cost) : std::vector<Eigen::Index>{};
  for (Eigen::Index i = 0; i < nt; ++i) {
    const Eigen::Index j = cols[static_cast<std::size_t>(i)];
    if (j < nr && dist(i, j) <= radius) {
      result.pairs.push_back({i, j, dist(i, j)});
      recon_used[static_cast<std::size_t>(j)] = true;
    } else {
      result.unmatched_truth.push_back(i);
    }
  }
  for (Eigen::Index j = 0; j < nr; ++j) {
    if (!recon_used[static_cast<std::size_t>(j)]) result.unmatched_recon.push_back(j);
  }
  return result;
}

double jaccard_index(const MatchResult& match) {
  const double tp = double(match.true_positives());
  const double denom = tp + double(match.false_negatives()) + double(match.false_positives());
  return denom > 0 ? tp / denom : 1.0;
}

double localization_rmse(const MatchResult& match) {
  if (match.pairs.empty()) throw std::invalid_argument("no matched pairs");
  double sum = 0.0;
  for (const auto& p : match.pairs) sum += p.distance * p.distance;
  return std::sqrt(sum / double(match.pairs.size()));
}

double matched_amplitude_error(const MatchResult& match, const Measure& truth, const Measure& recon) {
  double err = 0.0, ref = 0.0;
  for (const auto& p : match.pairs) {
    err += std::abs(recon.amplitude(p.recon) - truth.amplitude(p.truth));
    ref += std::abs(truth.amplitude(p.truth));
  }
  return ref > 0 ? err / ref : 0.0;
}

Image render_measure(const Measure& m, const Psf& psf, int upscale, double render_sigma) {
  if (upscale < 1) throw std::invalid_argument("upscale must be at least 1");
  const Psf fine(render_sigma, psf.height * upscale, psf.width * upscale);
  return phi_apply(Measure(m.amplitudes(), m.positions() * double(upscale)), fine);
}

}  // namespace flucsr
