#include "flucsr/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace flucsr {

double slide_objective(const Eigen::VectorXd& amplitudes, const Positions<double>& positions,
                       const Eigen::VectorXd& signs, const ProblemInstance& inst, Eigen::VectorXd* gradient) {
  const auto& psf = inst.psf;
  const Eigen::Index n = amplitudes.size();
  const Eigen::Index p = psf.pixel_count();
  Eigen::MatrixXd atoms(p, n), d_x(p, n), d_y(p, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point x = positions.col(i);
    atoms.col(i) = atom(x, psf);
    if (gradient) {
      auto g = atom_gradient(x, psf);
      d_x.col(i) = std::move(g.dx);
      d_y.col(i) = std::move(g.dy);
    }
  }
  const double penalty = inst.lambda * signs.dot(amplitudes);

  if (inst.kind == ProblemKind::MeanBlasso) {
    const Eigen::VectorXd residual = atoms * amplitudes - inst.image;
    if (gradient) {
      gradient->resize(3 * n);
      gradient->head(n) = atoms.transpose() * residual + inst.lambda * signs;
      const Eigen::VectorXd gx = d_x.transpose() * residual;
      const Eigen::VectorXd gy = d_y.transpose() * residual;
      for (Eigen::Index i = 0; i < n; ++i) {
        (*gradient)[n + 2 * i] = amplitudes[i] * gx[i];
        (*gradient)[n + 2 * i + 1] = amplitudes[i] * gy[i];
      }
    }
    return 0.5 * residual.squaredNorm() + penalty;
  }

  // ½‖R − Σ a_k φ_k φ_kᵀ‖² = ½‖R‖² − Σ a_k φ_kᵀRφ_k + ½ aᵀ (G∘G) a,  G = ΦᵀΦ
  const Eigen::MatrixXd ra = inst.covariance * atoms;
  const Eigen::VectorXd quad = (atoms.array() * ra.array()).colwise().sum().transpose();
  const Eigen::MatrixXd gram = atoms.transpose() * atoms;
  const Eigen::MatrixXd gram2 = gram.array().square().matrix();
  const Eigen::VectorXd g2a = gram2 * amplitudes;
  const double value = 0.5 * inst.covariance.squaredNorm() - amplitudes.dot(quad) + 0.5 * amplitudes.dot(g2a) + penalty;
  if (gradient) {
    gradient->resize(3 * n);
    gradient->head(n) = -quad + g2a + inst.lambda * signs;
    // Σ_l a_l G_kl φ_l, the model's action on φ_k
    const Eigen::MatrixXd model = atoms * (amplitudes.asDiagonal() * gram);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double ak = amplitudes[k];
      const Eigen::VectorXd w = 2.0 * ak * (model.col(k) - ra.col(k));
      (*gradient)[n + 2 * k] = d_x.col(k).dot(w);
      (*gradient)[n + 2 * k + 1] = d_y.col(k).dot(w);
    }
  }
  return value;
}

namespace {

// Bounded limited-memory quasi-Newton minimization with projected
// backtracking. Variables are rescaled so amplitudes and positions share a
// comparable curvature.
class SlideProblem {
 public:
  SlideProblem(const Measure& m, const ProblemInstance& inst) : inst_(inst), n_(m.size()) {
    signs_.resize(n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      signs_[i] = (inst.nonnegative || m.amplitude(i) >= 0) ? 1.0 : -1.0;
    }
    amp_scale_ = std::max(m.amplitudes().cwiseAbs().maxCoeff(), 1e-300);
    const auto dom = inst.psf.domain();
    lower_.resize(3 * n_);
    upper_.resize(3 * n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      lower_[i] = signs_[i] > 0 ? 0.0 : -std::numeric_limits<double>::infinity();
      upper_[i] = signs_[i] > 0 ? std::numeric_limits<double>::infinity() : 0.0;
      lower_[n_ + 2 * i] = 0.0;
      upper_[n_ + 2 * i] = dom.width;
      lower_[n_ + 2 * i + 1] = 0.0;
      upper_[n_ + 2 * i + 1] = dom.height;
    }
  }

  Eigen::VectorXd pack(const Measure& m) const {
    Eigen::VectorXd z(3 * n_);
    z.head(n_) = m.amplitudes() / amp_scale_;
    for (Eigen::Index i = 0; i < n_; ++i) z.segment(n_ + 2 * i, 2) = m.position(i);
    return project(z);
  }

  Measure unpack(const Eigen::VectorXd& z) const {
    Positions<double> pos(2, n_);
    for (Eigen::Index i = 0; i < n_; ++i) pos.col(i) = z.segment(n_ + 2 * i, 2);
    return Measure(z.head(n_) * amp_scale_, pos);
  }

  Eigen::VectorXd project(const Eigen::VectorXd& z) const {
    Eigen::VectorXd lo = lower_;
    lo.head(n_) /= amp_scale_;
    Eigen::VectorXd hi = upper_;
    hi.head(n_) /= amp_scale_;
    return z.cwiseMax(lo).cwiseMin(hi);
  }

  double eval(const Eigen::VectorXd& z, Eigen::VectorXd& grad) const {
    Positions<double> pos(2, n_);
    for (Eigen::Index i = 0; i < n_; ++i) pos.col(i) = z.segment(n_ + 2 * i, 2);
    const double f = slide_objective(z.head(n_) * amp_scale_, pos, signs_, inst_, &grad);
    grad.head(n_) *= amp_scale_;
    return f;
  }

  // Components held at a bound by a gradient pointing outward.
  std::vector<bool> pinned(const Eigen::VectorXd& z, const Eigen::VectorXd& grad) const {
    const Eigen::VectorXd pz = project(z);
    Eigen::VectorXd lo = lower_;
    lo.head(n_) /= amp_scale_;
    Eigen::VectorXd hi = upper_;
    hi.head(n_) /= amp_scale_;
    std::vector<bool> out(static_cast<std::size_t>(z.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      out[static_cast<std::size_t>(i)] = (pz[i] <= lo[i] && grad[i] > 0) || (pz[i] >= hi[i] && grad[i] < 0);
    }
    return out;
  }

 private:
  const ProblemInstance& inst_;
  Eigen::Index n_;
  Eigen::VectorXd signs_;
  double amp_scale_ = 1.0;
  Eigen::VectorXd lower_, upper_;
};

}  // namespace

Measure slide(const Measure& m, const ProblemInstance& inst, const SolverOptions& opts) {
  if (m.empty() || opts.slide_max_evals <= 0) return m;
  const SlideProblem prob(m, inst);
  Eigen::VectorXd z = prob.pack(m);
  Eigen::VectorXd g;
  double f = prob.eval(z, g);
  int evals = 1;

  constexpr std::size_t kMemory = 8;
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> history;  // (s, y)

  while (evals < opts.slide_max_evals) {
    const auto fixed = prob.pinned(z, g);
    Eigen::VectorXd pg = g;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (fixed[static_cast<std::size_t>(i)]) pg[i] = 0.0;
    }
    if (pg.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + std::abs(f))) break;

    // two-loop recursion on the free subspace
    Eigen::VectorXd q = pg;
    std::vector<double> alpha(history.size());
    for (std::size_t k = history.size(); k-- > 0;) {
      const auto& [s, y] = history[k];
      alpha[k] = s.dot(q) / s.dot(y);
      q -= alpha[k] * y;
    }
    if (!history.empty()) {
      const auto& [s, y] = history.back();
      q *= s.dot(y) / y.squaredNorm();
    } else {
      q /= std::max(pg.norm(), 1e-300);
    }
    for (std::size_t k = 0; k < history.size(); ++k) {
      const auto& [s, y] = history[k];
      const double beta = y.dot(q) / s.dot(y);
      q += (alpha[k] - beta) * s;
    }
    Eigen::VectorXd dir = -q;
    for (Eigen::Index i = 0; i < dir.size(); ++i) {
      if (fixed[static_cast<std::size_t>(i)]) dir[i] = 0.0;
    }
    if (dir.dot(pg) >= 0) {
      history.clear();
      dir = -pg / std::max(pg.norm(), 1e-300);
    }

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd z_new, g_new;
    double f_new = f;
    for (int bt = 0; bt < 40 && evals < opts.slide_max_evals; ++bt) {
      z_new = prob.project(z + step * dir);
      f_new = prob.eval(z_new, g_new);
      ++evals;
      if (std::isfinite(f_new) && f_new < f && f_new <= f + 1e-4 * g.dot(z_new - z)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (history.empty()) break;
      history.clear();
      continue;
    }
    Eigen::VectorXd s = z_new - z;
    Eigen::VectorXd y = g_new - g;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (fixed[static_cast<std::size_t>(i)]) {
        s[i] = 0.0;
        y[i] = 0.0;
      }
    }
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      history.emplace_back(std::move(s), std::move(y));
      if (history.size() > kMemory) history.pop_front();
    }
    z = std::move(z_new);
    g = std::move(g_new);
    f = f_new;
  }

  Measure out = prob.unpack(z);
  // the expanded covariance form rounds differently from the direct one
  if (objective(out, inst) > objective(m, inst)) return m;
  return out;
}

}  // namespace flucsr
