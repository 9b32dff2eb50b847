#include "flucsr/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

namespace flucsr {

namespace {

double lasso_value(const Eigen::MatrixXd& gram, const Eigen::VectorXd& corr, double lambda, const Eigen::VectorXd& a) {
  return 0.5 * a.dot(gram * a) - corr.dot(a) + lambda * a.cwiseAbs().sum();
}

Eigen::VectorXd prox(const Eigen::VectorXd& v, double thresh, bool nonnegative) {
  if (nonnegative) return (v.array() - thresh).max(0.0).matrix();
  return v.array().sign() * (v.array().abs() - thresh).max(0.0);
}

// Solves the equality-constrained system on the support of `a` with its
// signs fixed; returns nothing unless the result satisfies the full
// optimality conditions.
std::optional<Eigen::VectorXd> polish(const Eigen::MatrixXd& gram, const Eigen::VectorXd& corr, double lambda,
                                      bool nonnegative, const Eigen::VectorXd& a) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] != 0.0) support.push_back(i);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(a.size());
  if (!support.empty()) {
    const auto k = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd gs(k, k);
    Eigen::VectorXd rhs(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto si = support[static_cast<std::size_t>(i)];
      rhs[i] = corr[si] - lambda * (a[si] > 0 ? 1.0 : -1.0);
      for (Eigen::Index j = 0; j < k; ++j) gs(i, j) = gram(si, support[static_cast<std::size_t>(j)]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gs);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
    const Eigen::VectorXd sol = ldlt.solve(rhs);
    if (!sol.allFinite() || (gs * sol - rhs).norm() > 1e-10 * (rhs.norm() + 1e-300)) return std::nullopt;
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto si = support[static_cast<std::size_t>(i)];
      if (sol[i] * a[si] <= 0) return std::nullopt;
      out[si] = sol[i];
    }
  }
  const Eigen::VectorXd grad = corr - gram * out;  // correlation with the residual
  const double slack = lambda * 1e-9;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (out[i] != 0.0) continue;
    if (nonnegative ? grad[i] > lambda + slack : std::abs(grad[i]) > lambda + slack) return std::nullopt;
  }
  return out;
}

}  // namespace

Eigen::VectorXd lasso_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& corr, double lambda, bool nonnegative,
                           double tolerance, const Eigen::VectorXd* warm_start) {
  const Eigen::Index n = corr.size();
  if (n == 0) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double lipschitz = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
  const double step = 1.0 / lipschitz;

  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  if (warm_start && warm_start->size() == n) {
    a = *warm_start;
    if (nonnegative) a = a.cwiseMax(0.0);
  }

  constexpr int kWindow = 10;
  constexpr int kMaxIterations = 200000;
  Eigen::VectorXd z = a;
  Eigen::VectorXd a_prev = a;
  double t = 1.0;
  double value = lasso_value(gram, corr, lambda, a);
  double value_window = value;
  for (int it = 1; it <= kMaxIterations; ++it) {
    const Eigen::VectorXd a_next = prox(z - step * (gram * z - corr), step * lambda, nonnegative);
    const double next_value = lasso_value(gram, corr, lambda, a_next);
    if (next_value > value) {
      // adaptive restart: drop the momentum, the next step is a plain
      // proximal step from `a`
      t = 1.0;
      z = a;
    } else {
      a_prev = a;
      a = a_next;
      value = next_value;
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      z = a + ((t - 1.0) / t_next) * (a - a_prev);
      t = t_next;
    }
    if (it % kWindow == 0) {
      const double scale = std::max({std::abs(value), std::abs(value_window), 1e-300});
      const double decrease = value_window - value;
      if (decrease <= tolerance * scale) {
        if (auto p = polish(gram, corr, lambda, nonnegative, a)) return *p;
        if (decrease <= 1e-15 * scale) break;
      }
      value_window = value;
    }
  }
  if (auto p = polish(gram, corr, lambda, nonnegative, a)) return *p;
  return a;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> lasso_system(const Positions<double>& support,
                                                         const ProblemInstance& inst) {
  const Eigen::Index n = support.cols();
  Eigen::MatrixXd atoms(inst.psf.pixel_count(), n);
  for (Eigen::Index i = 0; i < n; ++i) atoms.col(i) = atom(Point(support.col(i)), inst.psf);
  Eigen::MatrixXd gram = atoms.transpose() * atoms;
  Eigen::VectorXd corr(n);
  if (inst.kind == ProblemKind::MeanBlasso) {
    corr = atoms.transpose() * inst.image;
  } else {
    // ⟨ψ_i, ψ_j⟩ = ⟨φ_i, φ_j⟩² and ⟨ψ_i, R⟩ = φ_iᵀ R φ_i
    gram = gram.array().square().matrix();
    const Eigen::MatrixXd ra = inst.covariance * atoms;
    corr = (atoms.array() * ra.array()).colwise().sum().transpose();
  }
  gram = 0.5 * (gram + gram.transpose());
  return {gram, corr};
}

Eigen::VectorXd lasso_amplitudes(const Positions<double>& support, const ProblemInstance& inst,
                                 const SolverOptions& opts, const Eigen::VectorXd* warm_start) {
  const auto [gram, corr] = lasso_system(support, inst);
  return lasso_gram(gram, corr, inst.lambda, inst.nonnegative, opts.lasso_tolerance, warm_start);
}

}  // namespace flucsr
