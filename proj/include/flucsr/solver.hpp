#pragma once

// Sliding Frank-Wolfe for the BLASSO on an image (MeanBlasso)
//   min_m ½‖y − Φm‖² + λ|m|(X)
// and on a covariance matrix (CovarianceBlasso)
//   min_m ½‖R_y − Λm‖_F² + λ|m|(X).
//
// Each iteration inserts the maximizer of the certificate η, re-fits all
// amplitudes by LASSO on the fixed support, then jointly slides amplitudes
// and positions by bounded quasi-Newton descent.

#include "flucsr/measure.hpp"
#include "flucsr/operators.hpp"
#include "flucsr/psf.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace flucsr {

enum class ProblemKind { MeanBlasso, CovarianceBlasso };

struct ProblemInstance {
  ProblemKind kind = ProblemKind::MeanBlasso;
  Image image;            // MeanBlasso data, length P
  Covariance covariance;  // CovarianceBlasso data, P x P
  Psf psf{1.0, 1, 1};
  double lambda = 1.0;
  bool nonnegative = false;

  /// Nonnegativity defaults to off for images and on for covariances.
  static ProblemInstance mean(Image y, const Psf& psf, double lambda, std::optional<bool> nonnegative = {});
  static ProblemInstance covariance_data(Covariance r, const Psf& psf, double lambda,
                                         std::optional<bool> nonnegative = {});

  void validate() const;
};

struct SolverOptions {
  int max_iterations = 50;
  double certificate_tolerance = 1e-3;
  int insertion_grid_factor = 4;
  double lasso_tolerance = 1e-10;
  int slide_max_evals = 300;
  double amplitude_prune_threshold = 0.0;

  void validate() const;
};

enum class Termination { CertificateOptimal, MaxIterations };

std::string to_string(Termination t);

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;        // after the sliding step
  double max_certificate = 0.0;  // |η(x*)| at the inserted candidate
  Eigen::Index spikes = 0;
  double milliseconds = 0.0;
  double insert_ms = 0.0;
  double lasso_ms = 0.0;
  double slide_ms = 0.0;
};

struct SolverReport {
  std::vector<IterationRecord> iterations;
  Termination termination = Termination::MaxIterations;

  /// Tab-separated: iteration, objective, max|η|, N, milliseconds. With
  /// `timings` off the millisecond column is written as 0 so repeated runs
  /// produce identical logs.
  std::string to_log(bool timings) const;
};

double objective(const Measure& m, const ProblemInstance& inst);

/// η(x) = (1/λ) · adjoint of the residual (data − forward(m)), evaluated at x.
double certificate(const Measure& m, const ProblemInstance& inst, const Point& x);
Point certificate_gradient(const Measure& m, const ProblemInstance& inst, const Point& x);

/// η on the (f·H) x (f·W) lattice of fine-cell centers ((j+½)/f, (i+½)/f).
Eigen::MatrixXd certificate_grid(const Measure& m, const ProblemInstance& inst, int factor);

/// Largest certificate magnitude relevant to the problem: |η| for signed
/// problems, the positive part of η for nonnegative ones.
double certificate_score(double eta, bool nonnegative);

Point insert_spike(const Measure& m, const ProblemInstance& inst, const SolverOptions& opts);

/// Solves min_a ½ aᵀGa − cᵀa + λ‖a‖₁ (a ≥ 0 when `nonnegative`), which is the
/// fixed-support LASSO written through its Gram matrix G and data
/// correlations c. Accelerated proximal gradient with restart, followed by an
/// exact active-set polish when it verifies the optimality conditions.
Eigen::VectorXd lasso_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& corr, double lambda, bool nonnegative,
                           double tolerance, const Eigen::VectorXd* warm_start = nullptr);

/// Gram matrix and data correlations of the dictionary at `support`.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> lasso_system(const Positions<double>& support,
                                                         const ProblemInstance& inst);

Eigen::VectorXd lasso_amplitudes(const Positions<double>& support, const ProblemInstance& inst,
                                 const SolverOptions& opts, const Eigen::VectorXd* warm_start = nullptr);

/// Smooth part of the objective with each amplitude confined to its current
/// sign orthant, and its gradient in the layout (a_1..a_N, x_1, y_1, ..., x_N, y_N).
double slide_objective(const Eigen::VectorXd& amplitudes, const Positions<double>& positions,
                       const Eigen::VectorXd& signs, const ProblemInstance& inst, Eigen::VectorXd* gradient);

Measure slide(const Measure& m, const ProblemInstance& inst, const SolverOptions& opts);

std::pair<Measure, SolverReport> solve(const ProblemInstance& inst, const SolverOptions& opts);

/// Smallest λ for which the zero measure is optimal, estimated as the
/// refined grid supremum of the certificate score at m = 0 and λ = 1.
double lambda_max(const ProblemInstance& inst, int grid_factor);

}  // namespace flucsr
