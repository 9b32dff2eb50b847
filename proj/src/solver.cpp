#include "flucsr/solver.hpp"

#include "flucsr/errors.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace flucsr {

ProblemInstance ProblemInstance::mean(Image y, const Psf& psf, double lambda, std::optional<bool> nonnegative) {
  ProblemInstance inst;
  inst.kind = ProblemKind::MeanBlasso;
  inst.image = std::move(y);
  inst.psf = psf;
  inst.lambda = lambda;
  inst.nonnegative = nonnegative.value_or(false);
  inst.validate();
  return inst;
}

ProblemInstance ProblemInstance::covariance_data(Covariance r, const Psf& psf, double lambda,
                                                 std::optional<bool> nonnegative) {
  ProblemInstance inst;
  inst.kind = ProblemKind::CovarianceBlasso;
  inst.covariance = std::move(r);
  inst.psf = psf;
  inst.lambda = lambda;
  inst.nonnegative = nonnegative.value_or(true);
  inst.validate();
  return inst;
}

void ProblemInstance::validate() const {
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be positive");
  const Eigen::Index p = psf.pixel_count();
  if (kind == ProblemKind::MeanBlasso) {
    if (image.size() != p) throw std::invalid_argument("image size does not match the psf grid");
  } else if (covariance.rows() != p || covariance.cols() != p) {
    throw std::invalid_argument("covariance size does not match the psf grid");
  }
}

void SolverOptions::validate() const {
  if (max_iterations <= 0) throw std::invalid_argument("max_iterations must be positive");
  if (!(certificate_tolerance > 0)) throw std::invalid_argument("certificate_tolerance must be positive");
  if (insertion_grid_factor <= 0) throw std::invalid_argument("insertion_grid_factor must be positive");
  if (!(lasso_tolerance > 0)) throw std::invalid_argument("lasso_tolerance must be positive");
  if (slide_max_evals < 0) throw std::invalid_argument("slide_max_evals must be nonnegative");
  if (!(amplitude_prune_threshold >= 0)) throw std::invalid_argument("amplitude_prune_threshold must be nonnegative");
}

std::string to_string(Termination t) {
  return t == Termination::CertificateOptimal ? "CertificateOptimal" : "MaxIterations";
}

std::string SolverReport::to_log(bool timings) const {
  std::string out = "# iteration\tobjective\tmax_certificate\tspikes\tmilliseconds\n";
  char line[256];
  for (const auto& r : iterations) {
    std::snprintf(line, sizeof line, "%d\t%.17g\t%.17g\t%lld\t%.3f\n", r.iteration, r.objective, r.max_certificate,
                  static_cast<long long>(r.spikes), timings ? r.milliseconds : 0.0);
    out += line;
  }
  return out;
}

double objective(const Measure& m, const ProblemInstance& inst) {
  if (inst.kind == ProblemKind::MeanBlasso) {
    return 0.5 * (inst.image - phi_apply(m, inst.psf)).squaredNorm() + inst.lambda * tv_norm(m);
  }
  return 0.5 * (inst.covariance - lambda_apply(m, inst.psf)).squaredNorm() + inst.lambda * tv_norm(m);
}

namespace {

// Residual of the data against the model, in the data's own space.
struct Residual {
  Image image;
  Covariance covariance;
};

Residual residual(const Measure& m, const ProblemInstance& inst) {
  Residual r;
  if (inst.kind == ProblemKind::MeanBlasso) {
    r.image = inst.image - phi_apply(m, inst.psf);
  } else {
    r.covariance = inst.covariance;
    if (!m.empty()) r.covariance -= lambda_apply(m, inst.psf);
  }
  return r;
}

double certificate_from(const Residual& r, const ProblemInstance& inst, const Point& x) {
  if (inst.kind == ProblemKind::MeanBlasso) return phi_adjoint_eval(r.image, x, inst.psf) / inst.lambda;
  return lambda_adjoint_eval(r.covariance, x, inst.psf) / inst.lambda;
}

Point certificate_gradient_from(const Residual& r, const ProblemInstance& inst, const Point& x) {
  if (inst.kind == ProblemKind::MeanBlasso) return phi_adjoint_gradient(r.image, x, inst.psf) / inst.lambda;
  return lambda_adjoint_gradient(r.covariance, x, inst.psf) / inst.lambda;
}

// 1D pixel integrals of the fine-lattice centers: row k holds I((k+½)/f; ·).
Eigen::MatrixXd lattice_factors(Eigen::Index pixels, int factor, double sigma) {
  const Eigen::Index fine = pixels * factor;
  Eigen::MatrixXd out(fine, pixels);
  for (Eigen::Index k = 0; k < fine; ++k) {
    const double c = (double(k) + 0.5) / double(factor);
    for (Eigen::Index j = 0; j < pixels; ++j) out(k, j) = gaussian_1d_pixel_integral(c, j, sigma);
  }
  return out;
}

Eigen::MatrixXd certificate_grid_from(const Residual& r, const ProblemInstance& inst, int factor) {
  const auto& psf = inst.psf;
  const Eigen::Index h = psf.height, w = psf.width;
  const Eigen::MatrixXd gy = lattice_factors(h, factor, psf.sigma);
  const Eigen::MatrixXd gx = lattice_factors(w, factor, psf.sigma);
  if (inst.kind == ProblemKind::MeanBlasso) {
    const ImageView<double> img(r.image.data(), h, w);
    return gy * img * gx.transpose() / inst.lambda;
  }
  // For a fixed lattice column j, S_j[r, r'] = Σ_{c,c'} gx[c] R[(r,c),(r',c')] gx[c'],
  // then η(i, j) = gy_iᵀ S_j gy_i.
  const auto& cov = r.covariance;
  Eigen::MatrixXd out(gy.rows(), gx.rows());
  Eigen::MatrixXd t1(h, h * w);
  Eigen::MatrixXd s(h, h);
  for (Eigen::Index j = 0; j < gx.rows(); ++j) {
    const Eigen::RowVectorXd g = gx.row(j);
    for (Eigen::Index row = 0; row < h; ++row) t1.row(row) = g * cov.middleRows(row * w, w);
    for (Eigen::Index row = 0; row < h; ++row) {
      for (Eigen::Index col = 0; col < h; ++col) s(row, col) = t1.row(row).segment(col * w, w).dot(g);
    }
    out.col(j) = (gy * s).cwiseProduct(gy).rowwise().sum() / inst.lambda;
  }
  return out;
}

struct Candidate {
  Point position;
  double score;
};

// Bounded ascent of the certificate score from `start`: Newton steps on a
// finite-difference Hessian of the analytic gradient when it is negative
// definite, gradient steps otherwise, with backtracking on the score.
Candidate refine_candidate(const Residual& r, const ProblemInstance& inst, Point x, double direction, int max_evals) {
  const auto dom = inst.psf.domain();
  auto score = [&](const Point& p) { return direction * certificate_from(r, inst, p); };
  auto grad = [&](const Point& p) -> Point { return direction * certificate_gradient_from(r, inst, p); };
  double fx = score(x);
  int evals = 1;
  while (evals < max_evals) {
    const Point g = grad(x);
    ++evals;
    Point pg = g;
    if ((x.x() <= 0 && g.x() < 0) || (x.x() >= dom.width && g.x() > 0)) pg.x() = 0;
    if ((x.y() <= 0 && g.y() < 0) || (x.y() >= dom.height && g.y() > 0)) pg.y() = 0;
    if (pg.norm() <= 1e-8) break;

    constexpr double h = 1e-5;
    Eigen::Matrix2d hess;
    for (int k = 0; k < 2; ++k) {
      Point e = Point::Zero();
      e[k] = h;
      hess.col(k) = (grad(x + e) - grad(x - e)) / (2 * h);
    }
    evals += 4;
    hess = 0.5 * (hess + hess.transpose()).eval();
    Point dir;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(hess);
    if (eig.eigenvalues().maxCoeff() < 0) {
      dir = -hess.ldlt().solve(pg);
      if (dir.dot(pg) <= 0) dir = pg;
    } else {
      dir = pg / std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), pg.norm());
    }
    // keep the step within a pixel
    if (dir.norm() > 1.0) dir /= dir.norm();

    bool moved = false;
    double step = 1.0;
    for (int bt = 0; bt < 40 && evals < max_evals; ++bt) {
      const Point xn = dom.clamp(x + step * dir);
      const double fn = score(xn);
      ++evals;
      if (fn > fx) {
        x = xn;
        fx = fn;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return {x, fx};
}

Candidate best_candidate(const Residual& r, const ProblemInstance& inst, int factor, int max_evals) {
  const Eigen::MatrixXd grid = certificate_grid_from(r, inst, factor);
  // row-major scan, strict comparison keeps the smallest index on ties
  double best = -std::numeric_limits<double>::infinity();
  Eigen::Index bi = 0, bj = 0;
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      const double v = certificate_score(grid(i, j), inst.nonnegative);
      if (v > best) {
        best = v;
        bi = i;
        bj = j;
      }
    }
  }
  const Point start{(double(bj) + 0.5) / factor, (double(bi) + 0.5) / factor};
  const double eta = grid(bi, bj);
  const double direction = (inst.nonnegative || eta >= 0) ? 1.0 : -1.0;
  if (max_evals <= 1 || eta == 0.0) return {start, certificate_score(eta, inst.nonnegative)};
  const auto c = refine_candidate(r, inst, start, direction, max_evals);
  return {c.position, certificate_score(direction * c.score, inst.nonnegative)};
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

double certificate(const Measure& m, const ProblemInstance& inst, const Point& x) {
  return certificate_from(residual(m, inst), inst, x);
}

Point certificate_gradient(const Measure& m, const ProblemInstance& inst, const Point& x) {
  return certificate_gradient_from(residual(m, inst), inst, x);
}

Eigen::MatrixXd certificate_grid(const Measure& m, const ProblemInstance& inst, int factor) {
  if (factor <= 0) throw std::invalid_argument("grid factor must be positive");
  return certificate_grid_from(residual(m, inst), inst, factor);
}

double certificate_score(double eta, bool nonnegative) { return nonnegative ? std::max(eta, 0.0) : std::abs(eta); }

Point insert_spike(const Measure& m, const ProblemInstance& inst, const SolverOptions& opts) {
  return best_candidate(residual(m, inst), inst, opts.insertion_grid_factor, opts.slide_max_evals).position;
}

std::pair<Measure, SolverReport> solve(const ProblemInstance& inst, const SolverOptions& opts) {
  inst.validate();
  opts.validate();
  using clock = std::chrono::steady_clock;
  Measure m;
  SolverReport report;
  double current = objective(m, inst);

  for (int k = 0; k < opts.max_iterations; ++k) {
    IterationRecord rec;
    rec.iteration = k;
    const auto t0 = clock::now();
    const auto cand = best_candidate(residual(m, inst), inst, opts.insertion_grid_factor, opts.slide_max_evals);
    rec.insert_ms = ms_since(t0);
    rec.max_certificate = cand.score;
    if (!std::isfinite(cand.score)) throw NumericalError("non-finite certificate");

    if (cand.score <= 1.0 + opts.certificate_tolerance) {
      rec.objective = current;
      rec.spikes = m.size();
      rec.milliseconds = ms_since(t0);
      report.iterations.push_back(rec);
      report.termination = Termination::CertificateOptimal;
      return {m, report};
    }

    bool degenerate = false;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if ((m.position(i) - cand.position).norm() <= 1e-9) degenerate = true;
    }

    Measure next = m;
    if (!degenerate) {
      const auto t1 = clock::now();
      Positions<double> support(2, m.size() + 1);
      support << m.positions(), cand.position;
      Eigen::VectorXd warm(m.size() + 1);
      warm << m.amplitudes(), 0.0;
      const Eigen::VectorXd a = lasso_amplitudes(support, inst, opts, &warm);
      next = prune_zero_amplitudes(Measure(a, support), opts.amplitude_prune_threshold);
      rec.lasso_ms = ms_since(t1);
    }
    const auto t2 = clock::now();
    next = prune_zero_amplitudes(slide(next, inst, opts), opts.amplitude_prune_threshold);
    rec.slide_ms = ms_since(t2);

    const double value = objective(next, inst);
    if (!std::isfinite(value)) throw NumericalError("non-finite objective at iteration " + std::to_string(k));
    // rounding can leave the refit a hair above the previous iterate
    if (value <= current) {
      m = std::move(next);
      current = value;
    }
    rec.objective = current;
    rec.spikes = m.size();
    rec.milliseconds = ms_since(t0);
    report.iterations.push_back(rec);
  }
  report.termination = Termination::MaxIterations;
  return {m, report};
}

double lambda_max(const ProblemInstance& inst, int grid_factor) {
  ProblemInstance unit = inst;
  unit.lambda = 1.0;
  SolverOptions defaults;
  return best_candidate(residual(Measure{}, unit), unit, grid_factor, defaults.slide_max_evals).score;
}

}  // namespace flucsr
