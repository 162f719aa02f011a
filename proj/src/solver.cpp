#include "calibdr/solver.hpp"

#include <cmath>
#include <stdexcept>

namespace calibdr {

namespace {

double l1_penalty(const Eigen::VectorXd& theta, double lambda) {
  double s = 0.0;
  for (int j = 1; j < theta.size(); ++j) s += std::fabs(theta[j]);
  return lambda * s;
}

KktReport kkt_from_gradient(const Eigen::VectorXd& grad, const Eigen::VectorXd& theta,
                            double lambda, double tol) {
  KktReport r;
  r.lambda = lambda;
  r.tol = tol;
  r.gradient = grad;
  const int m = static_cast<int>(grad.size());
  r.violation.resize(m);
  r.violation[0] = std::fabs(grad[0]);
  for (int j = 1; j < m; ++j) {
    if (theta[j] == 0.0)
      r.violation[j] = std::max(0.0, std::fabs(grad[j]) - lambda);
    else
      r.violation[j] = std::fabs(grad[j] + (theta[j] > 0.0 ? lambda : -lambda));
  }
  r.max_violation = r.violation.maxCoeff(&r.worst_coordinate);
  r.pass = std::isfinite(r.max_violation) && r.max_violation <= tol;
  return r;
}

void validate_options(const SolverOptions& o) {
  if (!(o.kkt_tol > 0.0) || o.max_outer <= 0 || o.max_inner <= 0 ||
      !(o.line_search_shrink > 0.0 && o.line_search_shrink < 1.0) ||
      !(o.min_step > 0.0) || !(o.predictor_bound > 0.0))
    throw std::invalid_argument("invalid solver options");
}

// Minimizes the quadratic model g'(theta-theta0) + (1/2)(theta-theta0)'H
// (theta-theta0) + lambda*|theta_{1:p}|_1 with H = (1/n) f' diag(omega) f,
// never forming H: wu = diag(omega) f (theta-theta0) is maintained so the
// model gradient coordinate is g_j + f_j'wu/n. Cyclic descent over the
// active set with full sweeps to admit violators, per-coordinate soft
// thresholding (ties at the threshold resolve to an exact zero).
Eigen::VectorXd solve_quadratic(const Eigen::MatrixXd& f, const Eigen::VectorXd& omega,
                                const Eigen::VectorXd& g, const Eigen::VectorXd& theta0,
                                double lambda, double tol, int max_updates) {
  const int n = static_cast<int>(f.rows());
  const int m = static_cast<int>(f.cols());
  const Eigen::MatrixXd wf = f.array().colwise() * omega.array();
  Eigen::VectorXd diag(m);
  for (int j = 0; j < m; ++j) diag[j] = f.col(j).dot(wf.col(j)) / n;
  const double floor = 1e-10 * std::max(1.0, diag.maxCoeff());

  Eigen::VectorXd theta = theta0;
  Eigen::VectorXd wu = Eigen::VectorXd::Zero(n);

  std::vector<char> in_active(m, 0);
  std::vector<int> active;
  active.reserve(m);
  active.push_back(0);
  in_active[0] = 1;
  for (int j = 1; j < m; ++j)
    if (theta0[j] != 0.0) {
      active.push_back(j);
      in_active[j] = 1;
    }

  int updates = 0;
  // Updates coordinate j; returns its pre-update model KKT violation.
  auto update = [&](int j) {
    const double qj = g[j] + f.col(j).dot(wu) / n;
    const double dj = std::max(diag[j], floor);
    double viol, target;
    if (j == 0) {
      viol = std::fabs(qj);
      target = theta[j] - qj / dj;
    } else {
      if (theta[j] == 0.0)
        viol = std::max(0.0, std::fabs(qj) - lambda);
      else
        viol = std::fabs(qj + (theta[j] > 0.0 ? lambda : -lambda));
      const double z = dj * theta[j] - qj;
      const double az = std::fabs(z) - lambda;
      target = (az > 0.0) ? (z > 0.0 ? az : -az) / dj : 0.0;
    }
    const double delta = target - theta[j];
    if (delta != 0.0) {
      theta[j] = target;
      wu += delta * wf.col(j);
    }
    ++updates;
    return viol;
  };

  while (updates < max_updates) {
    double max_active = 0.0;
    for (int j : active) max_active = std::max(max_active, update(j));
    if (max_active > tol) continue;
    double max_full = 0.0;
    for (int j = 0; j < m; ++j) {
      max_full = std::max(max_full, update(j));
      if (!in_active[j] && theta[j] != 0.0) {
        active.push_back(j);
        in_active[j] = 1;
      }
    }
    if (max_full <= tol) break;
  }
  return theta;
}

}  // namespace

PenalizedFit fit_penalized(const LossKind& kind, const RegressorBasis& basis,
                           const ObservedData& data, double lambda,
                           const std::optional<Eigen::VectorXd>& init,
                           const SolverOptions& opts) {
  validate_options(opts);
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be nonnegative");

  Eigen::VectorXd theta;
  if (init) {
    if (init->size() != basis.f.cols())
      throw std::invalid_argument("init length does not match basis");
    theta = *init;
  } else {
    theta = initial_coefficients(kind, basis, data);
  }

  LossEval eval = eval_loss(kind, theta, basis, data);
  if (!std::isfinite(eval.value))
    throw std::runtime_error("non-finite loss at initial coefficients");
  double obj = eval.value + l1_penalty(theta, lambda);

  PenalizedFit fit;
  fit.lambda = lambda;
  fit.loss_kind = kind;
  bool converged = false;
  int accepted_steps = 0;
  KktReport kkt;

  // An accepted iterate past this predictor box is descending a recession
  // ray (the penalized loss has no finite minimizer at this lambda, which
  // the calibration losses permit): stop early, report non-convergence.
  auto escaped = [&](const Eigen::VectorXd& th) {
    return (basis.f * th).cwiseAbs().maxCoeff() > opts.predictor_bound;
  };
  bool diverged = escaped(theta);

  for (int outer = 0; !diverged && outer < opts.max_outer; ++outer) {
    kkt = kkt_from_gradient(eval.gradient, theta, lambda, opts.kkt_tol);
    if (kkt.pass) {
      converged = true;
      break;
    }

    const Eigen::VectorXd prop =
        solve_quadratic(basis.f, eval.curvature_weights, eval.gradient, theta, lambda,
                        0.01 * opts.kkt_tol, opts.max_inner);
    const Eigen::VectorXd dir = prop - theta;
    const double model_decrease =
        eval.gradient.dot(dir) + l1_penalty(prop, lambda) - l1_penalty(theta, lambda);
    if (!(model_decrease < 0.0)) break;  // subproblem found no descent: stalled

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    double trial_obj = 0.0;
    while (step >= opts.min_step) {
      trial = (step == 1.0) ? prop : Eigen::VectorXd(theta + step * dir);
      const double value = loss_value(kind, trial, basis, data);
      trial_obj = value + l1_penalty(trial, lambda);
      if (std::isfinite(trial_obj) && trial_obj <= obj + 1e-4 * step * model_decrease) {
        accepted = true;
        break;
      }
      step *= opts.line_search_shrink;
    }
    if (!accepted) break;  // stalled inside line search

    theta = std::move(trial);
    obj = trial_obj;
    ++accepted_steps;
    eval = eval_loss(kind, theta, basis, data);
    diverged = escaped(theta);
  }

  if (!converged)  // certificate at the final iterate (divergence/stall exit)
    kkt = kkt_from_gradient(eval.gradient, theta, lambda, opts.kkt_tol);

  fit.coefficients = std::move(theta);
  fit.objective = obj;
  fit.outer_iterations = accepted_steps;
  fit.converged = !diverged && (converged || kkt.pass);
  fit.kkt_report = std::move(kkt);
  for (int j = 1; j < fit.coefficients.size(); ++j)
    if (fit.coefficients[j] != 0.0) fit.active_set.push_back(j);
  return fit;
}

KktReport check_kkt(const PenalizedFit& fit, const LossKind& kind,
                    const RegressorBasis& basis, const ObservedData& data, double tol) {
  const LossEval eval = eval_loss(kind, fit.coefficients, basis, data);
  return kkt_from_gradient(eval.gradient, fit.coefficients, fit.lambda, tol);
}

std::vector<PenalizedFit> fit_path(const LossKind& kind, const RegressorBasis& basis,
                                   const ObservedData& data,
                                   const std::vector<double>& lambdas,
                                   const SolverOptions& opts) {
  for (size_t k = 1; k < lambdas.size(); ++k)
    if (!(lambdas[k] < lambdas[k - 1]))
      throw std::invalid_argument("lambda grid must be strictly descending");

  std::vector<PenalizedFit> fits;
  fits.reserve(lambdas.size());
  std::optional<Eigen::VectorXd> warm;
  for (double lambda : lambdas) {
    // A diverged predecessor can make the warm start non-finite; fall back
    // to the default initialization rather than aborting the path.
    if (warm && !std::isfinite(loss_value(kind, *warm, basis, data))) warm.reset();
    fits.push_back(fit_penalized(kind, basis, data, lambda, warm, opts));
    warm = fits.back().coefficients;
  }
  return fits;
}

}  // namespace calibdr
