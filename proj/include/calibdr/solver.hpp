#pragma once

#include <optional>
#include <vector>

#include "calibdr/losses.hpp"

namespace calibdr {

struct SolverOptions {
  double kkt_tol = 1e-6;            // stationarity certificate tolerance
  int max_outer = 200;              // quadratic-approximation steps
  int max_inner = 10000;            // coordinate updates per subproblem
  double line_search_shrink = 0.5;  // backtracking factor
  double min_step = 1e-10;          // smallest accepted backtracking step
  double predictor_bound = 250.0;   // sup|f theta| past this declares divergence
};

// Stationarity certificate for loss(theta) + lambda*|theta_{1:p}|_1:
// |g_0| <= tol; |g_j| <= lambda + tol for zero slopes; |g_j + lambda*sign|
// <= tol on the active set.
struct KktReport {
  bool pass = false;
  double lambda = 0.0;
  double tol = 0.0;
  Eigen::VectorXd gradient;   // loss gradient at the fit
  Eigen::VectorXd violation;  // per-coordinate slack beyond its bound (0 = satisfied)
  double max_violation = 0.0;
  int worst_coordinate = -1;
};

struct PenalizedFit {
  Eigen::VectorXd coefficients;
  double lambda = 0.0;
  LossKind loss_kind;
  double objective = 0.0;       // penalized objective at coefficients
  std::vector<int> active_set;  // j >= 1 with coefficient exactly nonzero
  int outer_iterations = 0;
  bool converged = false;
  KktReport kkt_report;
};

// Minimizes loss(theta) + lambda*|theta_{1:p}|_1 (intercept unpenalized).
// Outer loop: quadratic model from the loss gradient and Fisher weights,
// solved by active-set coordinate descent, then backtracking on the true
// penalized objective. Non-convergence is reported via converged=false;
// throws only on invalid inputs or a non-finite starting value. The
// calibration losses need not attain their minimum at small lambda (a
// separation-type direction can beat the penalty); iterates whose linear
// predictor escapes opts.predictor_bound are on such a descent ray and the
// fit is cut off and reported non-convergent instead of polished further.
PenalizedFit fit_penalized(const LossKind& kind, const RegressorBasis& basis,
                           const ObservedData& data, double lambda,
                           const std::optional<Eigen::VectorXd>& init = {},
                           const SolverOptions& opts = {});

KktReport check_kkt(const PenalizedFit& fit, const LossKind& kind,
                    const RegressorBasis& basis, const ObservedData& data, double tol);

// Warm-started fits over a strictly descending lambda grid. Each entry
// satisfies fit_penalized's contract; failures are marked per grid point.
std::vector<PenalizedFit> fit_path(const LossKind& kind, const RegressorBasis& basis,
                                   const ObservedData& data,
                                   const std::vector<double>& lambdas,
                                   const SolverOptions& opts = {});

}  // namespace calibdr
