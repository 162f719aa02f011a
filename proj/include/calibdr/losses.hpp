#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "calibdr/dataset.hpp"

namespace calibdr {

enum class Link { Identity, Logistic };
enum class Arm { Treated, Untreated };

enum class LossVariant { MlPs, CalPs1, CalPs0, MlOr, WlOr1, WlOr0, WcalPs };

// Identifies one penalizable objective. WL_OR and WCAL_PS variants carry an
// immutable reference to the companion coefficient vector they are weighted
// by (fitted propensity-score coefficients for WL_OR, fitted outcome
// coefficients for WCAL_PS).
struct LossKind {
  LossVariant variant = LossVariant::MlPs;
  Link link = Link::Logistic;  // outcome link for OR losses; companion link for WCAL
  Arm arm = Arm::Treated;
  std::shared_ptr<const Eigen::VectorXd> companion;

  static LossKind ml_ps();
  static LossKind cal_ps(Arm arm);
  static LossKind ml_or(Link link, Arm arm);
  static LossKind wl_or(Link link, Arm arm,
                        std::shared_ptr<const Eigen::VectorXd> ps_coef);
  static LossKind wcal_ps(Link link, std::shared_ptr<const Eigen::VectorXd> or_coef);
};

std::string loss_name(const LossKind& kind);

// Loss value, exact gradient, and per-row Fisher weights omega_i such that
// the Gauss/Fisher Hessian is (1/n) sum_i omega_i f_i f_i'. All losses
// average with 1/n over all n rows, including rows contributing zero.
struct LossEval {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::VectorXd curvature_weights;
};

// f * coef, skipping zero coefficients (cheap for sparse Lasso fits).
Eigen::VectorXd linear_predictor(const RegressorBasis& basis, const Eigen::VectorXd& coef);

LossEval eval_loss(const LossKind& kind, const Eigen::VectorXd& theta,
                   const RegressorBasis& basis, const ObservedData& data);

// Value-only evaluation (used for line search and held-out CV scoring).
double loss_value(const LossKind& kind, const Eigen::VectorXd& theta,
                  const RegressorBasis& basis, const ObservedData& data);

LossEval eval_ml_ps(const Eigen::VectorXd& gamma, const RegressorBasis& basis,
                    const ObservedData& data);
LossEval eval_cal_ps(const Eigen::VectorXd& gamma, const RegressorBasis& basis,
                     const ObservedData& data, Arm arm);
LossEval eval_ml_or(const Eigen::VectorXd& alpha, const RegressorBasis& basis,
                    const ObservedData& data, Link link, Arm arm);
LossEval eval_wl_or(const Eigen::VectorXd& alpha, const RegressorBasis& basis,
                    const ObservedData& data, Link link, Arm arm,
                    const Eigen::VectorXd& ps_coef);
LossEval eval_wcal_ps(const Eigen::VectorXd& gamma, const RegressorBasis& basis,
                      const ObservedData& data, const Eigen::VectorXd& or_coef,
                      Link link);

// Intercept-only stationary point of the loss: slopes zero, intercept at the
// closed-form value solving the scalar score equation. Guarantees a finite
// first evaluation for the solver and anchors the lambda_max computation.
Eigen::VectorXd initial_coefficients(const LossKind& kind, const RegressorBasis& basis,
                                     const ObservedData& data);

}  // namespace calibdr
