#pragma once

#include <string>

#include "calibdr/solver.hpp"

namespace calibdr {

enum class Target { Mu1, Mu0, Ate, Nu0, Nu1, Att };
std::string target_name(Target target);

// One arm's fitted propensity-score and outcome-regression coefficients on a
// shared basis. The basis pointer must outlive the struct.
struct FittedNuisances {
  PenalizedFit ps_fit;
  PenalizedFit or_fit;
  const RegressorBasis* basis = nullptr;
  Arm arm = Arm::Treated;
  Link link = Link::Identity;
};

// Validates arm/link/basis agreement between the two fits.
FittedNuisances make_nuisances(PenalizedFit ps_fit, PenalizedFit or_fit,
                               const RegressorBasis& basis);

struct Estimate {
  Target target = Target::Mu1;
  std::string method;
  double point = 0.0;
  double vhat = 0.0;  // influence-function variance V; se = sqrt(V/n)
  int n = 0;
  double se = 0.0;
  double level = 0.95;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// Augmented IPW integrand t*y/pi - (t/pi - 1)*m. Requires pi > 0.
double influence_phi(double y, double t, double m_hat, double pi_hat);

// Per-row influence values phi(Y, T, X; m_hat, pi_hat) for the treated-arm
// mean, and the mirrored phi(Y, 1-T, X; m_hat0, 1-pi_hat0) for the untreated
// mean. Throw when a contributing row has a vanished weight or missing Y.
Eigen::VectorXd influence_values_mu1(const FittedNuisances& nuis, const ObservedData& data);
Eigen::VectorXd influence_values_mu0(const FittedNuisances& nuis, const ObservedData& data);

Estimate aipw_mu1(const FittedNuisances& nuis, const ObservedData& data,
                  double level = 0.95);
Estimate aipw_mu0(const FittedNuisances& nuis, const ObservedData& data,
                  double level = 0.95);

// point = mu1_hat - mu0_hat; variance from the per-row difference of the two
// influence contributions.
Estimate ate(const FittedNuisances& nuis1, const FittedNuisances& nuis0,
             const ObservedData& data, double level = 0.95);

struct AttResult {
  Estimate nu1;  // treated-arm mean E(Y | T=1)
  Estimate nu0;  // counterfactual untreated mean among the treated
  Estimate att;
  Eigen::VectorXd phi_nu0;    // per-row integrand of nu0 before the 1/E~(T) scale
  Eigen::VectorXd influence;  // per-row influence of the contrast
};

// Treated-on-treated contrast from untreated-arm nuisances:
// nu1 = E~(TY)/E~(T); nu0 = E~[phi_nu0]/E~(T) with
// phi_nu0 = (1-T) pi Y/(1-pi) - ((1-T)/(1-pi) - 1) m0.
AttResult att(const FittedNuisances& nuis0, const ObservedData& data,
              double level = 0.95);

// Ratio IPW with nominal (fixed-weight) variance.
Estimate ipw_ratio_mu1(const PenalizedFit& ps_fit, const RegressorBasis& basis,
                       const ObservedData& data, double level = 0.95);

// Plain outcome-regression average with plugin variance.
Estimate or_only_mu1(const PenalizedFit& or_fit, const RegressorBasis& basis,
                     const ObservedData& data, double level = 0.95);

// b_j = (1/n)|sum_i T_i f_j(X_i)/pi_hat_i - sum_i f_j(X_i)| for j = 1..p.
Eigen::VectorXd balance_report(const PenalizedFit& ps_fit, const RegressorBasis& basis,
                               const ObservedData& data);

}  // namespace calibdr
