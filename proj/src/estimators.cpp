#include "calibdr/estimators.hpp"

#include <cmath>
#include <stdexcept>

#include "calibdr/stats.hpp"

namespace calibdr {

std::string target_name(Target target) {
  switch (target) {
    case Target::Mu1: return "mu1";
    case Target::Mu0: return "mu0";
    case Target::Ate: return "ate";
    case Target::Nu0: return "nu0";
    case Target::Nu1: return "nu1";
    case Target::Att: return "att";
  }
  return "unknown";
}

namespace {

Arm loss_arm(const LossKind& kind) {
  switch (kind.variant) {
    case LossVariant::CalPs1:
    case LossVariant::WlOr1:
    case LossVariant::WcalPs: return Arm::Treated;
    case LossVariant::CalPs0:
    case LossVariant::WlOr0: return Arm::Untreated;
    default: return kind.arm;
  }
}

double mean_of(const Eigen::VectorXd& v) { return v.mean(); }

double centered_second_moment(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return (v.array() - m).square().sum() / v.size();
}

Estimate wald(Target target, std::string method, double point, double vhat, int n,
              double level) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("confidence level must lie in (0,1)");
  Estimate e;
  e.target = target;
  e.method = std::move(method);
  e.point = point;
  e.vhat = vhat;
  e.n = n;
  e.se = std::sqrt(vhat / n);
  e.level = level;
  const double half = norm_quantile(0.5 * (1.0 + level)) * e.se;
  e.ci_low = point - half;
  e.ci_high = point + half;
  return e;
}

void require_outcome(const ObservedData& data, int row) {
  if (data.y_missing[row])
    throw std::invalid_argument("outcome missing on contributing row " +
                                std::to_string(row + 1));
}

std::string aipw_tag(const FittedNuisances& nuis) {
  return "aipw(" + loss_name(nuis.ps_fit.loss_kind) + "," +
         loss_name(nuis.or_fit.loss_kind) + ")";
}

}  // namespace

FittedNuisances make_nuisances(PenalizedFit ps_fit, PenalizedFit or_fit,
                               const RegressorBasis& basis) {
  if (ps_fit.coefficients.size() != basis.f.cols() ||
      or_fit.coefficients.size() != basis.f.cols())
    throw std::invalid_argument("fit coefficient lengths do not match basis");
  const Arm ps_arm = loss_arm(ps_fit.loss_kind);
  const Arm or_arm = loss_arm(or_fit.loss_kind);
  // ML propensity fits are arm-free; calibrated fits must match the outcome arm.
  const bool ps_armed = ps_fit.loss_kind.variant == LossVariant::CalPs1 ||
                        ps_fit.loss_kind.variant == LossVariant::CalPs0;
  if (ps_armed && ps_arm != or_arm)
    throw std::invalid_argument("propensity and outcome fits target different arms");
  FittedNuisances out;
  out.arm = or_arm;
  out.link = or_fit.loss_kind.link;
  out.ps_fit = std::move(ps_fit);
  out.or_fit = std::move(or_fit);
  out.basis = &basis;
  return out;
}

double influence_phi(double y, double t, double m_hat, double pi_hat) {
  if (!(pi_hat > 0.0)) throw std::domain_error("influence_phi requires pi_hat > 0");
  return t * y / pi_hat - (t / pi_hat - 1.0) * m_hat;
}

Eigen::VectorXd influence_values_mu1(const FittedNuisances& nuis,
                                     const ObservedData& data) {
  const RegressorBasis& basis = *nuis.basis;
  const Eigen::VectorXd ps_eta = linear_predictor(basis, nuis.ps_fit.coefficients);
  const Eigen::VectorXd or_eta = linear_predictor(basis, nuis.or_fit.coefficients);
  const int n = data.n();
  Eigen::VectorXd phi(n);
  for (int i = 0; i < n; ++i) {
    const double m = (nuis.link == Link::Identity) ? or_eta[i] : expit(or_eta[i]);
    if (data.t[i] == 1.0) {
      require_outcome(data, i);
      const double pi = expit(ps_eta[i]);
      if (!(pi > 0.0))
        throw std::runtime_error("propensity score underflow to 0 on treated row " +
                                 std::to_string(i + 1));
      phi[i] = data.y[i] / pi - (1.0 / pi - 1.0) * m;
    } else {
      phi[i] = m;
    }
  }
  return phi;
}

Eigen::VectorXd influence_values_mu0(const FittedNuisances& nuis,
                                     const ObservedData& data) {
  const RegressorBasis& basis = *nuis.basis;
  const Eigen::VectorXd ps_eta = linear_predictor(basis, nuis.ps_fit.coefficients);
  const Eigen::VectorXd or_eta = linear_predictor(basis, nuis.or_fit.coefficients);
  const int n = data.n();
  Eigen::VectorXd phi(n);
  for (int i = 0; i < n; ++i) {
    const double m = (nuis.link == Link::Identity) ? or_eta[i] : expit(or_eta[i]);
    if (data.t[i] == 0.0) {
      require_outcome(data, i);
      const double one_minus_pi = expit(-ps_eta[i]);
      if (!(one_minus_pi > 0.0))
        throw std::runtime_error(
            "propensity-score complement underflow to 0 on untreated row " +
            std::to_string(i + 1));
      phi[i] = data.y[i] / one_minus_pi - (1.0 / one_minus_pi - 1.0) * m;
    } else {
      phi[i] = m;
    }
  }
  return phi;
}

Estimate aipw_mu1(const FittedNuisances& nuis, const ObservedData& data, double level) {
  const Eigen::VectorXd phi = influence_values_mu1(nuis, data);
  const double point = mean_of(phi);
  return wald(Target::Mu1, aipw_tag(nuis), point, centered_second_moment(phi),
              data.n(), level);
}

Estimate aipw_mu0(const FittedNuisances& nuis, const ObservedData& data, double level) {
  const Eigen::VectorXd phi = influence_values_mu0(nuis, data);
  const double point = mean_of(phi);
  return wald(Target::Mu0, aipw_tag(nuis), point, centered_second_moment(phi),
              data.n(), level);
}

Estimate ate(const FittedNuisances& nuis1, const FittedNuisances& nuis0,
             const ObservedData& data, double level) {
  const Eigen::VectorXd phi1 = influence_values_mu1(nuis1, data);
  const Eigen::VectorXd phi0 = influence_values_mu0(nuis0, data);
  const Eigen::VectorXd diff = phi1 - phi0;
  return wald(Target::Ate, aipw_tag(nuis1) + "-" + aipw_tag(nuis0), mean_of(diff),
              centered_second_moment(diff), data.n(), level);
}

AttResult att(const FittedNuisances& nuis0, const ObservedData& data, double level) {
  const RegressorBasis& basis = *nuis0.basis;
  const Eigen::VectorXd ps_eta = linear_predictor(basis, nuis0.ps_fit.coefficients);
  const Eigen::VectorXd or_eta = linear_predictor(basis, nuis0.or_fit.coefficients);
  const int n = data.n();
  const double tbar = data.t.mean();
  if (!(tbar > 0.0)) throw std::invalid_argument("no treated rows");
  if (!(tbar < 1.0)) throw std::invalid_argument("no untreated rows");

  double sum_ty = 0.0;
  Eigen::VectorXd phi_nu0(n);
  for (int i = 0; i < n; ++i) {
    const double m0 = (nuis0.link == Link::Identity) ? or_eta[i] : expit(or_eta[i]);
    if (data.t[i] == 1.0) {
      require_outcome(data, i);
      sum_ty += data.y[i];
      phi_nu0[i] = m0;
    } else {
      require_outcome(data, i);
      const double pi = expit(ps_eta[i]);
      const double one_minus_pi = expit(-ps_eta[i]);
      if (!(one_minus_pi > 0.0))
        throw std::runtime_error("propensity score reached 1 on untreated row " +
                                 std::to_string(i + 1));
      phi_nu0[i] = pi * data.y[i] / one_minus_pi - (1.0 / one_minus_pi - 1.0) * m0;
    }
  }
  const double nu1_point = sum_ty / n / tbar;
  const double nu0_point = phi_nu0.mean() / tbar;

  Eigen::VectorXd inf1(n), inf0(n);
  for (int i = 0; i < n; ++i) {
    inf1[i] = data.t[i] * ((data.t[i] == 1.0 ? data.y[i] : 0.0) - nu1_point) / tbar;
    inf0[i] = (phi_nu0[i] - data.t[i] * nu0_point) / tbar;
  }

  const std::string tag = aipw_tag(nuis0);
  AttResult out;
  out.nu1 = wald(Target::Nu1, tag, nu1_point, centered_second_moment(inf1), n, level);
  out.nu0 = wald(Target::Nu0, tag, nu0_point, centered_second_moment(inf0), n, level);
  out.phi_nu0 = std::move(phi_nu0);
  out.influence = inf1 - inf0;
  out.att = wald(Target::Att, tag, nu1_point - nu0_point,
                 centered_second_moment(out.influence), n, level);
  return out;
}

Estimate ipw_ratio_mu1(const PenalizedFit& ps_fit, const RegressorBasis& basis,
                       const ObservedData& data, double level) {
  const Eigen::VectorXd ps_eta = linear_predictor(basis, ps_fit.coefficients);
  const int n = data.n();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  double num = 0.0;
  for (int i = 0; i < n; ++i) {
    if (data.t[i] != 1.0) continue;
    require_outcome(data, i);
    const double pi = expit(ps_eta[i]);
    if (!(pi > 0.0))
      throw std::runtime_error("propensity score underflow to 0 on treated row " +
                               std::to_string(i + 1));
    w[i] = 1.0 / pi;
    num += data.y[i] / pi;
  }
  const double den = w.mean();
  if (!(den > 0.0)) throw std::runtime_error("zero denominator in ratio IPW");
  const double point = (num / n) / den;

  double vacc = 0.0;
  for (int i = 0; i < n; ++i) {
    if (data.t[i] != 1.0) continue;
    const double r = w[i] * (data.y[i] - point);
    vacc += r * r;
  }
  const double vhat = (vacc / n) / (den * den);
  return wald(Target::Mu1, "ipw(" + loss_name(ps_fit.loss_kind) + ")", point, vhat, n,
              level);
}

Estimate or_only_mu1(const PenalizedFit& or_fit, const RegressorBasis& basis,
                     const ObservedData& data, double level) {
  const Eigen::VectorXd or_eta = linear_predictor(basis, or_fit.coefficients);
  Eigen::VectorXd m(or_eta.size());
  const bool identity = or_fit.loss_kind.link == Link::Identity;
  for (int i = 0; i < m.size(); ++i) m[i] = identity ? or_eta[i] : expit(or_eta[i]);
  return wald(Target::Mu1, "or(" + loss_name(or_fit.loss_kind) + ")", mean_of(m),
              centered_second_moment(m), data.n(), level);
}

Eigen::VectorXd balance_report(const PenalizedFit& ps_fit, const RegressorBasis& basis,
                               const ObservedData& data) {
  const Eigen::VectorXd ps_eta = linear_predictor(basis, ps_fit.coefficients);
  const int n = data.n();
  const int p = basis.p();
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i)
    w[i] = (data.t[i] == 1.0) ? 1.0 / expit(ps_eta[i]) - 1.0 : -1.0;
  const Eigen::VectorXd diff = basis.f.rightCols(p).transpose() * w / n;
  return diff.cwiseAbs();
}

}  // namespace calibdr
