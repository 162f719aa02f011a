#include "calibdr/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "calibdr/stats.hpp"

namespace calibdr {

Eigen::VectorXd linear_predictor(const RegressorBasis& basis, const Eigen::VectorXd& coef) {
  if (coef.size() != basis.f.cols())
    throw std::invalid_argument("coefficient length does not match basis");
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(basis.f.rows());
  for (int j = 0; j < coef.size(); ++j)
    if (coef[j] != 0.0) eta += coef[j] * basis.f.col(j);
  return eta;
}

LossKind LossKind::ml_ps() {
  LossKind k;
  k.variant = LossVariant::MlPs;
  k.link = Link::Logistic;
  return k;
}

LossKind LossKind::cal_ps(Arm arm) {
  LossKind k;
  k.variant = (arm == Arm::Treated) ? LossVariant::CalPs1 : LossVariant::CalPs0;
  k.link = Link::Logistic;
  k.arm = arm;
  return k;
}

LossKind LossKind::ml_or(Link link, Arm arm) {
  LossKind k;
  k.variant = LossVariant::MlOr;
  k.link = link;
  k.arm = arm;
  return k;
}

LossKind LossKind::wl_or(Link link, Arm arm,
                         std::shared_ptr<const Eigen::VectorXd> ps_coef) {
  if (!ps_coef) throw std::invalid_argument("wl_or requires fitted ps coefficients");
  LossKind k;
  k.variant = (arm == Arm::Treated) ? LossVariant::WlOr1 : LossVariant::WlOr0;
  k.link = link;
  k.arm = arm;
  k.companion = std::move(ps_coef);
  return k;
}

LossKind LossKind::wcal_ps(Link link, std::shared_ptr<const Eigen::VectorXd> or_coef) {
  if (!or_coef) throw std::invalid_argument("wcal_ps requires fitted or coefficients");
  LossKind k;
  k.variant = LossVariant::WcalPs;
  k.link = link;
  k.arm = Arm::Treated;
  k.companion = std::move(or_coef);
  return k;
}

std::string loss_name(const LossKind& kind) {
  const char* link = (kind.link == Link::Identity) ? "identity" : "logistic";
  const char* arm = (kind.arm == Arm::Treated) ? "treated" : "untreated";
  switch (kind.variant) {
    case LossVariant::MlPs: return "ml_ps";
    case LossVariant::CalPs1: return "cal_ps_treated";
    case LossVariant::CalPs0: return "cal_ps_untreated";
    case LossVariant::MlOr: return std::string("ml_or(") + link + "," + arm + ")";
    case LossVariant::WlOr1: return std::string("wl_or(") + link + ",treated)";
    case LossVariant::WlOr0: return std::string("wl_or(") + link + ",untreated)";
    case LossVariant::WcalPs: return std::string("wcal_ps(") + link + ")";
  }
  return "unknown";
}

namespace {

double psi_value(Link link, double u) {
  return link == Link::Identity ? 0.5 * u * u : log1pexp(u);
}
double psi_mean(Link link, double u) { return link == Link::Identity ? u : expit(u); }
double psi_curv(Link link, double u) {
  if (link == Link::Identity) return 1.0;
  const double e = expit(u);
  return e * (1.0 - e);
}

void check_sizes(const Eigen::VectorXd& theta, const RegressorBasis& basis,
                 const ObservedData& data) {
  if (theta.size() != basis.f.cols())
    throw std::invalid_argument("coefficient length does not match basis");
  if (basis.f.rows() != data.n())
    throw std::invalid_argument("basis and data row counts disagree");
}

void require_outcome(const ObservedData& data, int row) {
  if (data.y_missing[row])
    throw std::invalid_argument("outcome missing on contributing row " +
                                std::to_string(row + 1));
}

// Companion linear predictor and per-row WL weights v_i (zero off-arm).
Eigen::VectorXd wl_weights(const LossKind& kind, const RegressorBasis& basis,
                           const ObservedData& data) {
  const Eigen::VectorXd eta = linear_predictor(basis, *kind.companion);
  const int n = data.n();
  Eigen::VectorXd v(n);
  const bool treated = kind.variant == LossVariant::WlOr1;
  for (int i = 0; i < n; ++i) {
    const bool on_arm = treated ? data.t[i] == 1.0 : data.t[i] == 0.0;
    v[i] = on_arm ? std::exp(treated ? -eta[i] : eta[i]) : 0.0;
    if (on_arm && !std::isfinite(v[i]))
      throw std::runtime_error("non-finite weight in weighted outcome loss at row " +
                               std::to_string(i + 1));
  }
  return v;
}

struct Terms {
  double value = 0.0;
  Eigen::VectorXd resid;  // gradient = f' resid / n
  Eigen::VectorXd omega;
};

// want_grad=false computes value only and leaves resid/omega empty.
Terms row_terms(const LossKind& kind, const Eigen::VectorXd& eta,
                const RegressorBasis& basis, const ObservedData& data,
                bool want_grad) {
  const int n = data.n();
  Terms out;
  if (want_grad) {
    out.resid.resize(n);
    out.omega.resize(n);
  }
  double acc = 0.0;
  switch (kind.variant) {
    case LossVariant::MlPs: {
      for (int i = 0; i < n; ++i) {
        acc += log1pexp(eta[i]) - data.t[i] * eta[i];
        if (want_grad) {
          const double pi = expit(eta[i]);
          out.resid[i] = pi - data.t[i];
          out.omega[i] = pi * (1.0 - pi);
        }
      }
      break;
    }
    case LossVariant::CalPs1: {
      for (int i = 0; i < n; ++i) {
        if (data.t[i] == 1.0) {
          const double w = std::exp(-eta[i]);
          acc += w;
          if (want_grad) {
            out.resid[i] = -w;
            out.omega[i] = w;
          }
        } else {
          acc += eta[i];
          if (want_grad) {
            out.resid[i] = 1.0;
            out.omega[i] = 0.0;
          }
        }
      }
      break;
    }
    case LossVariant::CalPs0: {
      for (int i = 0; i < n; ++i) {
        if (data.t[i] == 0.0) {
          const double w = std::exp(eta[i]);
          acc += w;
          if (want_grad) {
            out.resid[i] = w;
            out.omega[i] = w;
          }
        } else {
          acc += -eta[i];
          if (want_grad) {
            out.resid[i] = -1.0;
            out.omega[i] = 0.0;
          }
        }
      }
      break;
    }
    case LossVariant::MlOr: {
      const bool treated = kind.arm == Arm::Treated;
      for (int i = 0; i < n; ++i) {
        const bool on_arm = treated ? data.t[i] == 1.0 : data.t[i] == 0.0;
        if (!on_arm) {
          if (want_grad) {
            out.resid[i] = 0.0;
            out.omega[i] = 0.0;
          }
          continue;
        }
        require_outcome(data, i);
        acc += -data.y[i] * eta[i] + psi_value(kind.link, eta[i]);
        if (want_grad) {
          out.resid[i] = psi_mean(kind.link, eta[i]) - data.y[i];
          out.omega[i] = psi_curv(kind.link, eta[i]);
        }
      }
      break;
    }
    case LossVariant::WlOr1:
    case LossVariant::WlOr0: {
      const Eigen::VectorXd v = wl_weights(kind, basis, data);
      for (int i = 0; i < n; ++i) {
        if (v[i] == 0.0) {
          if (want_grad) {
            out.resid[i] = 0.0;
            out.omega[i] = 0.0;
          }
          continue;
        }
        require_outcome(data, i);
        acc += v[i] * (-data.y[i] * eta[i] + psi_value(kind.link, eta[i]));
        if (want_grad) {
          out.resid[i] = v[i] * (psi_mean(kind.link, eta[i]) - data.y[i]);
          out.omega[i] = v[i] * psi_curv(kind.link, eta[i]);
        }
      }
      break;
    }
    case LossVariant::WcalPs: {
      const Eigen::VectorXd or_eta = linear_predictor(basis, *kind.companion);
      for (int i = 0; i < n; ++i) {
        const double u = psi_curv(kind.link, or_eta[i]);
        if (data.t[i] == 1.0) {
          const double w = std::exp(-eta[i]);
          acc += u * w;
          if (want_grad) {
            out.resid[i] = -u * w;
            out.omega[i] = u * w;
          }
        } else {
          acc += u * eta[i];
          if (want_grad) {
            out.resid[i] = u;
            out.omega[i] = 0.0;
          }
        }
      }
      break;
    }
  }
  out.value = acc / n;
  return out;
}

}  // namespace

LossEval eval_loss(const LossKind& kind, const Eigen::VectorXd& theta,
                   const RegressorBasis& basis, const ObservedData& data) {
  check_sizes(theta, basis, data);
  const Eigen::VectorXd eta = basis.f * theta;
  Terms t = row_terms(kind, eta, basis, data, true);
  LossEval out;
  out.value = t.value;
  out.gradient = basis.f.transpose() * t.resid / data.n();
  out.curvature_weights = std::move(t.omega);
  return out;
}

double loss_value(const LossKind& kind, const Eigen::VectorXd& theta,
                  const RegressorBasis& basis, const ObservedData& data) {
  check_sizes(theta, basis, data);
  const Eigen::VectorXd eta = basis.f * theta;
  return row_terms(kind, eta, basis, data, false).value;
}

LossEval eval_ml_ps(const Eigen::VectorXd& gamma, const RegressorBasis& basis,
                    const ObservedData& data) {
  return eval_loss(LossKind::ml_ps(), gamma, basis, data);
}

LossEval eval_cal_ps(const Eigen::VectorXd& gamma, const RegressorBasis& basis,
                     const ObservedData& data, Arm arm) {
  return eval_loss(LossKind::cal_ps(arm), gamma, basis, data);
}

LossEval eval_ml_or(const Eigen::VectorXd& alpha, const RegressorBasis& basis,
                    const ObservedData& data, Link link, Arm arm) {
  return eval_loss(LossKind::ml_or(link, arm), alpha, basis, data);
}

LossEval eval_wl_or(const Eigen::VectorXd& alpha, const RegressorBasis& basis,
                    const ObservedData& data, Link link, Arm arm,
                    const Eigen::VectorXd& ps_coef) {
  auto coef = std::make_shared<const Eigen::VectorXd>(ps_coef);
  return eval_loss(LossKind::wl_or(link, arm, std::move(coef)), alpha, basis, data);
}

LossEval eval_wcal_ps(const Eigen::VectorXd& gamma, const RegressorBasis& basis,
                      const ObservedData& data, const Eigen::VectorXd& or_coef,
                      Link link) {
  auto coef = std::make_shared<const Eigen::VectorXd>(or_coef);
  return eval_loss(LossKind::wcal_ps(link, std::move(coef)), gamma, basis, data);
}

Eigen::VectorXd initial_coefficients(const LossKind& kind, const RegressorBasis& basis,
                                     const ObservedData& data) {
  const int n = data.n();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(basis.f.cols());
  auto logit = [](double q) {
    if (!(q > 0.0 && q < 1.0))
      throw std::runtime_error("degenerate proportion, intercept init undefined");
    return std::log(q / (1.0 - q));
  };

  switch (kind.variant) {
    case LossVariant::MlPs:
    case LossVariant::CalPs1:
    case LossVariant::CalPs0: {
      theta[0] = logit(data.t.mean());
      break;
    }
    case LossVariant::MlOr:
    case LossVariant::WlOr1:
    case LossVariant::WlOr0: {
      Eigen::VectorXd v;
      if (kind.variant == LossVariant::MlOr) {
        v = (kind.arm == Arm::Treated)
                ? data.t
                : Eigen::VectorXd(Eigen::VectorXd::Ones(n) - data.t);
      } else {
        v = wl_weights(kind, basis, data);
      }
      double sw = 0.0, swy = 0.0;
      for (int i = 0; i < n; ++i) {
        if (v[i] == 0.0) continue;
        require_outcome(data, i);
        sw += v[i];
        swy += v[i] * data.y[i];
      }
      if (sw <= 0.0) throw std::runtime_error("no contributing rows for outcome loss");
      const double mean = swy / sw;
      theta[0] = (kind.link == Link::Identity) ? mean : logit(mean);
      break;
    }
    case LossVariant::WcalPs: {
      const Eigen::VectorXd or_eta = linear_predictor(basis, *kind.companion);
      double s1 = 0.0, s0 = 0.0;
      for (int i = 0; i < n; ++i) {
        const double u = psi_curv(kind.link, or_eta[i]);
        if (data.t[i] == 1.0)
          s1 += u;
        else
          s0 += u;
      }
      if (s1 <= 0.0 || s0 <= 0.0)
        throw std::runtime_error("degenerate weights, intercept init undefined");
      theta[0] = std::log(s1 / s0);
      break;
    }
  }
  return theta;
}

}  // namespace calibdr
