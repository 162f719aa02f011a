#include "calibdr/checks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>

#include "calibdr/rng.hpp"
#include "calibdr/simulation.hpp"
#include "calibdr/solver.hpp"
#include "calibdr/stats.hpp"
#include "calibdr/tuning.hpp"

namespace calibdr {

bool CheckReport::all_pass() const {
  return std::all_of(lines.begin(), lines.end(),
                     [](const CheckLine& l) { return l.pass; });
}

namespace {

bool logistic_outcome_loss(const LossKind& kind) {
  const bool outcome_loss = kind.variant == LossVariant::MlOr ||
                            kind.variant == LossVariant::WlOr1 ||
                            kind.variant == LossVariant::WlOr0;
  return outcome_loss && kind.link == Link::Logistic;
}

// Synthetic data with both arms, fully observed outcomes, logistic-scale
// treatment, and the outcome in two flavors sharing covariates and
// treatment: a linear signal plus noise, and a Bernoulli draw at the
// logistic of the same signal (logistic-link outcome regressions are only
// coherent on binary outcomes).
struct Synth {
  ObservedData cont;
  ObservedData bin;
  RegressorBasis basis;

  const ObservedData& pick(const LossKind& kind) const {
    return logistic_outcome_loss(kind) ? bin : cont;
  }
};

Synth synthetic_loss_data(int n, int p, Rng rng) {
  ObservedData data;
  data.x.resize(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) data.x(i, j) = rng.normal();
  data.t.resize(n);
  data.y.resize(n);
  data.y_missing.assign(n, 0);
  Eigen::VectorXd y_bin(n);
  for (int i = 0; i < n; ++i) {
    const double eta = 0.6 * data.x(i, 0) - 0.4 * data.x(i, 1) + 0.2 * data.x(i, 2);
    data.t[i] = rng.uniform() < expit(eta) ? 1.0 : 0.0;
    const double signal = data.x(i, 0) + 0.5 * data.x(i, 1);
    data.y[i] = signal + rng.normal();
    y_bin[i] = rng.uniform() < expit(signal) ? 1.0 : 0.0;
  }
  // Guarantee both arms even on adversarial draws.
  data.t[0] = 1.0;
  data.t[n - 1] = 0.0;
  Synth out;
  out.cont = std::move(data);
  out.bin = out.cont;
  out.bin.y = std::move(y_bin);
  // Both outcome classes in each arm keep the intercept inits finite.
  for (double arm : {1.0, 0.0}) {
    int seen = 0;
    for (int i = 0; i < n && seen < 2; ++i) {
      if (out.bin.t[i] != arm) continue;
      out.bin.y[i] = seen == 0 ? 1.0 : 0.0;
      ++seen;
    }
  }
  out.basis = build_basis(out.cont, /*standardize=*/false);
  return out;
}

Eigen::VectorXd random_coefficients(int dim, double scale, Rng& rng) {
  Eigen::VectorXd theta(dim);
  for (int j = 0; j < dim; ++j) theta[j] = scale * rng.normal();
  return theta;
}

// All loss variants over the synthetic data, with companion coefficients
// drawn at the same scale as the evaluation points.
std::vector<LossKind> all_loss_kinds(int dim, Rng& rng) {
  const double scale = 0.3 / std::sqrt(static_cast<double>(dim));
  auto companion = [&] {
    return std::make_shared<const Eigen::VectorXd>(random_coefficients(dim, scale, rng));
  };
  std::vector<LossKind> kinds;
  kinds.push_back(LossKind::ml_ps());
  kinds.push_back(LossKind::cal_ps(Arm::Treated));
  kinds.push_back(LossKind::cal_ps(Arm::Untreated));
  kinds.push_back(LossKind::ml_or(Link::Identity, Arm::Treated));
  kinds.push_back(LossKind::ml_or(Link::Logistic, Arm::Untreated));
  kinds.push_back(LossKind::wl_or(Link::Identity, Arm::Treated, companion()));
  kinds.push_back(LossKind::wl_or(Link::Logistic, Arm::Untreated, companion()));
  kinds.push_back(LossKind::wcal_ps(Link::Identity, companion()));
  kinds.push_back(LossKind::wcal_ps(Link::Logistic, companion()));
  return kinds;
}

double fd_gradient_error(const LossKind& kind, const Eigen::VectorXd& theta,
                         const RegressorBasis& basis, const ObservedData& data,
                         bool corrupt) {
  LossEval eval = eval_loss(kind, theta, basis, data);
  Eigen::VectorXd grad = eval.gradient;
  if (corrupt) grad[1] += 1e-3;
  double worst = 0.0;
  Eigen::VectorXd probe = theta;
  for (int j = 0; j < theta.size(); ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(theta[j]));
    probe[j] = theta[j] + h;
    const double up = loss_value(kind, probe, basis, data);
    probe[j] = theta[j] - h;
    const double down = loss_value(kind, probe, basis, data);
    probe[j] = theta[j];
    const double fd = (up - down) / (2.0 * h);
    const double err = std::abs(grad[j] - fd) / std::max(1.0, std::abs(grad[j]));
    worst = std::max(worst, err);
  }
  return worst;
}

void gradient_battery(const CheckOptions& options, int n, int p, int points,
                      CheckReport& report) {
  Rng rng = Rng::seeded(options.seed).child(1);
  Synth synth = synthetic_loss_data(n, p, rng.child(0));
  Rng theta_rng = rng.child(1);
  Rng kind_rng = rng.child(2);
  const int dim = static_cast<int>(synth.basis.p()) + 1;
  const double scale = 0.3 / std::sqrt(static_cast<double>(dim));
  for (const LossKind& kind : all_loss_kinds(dim, kind_rng)) {
    const std::string label = loss_name(kind);
    const bool corrupt =
        !options.corrupt_gradient.empty() &&
        label.rfind(options.corrupt_gradient, 0) == 0;
    double worst = 0.0;
    for (int k = 0; k < points; ++k) {
      Eigen::VectorXd theta = random_coefficients(dim, scale, theta_rng);
      worst = std::max(worst, fd_gradient_error(kind, theta, synth.basis,
                                                synth.pick(kind), corrupt));
    }
    CheckLine line;
    line.name = "gradient_fd[" + label + "]";
    line.observed = worst;
    line.bound = 1e-5;
    line.pass = worst <= line.bound;
    report.lines.push_back(std::move(line));
  }
}

// Fits random (loss, lambda) instances and certifies stationarity; for the
// calibrated propensity losses additionally checks the implied identity
// mean(T/pi_hat) = 1 (mirrored for the untreated arm).
void kkt_battery(const CheckOptions& options, int instances, int n, int p,
                 CheckReport& report) {
  Rng rng = Rng::seeded(options.seed).child(2);
  Synth synth = synthetic_loss_data(n, p, rng.child(0));
  Rng pick = rng.child(1);
  const int dim = static_cast<int>(synth.basis.p()) + 1;
  Rng companion_rng = rng.child(2);
  std::vector<LossKind> kinds = all_loss_kinds(dim, companion_rng);
  const double tol = 1e-6;
  SolverOptions opts;
  opts.kkt_tol = tol;

  double worst_kkt = 0.0;
  double worst_ipw = 0.0;
  int failures = 0;
  std::string detail;
  for (int k = 0; k < instances; ++k) {
    const LossKind& kind = kinds[k % kinds.size()];
    const ObservedData& data = synth.pick(kind);
    const double frac = 0.05 + 0.95 * pick.uniform();
    const double lambda = frac * lambda_max(kind, synth.basis, data);
    PenalizedFit fit = fit_penalized(kind, synth.basis, data, lambda, {}, opts);
    KktReport kkt = check_kkt(fit, kind, synth.basis, data, tol);
    worst_kkt = std::max(worst_kkt, kkt.max_violation);
    if (!fit.converged || !kkt.pass) {
      ++failures;
      if (detail.empty())
        detail = "instance " + std::to_string(k) + " (" + loss_name(kind) + ")";
    }
    if (kind.variant == LossVariant::CalPs1 || kind.variant == LossVariant::CalPs0) {
      const Eigen::VectorXd eta = linear_predictor(synth.basis, fit.coefficients);
      double acc = 0.0;
      for (int i = 0; i < eta.size(); ++i) {
        const double t = data.t[i];
        acc += kind.variant == LossVariant::CalPs1 ? t / expit(eta[i])
                                                   : (1.0 - t) / expit(-eta[i]);
      }
      worst_ipw = std::max(worst_ipw, std::abs(acc / eta.size() - 1.0));
    }
  }

  CheckLine line;
  line.name = "kkt_certificate[" + std::to_string(instances) + " instances]";
  line.observed = worst_kkt;
  line.bound = tol;
  line.pass = failures == 0;
  line.detail = detail;
  report.lines.push_back(std::move(line));

  CheckLine ipw;
  ipw.name = "calibration_identity[mean(T/pi)=1]";
  ipw.observed = worst_ipw;
  ipw.bound = tol;
  ipw.pass = worst_ipw <= tol;
  report.lines.push_back(std::move(ipw));
}

double integrate2d(const std::function<double(double, double)>& g, double a) {
  return integrate(
      [&](double z1) {
        return norm_pdf(z1) *
               integrate([&](double z3) { return norm_pdf(z3) * g(z1, z3); }, -a, a,
                         1e-11);
      },
      -a, a, 1e-10);
}

void push_line(CheckReport& report, const std::string& name, double observed,
               double bound) {
  CheckLine line;
  line.name = name;
  line.observed = observed;
  line.bound = bound;
  line.pass = observed <= bound;
  report.lines.push_back(std::move(line));
}

// Every analytic standardization constant against direct quadrature of its
// defining integral (two-dimensional for the interaction and sum
// transforms), plus the tabulated value of the second transform's scale.
void constants_battery(CheckReport& report) {
  const auto& s = StandardizationConstants::get();
  const double a = s.a;
  const double b = s.b;

  const double c_quad = integrate([](double z) { return norm_pdf(z); }, -a, a, 1e-13);
  push_line(report, "const[c]", std::abs(s.c - c_quad), 1e-12);

  const double b2_quad =
      integrate([](double z) { return z * z * norm_pdf(z); }, -a, a, 1e-13) / s.c;
  push_line(report, "const[b2]", std::abs(s.b2 - b2_quad), 1e-12);

  auto moment1d = [&](const std::function<double(double)>& g) {
    return integrate([&](double z) { return g(z) * norm_pdf(z); }, -a, a, 1e-12) / s.c;
  };
  const double m4_quad = moment1d([&](double z) { return std::pow(z / b, 4); });
  push_line(report, "const[m4]", std::abs(s.m4 - m4_quad), 1e-8);
  const double m6_quad = moment1d([&](double z) { return std::pow(z / b, 6); });
  push_line(report, "const[m6]", std::abs(s.m6 - m6_quad), 1e-8);

  const double mean0_quad = moment1d([&](double z) { return std::exp(0.5 * z / b); });
  push_line(report, "const[mean_exp]", std::abs(s.mean[0] - mean0_quad), 1e-8);
  const double second0_quad = moment1d([&](double z) { return std::exp(z / b); });
  const double var0_quad = second0_quad - mean0_quad * mean0_quad;
  push_line(report, "const[var_exp]",
            std::abs(s.sd[0] * s.sd[0] - var0_quad), 1e-8);

  const double var1_quad = moment1d([&](double z) {
    const double r = 1.0 + std::exp(z / b);
    return 1.0 / (r * r);
  });
  push_line(report, "const[var_ratio]",
            std::abs(s.sd[1] * s.sd[1] - var1_quad), 1e-8);
  push_line(report, "const[sd_ratio_tabulated]",
            std::abs(s.sd[1] - 0.54257865), 1e-6);

  const double c2 = s.c * s.c;
  auto cube = [&](double z1, double z3) {
    const double u = 0.04 * (z1 / b) * (z3 / b) + 0.6;
    return u * u * u;
  };
  const double mean2_quad = integrate2d(cube, a) / c2;
  push_line(report, "const[mean_cube]", std::abs(s.mean[2] - mean2_quad), 1e-8);
  const double second2_quad =
      integrate2d([&](double z1, double z3) { return std::pow(cube(z1, z3), 2); }, a) /
      c2;
  push_line(report, "const[var_cube]",
            std::abs(s.sd[2] * s.sd[2] - (second2_quad - mean2_quad * mean2_quad)),
            1e-8);

  auto square = [&](double z2, double z4) {
    const double q = z2 / b + z4 / b + 20.0;
    return q * q;
  };
  const double mean3_quad = integrate2d(square, a) / c2;
  push_line(report, "const[mean_square]", std::abs(s.mean[3] - mean3_quad), 1e-8);
  const double second3_quad =
      integrate2d([&](double z2, double z4) { return std::pow(square(z2, z4), 2); },
                  a) /
      c2;
  push_line(report, "const[var_square]",
            std::abs(s.sd[3] * s.sd[3] - (second3_quad - mean3_quad * mean3_quad)),
            1e-8);
}

void sampling_battery(const CheckOptions& options, CheckReport& report) {
  const auto& s = StandardizationConstants::get();
  const int draws = 1000000;
  Rng rng = Rng::seeded(options.seed).child(3);
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double v = truncated_normal(rng, s.a) / s.b;
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / draws;
  const double var = sum2 / draws - mean * mean;
  push_line(report, "sampling[mean]", std::abs(mean), 5e-3);
  push_line(report, "sampling[var]", std::abs(var - 1.0), 7e-3);
}

void truth_battery(CheckReport& report) {
  const double recomputed1 = monte_carlo_mu1_logistic(1, 1000000, 12345);
  push_line(report, "truth[mu1,logistic,lead=1.0]",
            std::abs(recomputed1 - 0.4949676), 2e-3);
  const double recomputed2 = monte_carlo_mu1_logistic(2, 1000000, 54321);
  push_line(report, "truth[mu1,logistic,lead=0.25]",
            std::abs(recomputed2 - 0.4992349), 2e-3);
}

}  // namespace

CheckReport run_checks(const CheckOptions& options) {
  CheckReport report;
  if (options.quick) {
    gradient_battery(options, 120, 20, 5, report);
    kkt_battery(options, 10, 150, 30, report);
  } else {
    gradient_battery(options, 200, 50, 20, report);
    kkt_battery(options, 50, 200, 50, report);
  }
  constants_battery(report);
  if (!options.quick) {
    sampling_battery(options, report);
    truth_battery(report);
  }
  return report;
}

}  // namespace calibdr
