#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "calibdr/estimators.hpp"
#include "calibdr/rng.hpp"
#include "calibdr/tuning.hpp"

namespace calibdr {

enum class Method { RmlRml, RcalRwl, IpwRml, IpwRcal, OrRml };

std::string method_name(Method m);             // "rml.rml", "rcal.rwl", ...
Method parse_method(const std::string& name);  // case-insensitive

// Data-generating configuration. Configs 1..3 have Gaussian outcomes with a
// linear mean, 4..6 Bernoulli outcomes with a logistic mean. Configs 1,2,4,5
// use the transformed covariates in the treatment assignment (so the fitted
// logistic propensity model is correct); 3 and 6 use the untransformed ones.
// Configs 2 and 5 use untransformed covariates in the outcome mean (so the
// fitted outcome model is misspecified); the rest use transformed ones.
struct ScenarioSpec {
  int config = 1;          // 1..6, printed as C1..C6
  int outcome_config = 1;  // leading outcome coefficient: 1 -> 1.0, 2 -> 0.25
  int n = 400;
  int p = 100;             // >= 4; the first four covariates drive truth
  std::uint64_t seed = 0;
  std::vector<Method> methods = {Method::RmlRml, Method::RcalRwl};
};

void validate_spec(const ScenarioSpec& spec);
bool scenario_outcome_binary(int config);  // true for configs 4..6
Link scenario_link(int config);

// Moments standardizing the four covariate transforms. All entries except
// var(X2/(1+e^{X1})) (numerically integrated) come from closed forms in
// normal CDF/pdf terms; the whole set is cross-checked against quadrature by
// the verification battery.
struct StandardizationConstants {
  double a = 2.5;            // truncation bound
  double c = 0.0;            // 2*Phi(a) - 1
  double b2 = 0.0;           // variance of the truncated normal
  double b = 0.0;            // sqrt(b2)
  double m4 = 0.0;           // E[X^4] of the standardized truncated normal
  double m6 = 0.0;           // E[X^6]
  std::array<double, 4> mean{};  // of the four transforms
  std::array<double, 4> sd{};

  static const StandardizationConstants& get();
};

// Z ~ N(0,1) conditioned on (-a, a) by inverse CDF; |Z| < a always.
double truncated_normal(Rng& rng, double a);

// Applies the four transforms to the first four columns (standardizing by
// the analytic constants) and copies the rest. Input columns must already be
// scaled to unit variance (X = Z/b).
Eigen::MatrixXd make_xdagger(const Eigen::MatrixXd& x);

// True treated-arm mean for the scenario: 0 for linear outcomes, 0.5 for the
// untransformed logistic mean (symmetry), Monte-Carlo values for the
// transformed logistic means (re-verified by the check battery).
double true_mu1(const ScenarioSpec& spec);

// Fresh Monte-Carlo recomputation of the transformed-logistic true mean.
double monte_carlo_mu1_logistic(int outcome_config, int draws, std::uint64_t seed);

// Draw order per replication: covariates column by column, then all
// treatment indicators, then all outcomes. Outcomes on untreated rows are
// generated but stored missing unless keep_untreated_outcomes is set.
ObservedData generate_scenario(const ScenarioSpec& spec, Rng& rng,
                               bool keep_untreated_outcomes = false);

struct MethodReport {
  Method method = Method::RmlRml;
  int n_success = 0;
  int nonconverged = 0;
  double bias = 0.0;
  double sqrt_var = 0.0;
  double sqrt_evar = 0.0;
  double cov90 = 0.0;
  double cov95 = 0.0;
  std::vector<double> t_stats;  // one per successful rep, in rep order
};

struct MonteCarloReport {
  ScenarioSpec spec;
  int reps = 0;
  int cv_folds = 5;
  GridSpec grid;
  double true_mu1 = 0.0;
  std::vector<MethodReport> methods;
};

// Runs `reps` replications: per rep, regenerate data, select lambda by CV
// for each required fit, compute each requested method's estimate. Fit
// failures are tallied per method and excluded from the summaries. The
// report is identical for any worker count: every random stream is keyed by
// (seed, rep) and the reduction runs in rep order.
MonteCarloReport run_monte_carlo(const ScenarioSpec& spec, int reps,
                                 const GridSpec& grid_spec,
                                 const SolverOptions& opts = {}, int workers = 1,
                                 int cv_folds = 5);

}  // namespace calibdr
