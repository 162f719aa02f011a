#pragma once

// Shared fixtures and independent oracles for the test binaries. The oracles
// deliberately avoid the library's analytic shortcuts: gradients come from
// central differences of the loss value, penalized minimizers from cyclic
// coordinate search with bracketing plus golden-section refinement, and
// moments from nested adaptive quadrature.

#include <functional>
#include <string>

#include "calibdr/dataset.hpp"
#include "calibdr/losses.hpp"
#include "calibdr/rng.hpp"

namespace testsupport {

struct SynthData {
  calibdr::ObservedData data;
  calibdr::RegressorBasis basis;
};

// Both arms guaranteed, all outcomes observed, treatment logistic in the
// first covariates, linear outcome signal plus noise. With binary_outcome the
// outcome is Bernoulli at the logistic of the same signal (covariates and
// treatment unchanged for a given seed), with both classes forced per arm.
SynthData make_synth(int n, int p, std::uint64_t seed, bool binary_outcome = false);

// Logistic-link outcome regressions only make sense on binary outcomes;
// batteries sweeping all loss kinds use this to pick the right fixture.
bool logistic_outcome_loss(const calibdr::LossKind& kind);

// Central finite-difference gradient of the loss value.
Eigen::VectorXd fd_gradient(const calibdr::LossKind& kind, const Eigen::VectorXd& theta,
                            const calibdr::RegressorBasis& basis,
                            const calibdr::ObservedData& data);

// Minimizes loss + lambda * |theta_{1:p}|_1 by cyclic per-coordinate search:
// coarse bracketing grid, golden-section refinement, and an explicit
// candidate at 0 for the penalized coordinates (the kink). Independent of
// the solver's quadratic approximation.
Eigen::VectorXd brute_force_minimize(const calibdr::LossKind& kind,
                                     const calibdr::RegressorBasis& basis,
                                     const calibdr::ObservedData& data, double lambda,
                                     const Eigen::VectorXd& start, int max_sweeps = 400,
                                     double tol = 1e-10);

// Nested adaptive Simpson over (-a,a)^2 against the bivariate standard
// normal density, normalized by the truncation mass.
double truncated_moment_2d(const std::function<double(double, double)>& g, double a);

// One-dimensional version.
double truncated_moment_1d(const std::function<double(double)>& g, double a);

// Writes data as CSV (y,t,x1..xp), leaving missing outcomes empty.
void write_csv(const calibdr::ObservedData& data, const std::string& path);

}  // namespace testsupport
