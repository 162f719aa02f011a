#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "calibdr/rng.hpp"
#include "calibdr/solver.hpp"

namespace calibdr {

// Descending grid {lambda_max / step_divisor^j : j = 0..num_points-1}.
struct GridSpec {
  int num_points = 11;
  double step_divisor = 2.0;
  std::string label = "pow2:11";

  // Accepts "pow2:N" (halving steps) and "pow2q:N" (quarter-power steps).
  static GridSpec parse(const std::string& text);
};

// Smallest penalty with an all-zero-slope solution: the max absolute slope
// gradient of the loss at its intercept-only stationary point.
double lambda_max(const LossKind& kind, const RegressorBasis& basis,
                  const ObservedData& data);

std::vector<double> make_grid(double lambda_max_value, const GridSpec& spec);

// Deterministic treatment-stratified fold assignment; fold sizes differ by
// at most one overall and within each arm. Throws if some fold would end up
// with a single treatment class.
std::vector<int> stratified_folds(const Eigen::VectorXd& t, int K, Rng rng);

struct CvResult {
  double selected_lambda = 0.0;
  int selected_index = -1;
  std::vector<double> grid;
  std::vector<double> cv_values;  // NaN on grid points excluded from selection
  std::vector<char> valid;        // 0 = some fold fit failed at this grid point
  std::vector<int> fold_assignment;
  std::uint64_t seed = 0;
};

// K-fold cross-validation of the loss over the grid derived from the
// full-sample lambda_max. Fold fits are warm-started paths on the fold
// complement; the criterion averages the held-out loss value. Companion
// coefficients inside `kind` (WL/WCAL weights) stay fixed across folds.
// Ties break toward larger lambda; non-convergent points are excluded.
CvResult cross_validate(const LossKind& kind, const RegressorBasis& basis,
                        const ObservedData& data, const GridSpec& grid_spec,
                        int K = 5, std::uint64_t seed = 0,
                        const SolverOptions& opts = {});

struct SelectedFit {
  CvResult cv;
  PenalizedFit fit;  // full-data fit at the selected lambda
};

// cross_validate followed by a warm-started full-data path down to the
// selected lambda.
SelectedFit select_and_fit(const LossKind& kind, const RegressorBasis& basis,
                           const ObservedData& data, const GridSpec& grid_spec,
                           int K = 5, std::uint64_t seed = 0,
                           const SolverOptions& opts = {});

}  // namespace calibdr
