#include "calibdr/tuning.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace calibdr {

GridSpec GridSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("grid spec must look like pow2:11 or pow2q:25");
  const std::string head = text.substr(0, colon);
  const std::string tail = text.substr(colon + 1);
  int num = 0;
  try {
    size_t used = 0;
    num = std::stoi(tail, &used);
    if (used != tail.size()) throw std::invalid_argument("");
  } catch (...) {
    throw std::invalid_argument("bad grid point count in '" + text + "'");
  }
  if (num < 1) throw std::invalid_argument("grid needs at least one point");
  GridSpec spec;
  spec.num_points = num;
  spec.label = text;
  if (head == "pow2")
    spec.step_divisor = 2.0;
  else if (head == "pow2q")
    spec.step_divisor = std::pow(2.0, 0.25);
  else
    throw std::invalid_argument("unknown grid family '" + head + "'");
  return spec;
}

double lambda_max(const LossKind& kind, const RegressorBasis& basis,
                  const ObservedData& data) {
  const Eigen::VectorXd theta0 = initial_coefficients(kind, basis, data);
  const LossEval eval = eval_loss(kind, theta0, basis, data);
  double best = 0.0;
  for (int j = 1; j < eval.gradient.size(); ++j)
    best = std::max(best, std::fabs(eval.gradient[j]));
  return best;
}

std::vector<double> make_grid(double lambda_max_value, const GridSpec& spec) {
  if (!(lambda_max_value > 0.0))
    throw std::invalid_argument("lambda_max must be positive to build a grid");
  std::vector<double> grid(spec.num_points);
  for (int j = 0; j < spec.num_points; ++j)
    grid[j] = lambda_max_value / std::pow(spec.step_divisor, j);
  return grid;
}

std::vector<int> stratified_folds(const Eigen::VectorXd& t, int K, Rng rng) {
  const int n = static_cast<int>(t.size());
  std::vector<int> treated, untreated;
  for (int i = 0; i < n; ++i) (t[i] == 1.0 ? treated : untreated).push_back(i);

  auto shuffle = [&rng](std::vector<int>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
      std::swap(v[i], v[j]);
    }
  };
  shuffle(treated);
  shuffle(untreated);

  // Deal both strata round-robin over one shared position counter, so fold
  // sizes differ by at most one overall and within each stratum.
  std::vector<int> assignment(n, -1);
  int pos = 0;
  for (int i : treated) assignment[i] = pos++ % K;
  for (int i : untreated) assignment[i] = pos++ % K;

  std::vector<int> count1(K, 0), count0(K, 0);
  for (int i = 0; i < n; ++i)
    (t[i] == 1.0 ? count1 : count0)[assignment[i]] += 1;
  for (int k = 0; k < K; ++k)
    if (count1[k] == 0 || count0[k] == 0)
      throw std::runtime_error("fold " + std::to_string(k) +
                               " has a single treatment class");
  return assignment;
}

namespace {

struct Subset {
  RegressorBasis basis;
  ObservedData data;
};

Subset subset_rows(const RegressorBasis& basis, const ObservedData& data,
                   const std::vector<int>& rows) {
  Subset out;
  const int m = static_cast<int>(rows.size());
  out.basis.f.resize(m, basis.f.cols());
  out.basis.names = basis.names;
  out.basis.standardization = basis.standardization;
  out.data.y.resize(m);
  out.data.t.resize(m);
  out.data.y_missing.resize(m);
  out.data.x.resize(m, 0);
  for (int r = 0; r < m; ++r) {
    const int i = rows[r];
    out.basis.f.row(r) = basis.f.row(i);
    out.data.y[r] = data.y[i];
    out.data.t[r] = data.t[i];
    out.data.y_missing[r] = data.y_missing[i];
  }
  return out;
}

}  // namespace

CvResult cross_validate(const LossKind& kind, const RegressorBasis& basis,
                        const ObservedData& data, const GridSpec& grid_spec, int K,
                        std::uint64_t seed, const SolverOptions& opts) {
  if (K < 2) throw std::invalid_argument("cross validation needs K >= 2");
  if (data.n() < 2 * K) throw std::invalid_argument("too few rows for K folds");

  CvResult res;
  res.seed = seed;
  res.grid = make_grid(lambda_max(kind, basis, data), grid_spec);
  res.fold_assignment = stratified_folds(data.t, K, Rng::seeded(seed));
  const int g = static_cast<int>(res.grid.size());
  res.cv_values.assign(g, 0.0);
  res.valid.assign(g, 1);

  for (int k = 0; k < K; ++k) {
    std::vector<int> train_rows, held_rows;
    for (int i = 0; i < data.n(); ++i)
      (res.fold_assignment[i] == k ? held_rows : train_rows).push_back(i);
    const Subset train = subset_rows(basis, data, train_rows);
    const Subset held = subset_rows(basis, data, held_rows);
    const auto fits = fit_path(kind, train.basis, train.data, res.grid, opts);
    for (int j = 0; j < g; ++j) {
      if (!res.valid[j]) continue;
      if (!fits[j].converged) {
        res.valid[j] = 0;
        continue;
      }
      const double held_loss =
          loss_value(kind, fits[j].coefficients, held.basis, held.data);
      if (!std::isfinite(held_loss))
        res.valid[j] = 0;
      else
        res.cv_values[j] += held_loss / K;
    }
  }

  res.selected_index = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < g; ++j) {
    if (!res.valid[j]) {
      res.cv_values[j] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    if (res.cv_values[j] < best) {  // strict: ties keep the larger lambda
      best = res.cv_values[j];
      res.selected_index = j;
    }
  }
  if (res.selected_index < 0)
    throw std::runtime_error("no lambda grid point produced converged fold fits");
  res.selected_lambda = res.grid[res.selected_index];
  return res;
}

SelectedFit select_and_fit(const LossKind& kind, const RegressorBasis& basis,
                           const ObservedData& data, const GridSpec& grid_spec, int K,
                           std::uint64_t seed, const SolverOptions& opts) {
  SelectedFit out;
  out.cv = cross_validate(kind, basis, data, grid_spec, K, seed, opts);
  const std::vector<double> prefix(out.cv.grid.begin(),
                                   out.cv.grid.begin() + out.cv.selected_index + 1);
  auto fits = fit_path(kind, basis, data, prefix, opts);
  out.fit = std::move(fits.back());
  return out;
}

}  // namespace calibdr
