#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace calibdr {

// One observational sample: treatment indicator, outcome with per-row
// missingness, raw covariates. Immutable after construction.
struct ObservedData {
  Eigen::VectorXd y;                     // outcome; rows flagged missing are never read
  std::vector<std::uint8_t> y_missing;   // 1 = missing
  Eigen::VectorXd t;                     // entries exactly 0 or 1, both arms present
  Eigen::MatrixXd x;                     // n x d_raw
  std::vector<std::string> x_names;      // column names; synthetic data uses x1..xd

  int n() const { return static_cast<int>(t.size()); }
  int d_raw() const { return static_cast<int>(x.cols()); }
};

// Validates the ObservedData invariants; throws std::invalid_argument.
void validate_data(const ObservedData& data);

struct StandardizationRecord {
  Eigen::VectorXd means;   // length p
  Eigen::VectorXd scales;  // length p, strictly positive
};

// Design f(X): column 0 identically one, then p regressors.
struct RegressorBasis {
  Eigen::MatrixXd f;                // n x (1+p)
  std::vector<std::string> names;   // length 1+p, names[0] = "(intercept)"
  std::optional<StandardizationRecord> standardization;

  int n() const { return static_cast<int>(f.rows()); }
  int p() const { return static_cast<int>(f.cols()) - 1; }
};

struct BasisSpec {
  bool interactions = false;            // append pairwise products of raw columns
  double min_nonzero_fraction = 0.008;  // drop interactions with fewer nonzero rows than this fraction of n
};

// Loads a comma-separated file with one header row. Missing outcomes are
// encoded as an empty field or "NA". x_cols entries are exact header names,
// or prefix globs ending in '*'; matches keep header order without duplicates.
ObservedData load_csv(const std::string& path, const std::string& y_col,
                      const std::string& t_col, const std::vector<std::string>& x_cols);

RegressorBasis build_basis(const ObservedData& data, bool standardize,
                           const BasisSpec& spec = {});

// Maps coefficients fitted on a standardized basis back to the raw scale:
// slopes divided by scales, intercept absorbing the mean shifts, so the
// linear predictor is unchanged on every row.
Eigen::VectorXd destandardize_coefficients(const Eigen::VectorXd& coef,
                                           const StandardizationRecord& record);

}  // namespace calibdr
