#include "calibdr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace calibdr {

void validate_data(const ObservedData& data) {
  const int n = data.n();
  if (n == 0) throw std::invalid_argument("data has no rows");
  if (data.y.size() != n || static_cast<int>(data.y_missing.size()) != n ||
      data.x.rows() != n)
    throw std::invalid_argument("data field lengths disagree");
  int treated = 0, untreated = 0;
  for (int i = 0; i < n; ++i) {
    const double ti = data.t[i];
    if (ti == 1.0)
      ++treated;
    else if (ti == 0.0)
      ++untreated;
    else
      throw std::invalid_argument("treatment value outside {0,1} at row " +
                                  std::to_string(i + 1));
  }
  if (treated == 0 || untreated == 0)
    throw std::invalid_argument("both treatment arms must be present");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim spaces and a trailing CR from Windows line endings
    size_t b = cell.find_first_not_of(" \t\r");
    size_t e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, int row, const std::string& col) {
  const char* s = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    throw std::invalid_argument("malformed numeric cell at row " + std::to_string(row) +
                                ", column " + col + ": '" + cell + "'");
  return v;
}

bool is_missing_cell(const std::string& cell) { return cell.empty() || cell == "NA"; }

std::vector<int> resolve_x_columns(const std::vector<std::string>& header,
                                   const std::vector<std::string>& patterns,
                                   int y_idx, int t_idx) {
  std::vector<char> picked(header.size(), 0);
  for (const auto& pat : patterns) {
    bool matched = false;
    if (!pat.empty() && pat.back() == '*') {
      const std::string prefix = pat.substr(0, pat.size() - 1);
      for (size_t j = 0; j < header.size(); ++j) {
        if (static_cast<int>(j) == y_idx || static_cast<int>(j) == t_idx) continue;
        if (header[j].rfind(prefix, 0) == 0) {
          picked[j] = 1;
          matched = true;
        }
      }
    } else {
      for (size_t j = 0; j < header.size(); ++j) {
        if (header[j] == pat) {
          picked[j] = 1;
          matched = true;
        }
      }
    }
    if (!matched)
      throw std::invalid_argument("no covariate column matches '" + pat + "'");
  }
  std::vector<int> idx;
  for (size_t j = 0; j < header.size(); ++j)
    if (picked[j]) idx.push_back(static_cast<int>(j));
  return idx;
}

}  // namespace

ObservedData load_csv(const std::string& path, const std::string& y_col,
                      const std::string& t_col, const std::vector<std::string>& x_cols) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty file: " + path);
  const auto header = split_line(line);

  auto find_col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw std::invalid_argument("column '" + name + "' not found in header");
    return static_cast<int>(it - header.begin());
  };
  const int y_idx = find_col(y_col);
  const int t_idx = find_col(t_col);
  const auto x_idx = resolve_x_columns(header, x_cols, y_idx, t_idx);
  if (x_idx.empty()) throw std::invalid_argument("zero covariate columns selected");

  std::vector<double> ys, ts;
  std::vector<std::uint8_t> ymiss;
  std::vector<double> xs;  // row-major scratch
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto cells = split_line(line);
    if (cells.size() != header.size())
      throw std::invalid_argument("row " + std::to_string(row) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(header.size()));
    if (is_missing_cell(cells[y_idx])) {
      ys.push_back(0.0);
      ymiss.push_back(1);
    } else {
      ys.push_back(parse_number(cells[y_idx], row, y_col));
      ymiss.push_back(0);
    }
    const double tv = parse_number(cells[t_idx], row, t_col);
    if (tv != 0.0 && tv != 1.0)
      throw std::invalid_argument("treatment value outside {0,1} at row " +
                                  std::to_string(row));
    ts.push_back(tv);
    for (int j : x_idx) xs.push_back(parse_number(cells[j], row, header[j]));
  }
  if (row == 0) throw std::invalid_argument("no data rows in " + path);

  ObservedData data;
  const int n = row, d = static_cast<int>(x_idx.size());
  data.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  data.y_missing = std::move(ymiss);
  data.t = Eigen::Map<Eigen::VectorXd>(ts.data(), n);
  data.x.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) data.x(i, j) = xs[static_cast<size_t>(i) * d + j];
  for (int j : x_idx) data.x_names.push_back(header[j]);
  validate_data(data);
  return data;
}

RegressorBasis build_basis(const ObservedData& data, bool standardize,
                           const BasisSpec& spec) {
  const int n = data.n();
  const int d = data.d_raw();
  auto col_name = [&](int j) {
    return j < static_cast<int>(data.x_names.size()) ? data.x_names[j]
                                                     : "x" + std::to_string(j + 1);
  };

  std::vector<Eigen::VectorXd> cols;
  std::vector<std::string> names;
  for (int j = 0; j < d; ++j) {
    cols.push_back(data.x.col(j));
    names.push_back(col_name(j));
  }
  if (spec.interactions) {
    const int min_count =
        static_cast<int>(std::ceil(spec.min_nonzero_fraction * n));
    for (int j = 0; j < d; ++j)
      for (int k = j + 1; k < d; ++k) {
        Eigen::VectorXd prod = data.x.col(j).cwiseProduct(data.x.col(k));
        const int nonzero = static_cast<int>((prod.array() != 0.0).count());
        if (nonzero < min_count) continue;
        cols.push_back(std::move(prod));
        names.push_back(col_name(j) + ":" + col_name(k));
      }
  }

  const int p = static_cast<int>(cols.size());
  RegressorBasis basis;
  basis.f.resize(n, 1 + p);
  basis.f.col(0).setOnes();
  basis.names.reserve(1 + p);
  basis.names.push_back("(intercept)");
  for (int j = 0; j < p; ++j) {
    basis.f.col(1 + j) = cols[j];
    basis.names.push_back(names[j]);
  }

  if (standardize) {
    StandardizationRecord rec;
    rec.means.resize(p);
    rec.scales.resize(p);
    for (int j = 0; j < p; ++j) {
      auto col = basis.f.col(1 + j);
      const double mean = col.mean();
      const double var = (col.array() - mean).square().sum() / n;
      if (var <= 0.0)
        throw std::invalid_argument("constant covariate column '" + basis.names[1 + j] +
                                    "' cannot be standardized (zero scale)");
      const double scale = std::sqrt(var);
      col = (col.array() - mean) / scale;
      rec.means[j] = mean;
      rec.scales[j] = scale;
    }
    basis.standardization = std::move(rec);
  }
  return basis;
}

Eigen::VectorXd destandardize_coefficients(const Eigen::VectorXd& coef,
                                           const StandardizationRecord& record) {
  const int p = static_cast<int>(record.means.size());
  if (coef.size() != 1 + p || record.scales.size() != p)
    throw std::invalid_argument("coefficient/record length mismatch");
  Eigen::VectorXd out(1 + p);
  out[0] = coef[0];
  for (int j = 0; j < p; ++j) {
    out[1 + j] = coef[1 + j] / record.scales[j];
    out[0] -= coef[1 + j] * record.means[j] / record.scales[j];
  }
  return out;
}

}  // namespace calibdr
