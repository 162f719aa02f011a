#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <string>

#include "calibdr/dataset.hpp"
#include "calibdr/losses.hpp"
#include "test_support.hpp"

using namespace calibdr;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("test_tmp_") + name;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("csv loading with missing outcomes and prefix globs") {
  const std::string path = temp_path("basic.csv");
  write_file(path,
             "y,t,age,sex,lab1,lab2\r\n"
             "1.5,1,30,0,2.5,0.5\n"
             ",0,40,1,1.25,-1\n"
             "NA,0,50,0,0,3\n"
             "2.25,1,60,1,-0.5,0\n");

  ObservedData data = load_csv(path, "y", "t", {"age", "lab*"});
  CHECK(data.n() == 4);
  CHECK(data.d_raw() == 3);
  CHECK(data.x_names == std::vector<std::string>{"age", "lab1", "lab2"});
  CHECK(data.y[0] == 1.5);
  CHECK(data.y_missing[1] == 1);
  CHECK(data.y_missing[2] == 1);
  CHECK(data.y_missing[3] == 0);
  CHECK(data.t[1] == 0.0);
  CHECK(data.x(1, 1) == 1.25);

  // selection comes back in header order, deduplicated across selectors
  ObservedData all = load_csv(path, "y", "t", {"lab1", "lab*", "age"});
  CHECK(all.x_names == std::vector<std::string>{"age", "lab1", "lab2"});
  std::remove(path.c_str());
}

TEST_CASE("csv loading rejects malformed input") {
  const std::string path = temp_path("bad.csv");
  write_file(path, "y,t,x1\n1.0,1,2.0\n2.0,2,3.0\n");
  CHECK_THROWS(load_csv(path, "y", "t", {"x1"}));  // t must be 0/1
  write_file(path, "y,t,x1\n1.0,1,abc\n2.0,0,3.0\n");
  CHECK_THROWS(load_csv(path, "y", "t", {"x1"}));  // non-numeric covariate
  write_file(path, "y,t,x1\n1.0,1,2.0\n2.0,0\n");
  CHECK_THROWS(load_csv(path, "y", "t", {"x1"}));  // ragged row
  write_file(path, "y,t,x1\n1.0,1,2.0\n2.0,0,3.0\n");
  CHECK_THROWS(load_csv(path, "y", "t", {"nope"}));  // unknown column
  CHECK_THROWS(load_csv(path, "y", "t", {"zz*"}));   // glob with no match
  // missingness is legal anywhere at load time; losses check availability
  write_file(path, "y,t,x1\n,1,2.0\n2.0,0,3.0\n");
  ObservedData ok = load_csv(path, "y", "t", {"x1"});
  CHECK(ok.y_missing[0] == 1);
  std::remove(path.c_str());
}

TEST_CASE("validate_data requires both arms and clean indicators") {
  ObservedData data;
  data.y.resize(3);
  data.y << 1, 2, 3;
  data.y_missing.assign(3, 0);
  data.t.resize(3);
  data.t << 1, 1, 1;
  data.x.resize(3, 1);
  data.x << 0.5, -0.5, 0.25;
  CHECK_THROWS(validate_data(data));  // no untreated rows
  data.t << 1, 0.5, 0;
  CHECK_THROWS(validate_data(data));  // fractional indicator
  data.t << 1, 0, 0;
  CHECK_NOTHROW(validate_data(data));
}

TEST_CASE("basis construction, interactions, and the sparsity filter") {
  ObservedData data;
  const int n = 10;
  data.y = Eigen::VectorXd::LinSpaced(n, 0.0, 1.0);
  data.y_missing.assign(n, 0);
  data.t.resize(n);
  data.t << 1, 0, 1, 0, 1, 0, 1, 0, 1, 0;
  data.x.resize(n, 3);
  data.x.setZero();
  for (int i = 0; i < n; ++i) {
    data.x(i, 0) = i + 1.0;
    data.x(i, 1) = (i % 2 == 0) ? 1.0 : 0.0;
  }
  data.x(0, 2) = 1.0;  // interacts with x1/x2 in one row only
  data.x_names = {"a", "b", "c"};

  RegressorBasis plain = build_basis(data, false);
  CHECK(plain.p() == 3);
  CHECK(plain.names[0] == "(intercept)");
  CHECK(plain.names[1] == "a");
  CHECK((plain.f.col(0).array() == 1.0).all());

  BasisSpec spec;
  spec.interactions = true;
  spec.min_nonzero_fraction = 0.2;  // keep products nonzero on >= 2 of 10 rows
  RegressorBasis crossed = build_basis(data, false, spec);
  // candidate products: a*b (5 nonzero rows, kept), a*c (1 row, dropped),
  // b*c (1 row, dropped)
  CHECK(crossed.p() == 4);
  CHECK(crossed.names[4] == "a:b");

  spec.min_nonzero_fraction = 0.05;  // threshold ceil(0.5) = 1 keeps everything
  RegressorBasis loose = build_basis(data, false, spec);
  CHECK(loose.p() == 6);
}

TEST_CASE("standardization produces unit-variance columns and exact round trips") {
  testsupport::SynthData synth = testsupport::make_synth(80, 5, 21);
  RegressorBasis raw = build_basis(synth.data, false);
  RegressorBasis standardized = build_basis(synth.data, true);
  REQUIRE(standardized.standardization.has_value());
  for (int j = 1; j <= standardized.p(); ++j) {
    const auto col = standardized.f.col(j).array();
    CHECK(col.mean() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK((col - col.mean()).square().mean() == doctest::Approx(1.0).epsilon(1e-10));
  }

  Eigen::VectorXd coef(standardized.p() + 1);
  Rng rng = Rng::seeded(3);
  for (int j = 0; j < coef.size(); ++j) coef[j] = rng.normal();
  Eigen::VectorXd raw_coef = destandardize_coefficients(coef, *standardized.standardization);
  Eigen::VectorXd eta_std = linear_predictor(standardized, coef);
  Eigen::VectorXd eta_raw = linear_predictor(raw, raw_coef);
  CHECK((eta_std - eta_raw).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("standardization rejects constant columns") {
  ObservedData data;
  data.y.resize(4);
  data.y << 1, 2, 3, 4;
  data.y_missing.assign(4, 0);
  data.t.resize(4);
  data.t << 1, 0, 1, 0;
  data.x.resize(4, 2);
  data.x << 1, 5, 2, 5, 3, 5, 4, 5;  // second column constant
  CHECK_THROWS(build_basis(data, true));
  CHECK_NOTHROW(build_basis(data, false));
}
