#include "coxmix/data.hpp"
#include "coxmix/errors.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace coxmix;

namespace {

Dataset from_times(std::vector<double> t) {
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
  return Dataset(y, std::vector<int>(t.size(), 1), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t.size()), 1));
}

}  // namespace

TEST(LoadDataset, ParsesMinimalCsv) {
  const Dataset d = parse_dataset("time,status,x1,x2\n1.0,1,0.5,-0.2");
  EXPECT_EQ(d.n(), 1u);
  EXPECT_EQ(d.p(), 2u);
  EXPECT_DOUBLE_EQ(d.x(0)[1], -0.2);
  EXPECT_EQ(d.covariate_names(), (std::vector<std::string>{"x1", "x2"}));
}

TEST(LoadDataset, RejectsBadStatusNamingRow) {
  std::string csv = "time,status,x\n";
  for (int r = 1; r <= 6; ++r) csv += "1.0,1,0.1\n";
  csv += "2.0,2,0.3\n";
  try {
    parse_dataset(csv);
    FAIL() << "expected a DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 7"), std::string::npos) << e.what();
  }
}

TEST(LoadDataset, RejectsNegativeTimeMissingCellAndNoEvents) {
  EXPECT_THROW(parse_dataset("time,status,x\n-1,1,0\n"), DataError);
  EXPECT_THROW(parse_dataset("time,status,x\n1,1,\n"), DataError);
  EXPECT_THROW(parse_dataset("time,status,x\n1,0,0\n2,0,1\n"), DataError);
  EXPECT_THROW(parse_dataset("time,status,x\n1,1,abc\n"), DataError);
  EXPECT_THROW(parse_dataset("t,status,x\n1,1,0\n"), DataError);
}

TEST(LoadDataset, SchemaSelectsColumnsAndHandlesCrlf) {
  CsvSchema s{"T", "E", {"b"}};
  const Dataset d = parse_dataset("a,T,E,b\r\n9,2.5,1,4\r\n\r\n8,1.5,0,3\r\n", s);
  EXPECT_EQ(d.n(), 2u);
  EXPECT_EQ(d.p(), 1u);
  EXPECT_DOUBLE_EQ(d.time(0), 2.5);
  EXPECT_DOUBLE_EQ(d.x(1)[0], 3.0);
  EXPECT_EQ(d.status(1), 0);
}

TEST(LoadDataset, ZeroTimeEventIsAccepted) {
  const Dataset d = parse_dataset("time,status,x\n0,1,1\n2,0,1\n");
  EXPECT_EQ(risk_set(d, 0).size(), 2u);
}

TEST(LoadDataset, ReadsFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "coxmix_test_load.csv";
  std::ofstream(path) << "time,status,x1\n1,1,0\n2,0,1\n";
  const Dataset d = load_dataset(path);
  EXPECT_EQ(d.n(), 2u);
  std::filesystem::remove(path);
  EXPECT_THROW(load_dataset(path), DataError);
}

TEST(RiskSet, SpecExamples) {
  EXPECT_EQ(risk_set(from_times({3, 1, 2}), 2), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(risk_set(from_times({1, 1}), 0), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(risk_set(from_times({5}), 0), (std::vector<std::size_t>{0}));
  EXPECT_THROW(risk_set(from_times({5}), 1), std::out_of_range);
}

TEST(RiskSet, ContainsSelfAndShrinksAlongSortOrder) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Dataset d = testing_support::random_dataset(25, 1, seed, seed % 2 == 0);
    std::size_t prev = d.n() + 1;
    for (std::size_t i : d.sort_index()) {
      const auto r = risk_set(d, i);
      EXPECT_NE(std::find(r.begin(), r.end(), i), r.end());
      EXPECT_LE(r.size(), prev);
      prev = r.size();
    }
  }
}

TEST(SortIndex, IsStablePermutationWithTieBlocks) {
  const Dataset d = testing_support::random_dataset(40, 1, 3, true);
  const auto& o = d.sort_index();
  std::vector<std::size_t> sorted(o);
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
  for (std::size_t q = 1; q < o.size(); ++q) {
    EXPECT_LE(d.time(o[q - 1]), d.time(o[q]));
    if (d.time(o[q - 1]) == d.time(o[q])) EXPECT_LT(o[q - 1], o[q]);
    const std::size_t s = d.tie_start(q);
    EXPECT_EQ(d.time(o[s]), d.time(o[q]));
    if (s > 0) EXPECT_LT(d.time(o[s - 1]), d.time(o[q]));
  }
}

TEST(Standardize, TwoPointColumn) {
  Eigen::MatrixXd x(2, 1);
  x << 1, 3;
  const Dataset d(Eigen::Vector2d(1, 2), {1, 1}, x);
  const auto [z, st] = standardize_covariates(d);
  EXPECT_NEAR(z.x(0)[0], -std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(z.x(1)[0], std::sqrt(0.5), 1e-15);
  EXPECT_DOUBLE_EQ(st.center[0], 2.0);
  EXPECT_DOUBLE_EQ(st.scale[0], std::sqrt(2.0));
}

TEST(Standardize, ConstantColumnFlaggedAndUnchanged) {
  Eigen::MatrixXd x(3, 2);
  x << 2, 1, 2, 5, 2, 7;
  const Dataset d(Eigen::Vector3d(1, 2, 3), {1, 0, 1}, x);
  const auto [z, st] = standardize_covariates(d);
  EXPECT_TRUE(st.constant[0]);
  EXPECT_FALSE(st.constant[1]);
  EXPECT_TRUE(st.any_constant());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(z.x(i)[0], 2.0);
}

TEST(Standardize, MomentsIdempotenceAndInverse) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Dataset d = testing_support::random_dataset(50, 3, seed);
    Eigen::MatrixXd x = d.covariates();
    x.col(1) = x.col(1) * 7.0 + Eigen::VectorXd::Constant(50, 3.0);
    const Dataset raw = d.with_covariates(x);
    const auto [z, st] = standardize_covariates(raw);
    for (Eigen::Index j = 0; j < 3; ++j) {
      const auto col = z.covariates().col(j);
      const double mean = col.mean();
      const double sd = std::sqrt((col.array() - mean).square().sum() / 49.0);
      EXPECT_NEAR(mean, 0.0, 1e-12);
      EXPECT_NEAR(sd, 1.0, 1e-12);
    }
    EXPECT_LT((st.invert(z.covariates()) - x).cwiseAbs().maxCoeff(), 1e-12);
    const auto [z2, st2] = standardize_covariates(z);
    EXPECT_LT((z2.covariates() - z.covariates()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Standardize, CoefficientBackTransformPreservesLinearPredictor) {
  const Dataset d = testing_support::random_dataset(30, 2, 9);
  Eigen::MatrixXd x = d.covariates() * 3.0;
  x.array() += 1.5;
  const auto [z, st] = standardize_covariates(d.with_covariates(x));
  const Eigen::Vector2d b_std(0.4, -1.2);
  const Eigen::VectorXd b = st.beta_to_original(b_std);
  const Eigen::VectorXd lhs = z.covariates() * b_std;
  const Eigen::VectorXd rhs = (x * b).array() - b.dot(st.center);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Standardize, NeedsTwoRecords) {
  const Dataset d(Eigen::VectorXd::Ones(1), {1}, Eigen::MatrixXd::Ones(1, 1));
  EXPECT_THROW(standardize_covariates(d), std::invalid_argument);
}
