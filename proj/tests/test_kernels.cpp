#include "coxmix/kernels.hpp"
#include "coxmix/rng.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <limits>

using namespace coxmix;

namespace {

struct Inputs {
  std::vector<double> t, marker;
  std::vector<int> status;
  Eigen::MatrixXd lp, hz, cum, log_f;
  Eigen::VectorXd log_pi;
};

Inputs make_inputs(std::size_t n, Eigen::Index K, std::uint64_t seed) {
  Rng rng(seed);
  Inputs in;
  for (std::size_t i = 0; i < n; ++i) {
    in.t.push_back(std::round(rng.exponential() * 20.0) / 20.0);
    in.marker.push_back(rng.normal());
    in.status.push_back(rng.uniform() < 0.7 ? 1 : 0);
  }
  const auto N = static_cast<Eigen::Index>(n);
  in.lp.resize(N, K);
  in.hz.resize(N, K);
  in.cum.resize(N, K);
  in.log_f.resize(N, K);
  for (Eigen::Index i = 0; i < in.lp.size(); ++i) {
    in.lp.data()[i] = rng.normal();
    in.hz.data()[i] = rng.uniform() < 0.05 ? 0.0 : rng.exponential();
    in.cum.data()[i] = rng.exponential();
    in.log_f.data()[i] = -30.0 * rng.uniform();
  }
  in.log_f.row(3).setConstant(-std::numeric_limits<double>::infinity());
  in.log_pi = Eigen::VectorXd::Constant(K, -std::log(static_cast<double>(K)));
  return in;
}

bool bit_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i], y = b.data()[i];
    if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
  }
  return true;
}

class KernelEquivalence : public ::testing::TestWithParam<int> {};

}  // namespace

TEST_P(KernelEquivalence, ParallelMatchesSerialBitForBit) {
  omp_set_num_threads(GetParam());
  const Inputs in = make_inputs(257, 7, 11);
  Eigen::MatrixXd a, b;
  kernels::serial::kernel_matrix(in.t, in.marker, 0.3, KernelKind::Gaussian, a);
  kernels::parallel::kernel_matrix(in.t, in.marker, 0.3, KernelKind::Gaussian, b);
  EXPECT_TRUE(bit_equal(a, b));
  kernels::serial::component_log_densities(in.status, in.lp, in.hz, in.cum, a);
  kernels::parallel::component_log_densities(in.status, in.lp, in.hz, in.cum, b);
  EXPECT_TRUE(bit_equal(a, b));
  Eigen::VectorXd ma, mb;
  const auto na = kernels::serial::responsibilities(in.log_f, in.log_pi, a, ma);
  const auto nb = kernels::parallel::responsibilities(in.log_f, in.log_pi, b, mb);
  EXPECT_EQ(na, nb);
  EXPECT_EQ(na, 1u);
  EXPECT_TRUE(bit_equal(a, b));
  EXPECT_TRUE(bit_equal(ma, mb));
  const SurvivalSweep sweep = SurvivalSweep::build(in.t, in.status);
  Eigen::MatrixXd q(257, 2);
  for (Eigen::Index i = 0; i < 257; ++i) {
    q(i, 0) = 1.0;
    q(i, 1) = in.t[static_cast<std::size_t>(i)];
  }
  kernels::serial::conditional_survival(sweep, in.status, in.marker, 0.25, KernelKind::Epanechnikov, q, a);
  kernels::parallel::conditional_survival(sweep, in.status, in.marker, 0.25, KernelKind::Epanechnikov, q, b);
  EXPECT_TRUE(bit_equal(a, b));
  omp_set_num_threads(1);
}

INSTANTIATE_TEST_SUITE_P(Threads, KernelEquivalence, ::testing::Values(1, 2, 4, 7));

TEST(Responsibilities, RowsOnSimplexAndLogMarginal) {
  const Inputs in = make_inputs(100, 4, 12);
  Eigen::MatrixXd s;
  Eigen::VectorXd m;
  kernels::serial::responsibilities(in.log_f, in.log_pi, s, m);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    EXPECT_NEAR(s.row(i).sum(), 1.0, 1e-12);
    EXPECT_GE(s.row(i).minCoeff(), 0.0);
    if (i == 3) continue;
    double direct = 0.0;
    for (Eigen::Index k = 0; k < 4; ++k) direct += std::exp(in.log_pi[k] + in.log_f(i, k));
    EXPECT_NEAR(m[i], std::log(direct), 1e-12);
  }
  EXPECT_EQ(s(3, 0), 0.25);
}

TEST(ComponentLogDensities, FloorAndFormula) {
  Eigen::MatrixXd lp(2, 1), hz(2, 1), cum(2, 1), out;
  lp << 0.5, 0.5;
  hz << 0.0, 2.0;
  cum << 1.0, 1.0;
  kernels::serial::component_log_densities(std::vector<int>{1, 1}, lp, hz, cum, out);
  EXPECT_DOUBLE_EQ(out(0, 0), kernels::kLogHazardFloor + 0.5 - std::exp(0.5));
  EXPECT_DOUBLE_EQ(out(1, 0), std::log(2.0) + 0.5 - std::exp(0.5));
}

TEST(ConditionalSurvival, InfiniteBandwidthIsKaplanMeier) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Inputs in = make_inputs(60, 1, 40 + seed);
    const SurvivalSweep sweep = SurvivalSweep::build(in.t, in.status);
    Eigen::MatrixXd q(60, 3), out;
    for (Eigen::Index i = 0; i < 60; ++i) {
      q(i, 0) = 0.0;
      q(i, 1) = 0.5 + 0.03 * static_cast<double>(i);
      q(i, 2) = 10.0;
    }
    kernels::parallel::conditional_survival(sweep, in.status, in.marker, std::numeric_limits<double>::infinity(),
                                            KernelKind::Gaussian, q, out);
    for (Eigen::Index i = 0; i < 60; ++i)
      for (Eigen::Index c = 0; c < 3; ++c)
        EXPECT_NEAR(out(i, c), oracle::kaplan_meier(in.t, in.status, q(i, c)), 1e-12);
  }
}
