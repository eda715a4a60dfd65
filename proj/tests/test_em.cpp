#include "coxmix/em.hpp"
#include "coxmix/errors.hpp"
#include "coxmix/rng.hpp"
#include "coxmix/serialize.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace coxmix;

namespace {

ResponsibilityMatrix random_responsibilities(Eigen::Index n, Eigen::Index K, std::uint64_t seed) {
  Rng rng(seed);
  ResponsibilityMatrix s(n, K);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < K; ++k) s(i, k) = rng.uniform_pos() * (k + 1);
    s.row(i) /= s.row(i).sum();
  }
  return s;
}

Eigen::VectorXd random_simplex(Eigen::Index K, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd v(K);
  for (Eigen::Index k = 0; k < K; ++k) v[k] = rng.exponential();
  return v / v.sum();
}

EMConfig quick_config() {
  EMConfig cfg;
  cfg.k_init = 4;
  cfg.restarts = 2;
  cfg.max_iterations = 60;
  return cfg;
}

}  // namespace

TEST(MixingUpdate, ExactMatchesSimplexOracle) {
  const std::size_t n = 200;
  const PenaltySpec specs[] = {PenaltySpec::scad(0.05), PenaltySpec::mcp(0.08), PenaltySpec::ls(0.02),
                               PenaltySpec::scad(0.2), PenaltySpec::mcp(0.0)};
  std::uint64_t seed = 1;
  for (const auto& spec : specs) {
    for (Eigen::Index K : {1, 2, 3, 6}) {
      const ResponsibilityMatrix s = random_responsibilities(static_cast<Eigen::Index>(n), K, ++seed);
      const Eigen::VectorXd prev = random_simplex(K, ++seed);
      const Eigen::VectorXd pi = update_mixing_proportions(s, prev, spec, n);
      Eigen::VectorXd a(K);
      for (Eigen::Index k = 0; k < K; ++k)
        a[k] = spec.level == 0.0 ? 0.0 : static_cast<double>(n) * spec.level * lla_coefficient(spec, prev[k]);
      const Eigen::VectorXd expected = oracle::simplex_concave_max(s.colwise().sum().transpose(), a);
      EXPECT_NEAR(pi.sum(), 1.0, 1e-12);
      for (Eigen::Index k = 0; k < K; ++k) EXPECT_NEAR(pi[k], expected[k], 1e-9) << to_string(spec.kind) << " K=" << K;
    }
  }
}

TEST(MixingUpdate, UnpenalizedIsColumnMean) {
  const ResponsibilityMatrix s = random_responsibilities(50, 4, 3);
  const Eigen::VectorXd prev = random_simplex(4, 4);
  const Eigen::VectorXd mean = s.colwise().mean().transpose();
  EXPECT_LT((update_mixing_proportions(s, prev, PenaltySpec::scad(0.0), 50) - mean).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((update_mixing_proportions_closed_form(s, prev, PenaltySpec::scad(0.0), 50) - mean).cwiseAbs().maxCoeff(),
            1e-14);
}

TEST(MixingUpdate, SurrogateNeverDecreases) {
  const std::size_t n = 300;
  for (std::uint64_t seed = 10; seed < 40; ++seed) {
    const Eigen::Index K = 2 + static_cast<Eigen::Index>(seed % 5);
    const ResponsibilityMatrix s = random_responsibilities(static_cast<Eigen::Index>(n), K, seed);
    const Eigen::VectorXd prev = random_simplex(K, seed + 100);
    const PenaltySpec spec = seed % 2 ? PenaltySpec::scad(0.1) : PenaltySpec::mcp(0.1);
    const Eigen::VectorXd col = s.colwise().sum().transpose();
    const Eigen::VectorXd pi = update_mixing_proportions(s, prev, spec, n);
    const double at_new = lla_surrogate(col, pi, prev, spec, n);
    EXPECT_GE(at_new, lla_surrogate(col, prev, prev, spec, n) - 1e-9);
    for (int j = 0; j < 5; ++j) EXPECT_GE(at_new, lla_surrogate(col, random_simplex(K, seed * 7 + j), prev, spec, n));
  }
}

TEST(MixingUpdate, ClosedFormRejectsAggressiveLevel) {
  const ResponsibilityMatrix s = random_responsibilities(100, 3, 5);
  Eigen::VectorXd prev(3);
  prev << 0.001, 0.499, 0.5;
  EXPECT_THROW(update_mixing_proportions_closed_form(s, prev, PenaltySpec::ls(5.0), 100), NumericalError);
  const Eigen::VectorXd pi = update_mixing_proportions(s, prev, PenaltySpec::ls(5.0), 100);
  EXPECT_NEAR(pi.sum(), 1.0, 1e-12);
  EXPECT_GT(pi.minCoeff(), 0.0);
}

TEST(Prune, DropsSmallComponentsAndRenormalizes) {
  MixtureParams params;
  params.pi = Eigen::Vector3d(0.6, 4e-6, 0.4 - 4e-6);
  for (int k = 0; k < 3; ++k) params.components.push_back(ComponentFit{Eigen::VectorXd::Constant(1, k), {}, true, 1});
  ResponsibilityMatrix s = random_responsibilities(10, 3, 6);
  auto [out, kept] = prune_components(params, s, 1e-5);
  ASSERT_EQ(out.K(), 2u);
  EXPECT_NEAR(out.pi.sum(), 1.0, 1e-15);
  EXPECT_EQ(out.components[1].beta[0], 2.0);
  for (Eigen::Index i = 0; i < kept.rows(); ++i) EXPECT_NEAR(kept.row(i).sum(), 1.0, 1e-14);
  params.pi = Eigen::Vector3d(1e-6, 1e-6, 1e-6);
  EXPECT_THROW(prune_components(params, s, 1e-5), NumericalError);
}

TEST(Convergence, NeedsBothCriteria) {
  EMConfig cfg;
  EXPECT_TRUE(check_convergence(-1000.0000005, -1000.000001, cfg));
  EXPECT_FALSE(check_convergence(-1000.0, -1000.01, cfg));
  cfg.eps_rel = 1e-12;
  EXPECT_FALSE(check_convergence(-1000.0000005, -1000.000001, cfg));
  EXPECT_TRUE(check_convergence(0.0, 0.0, EMConfig{}));
}

TEST(InitialAssignment, HardAndReproducible) {
  const Dataset d = testing_support::random_dataset(120, 2, 7);
  const ResponsibilityMatrix a = initial_assignment(d, 5, 99);
  EXPECT_EQ(a, initial_assignment(d, 5, 99));
  EXPECT_NE(a, initial_assignment(d, 5, 100));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    EXPECT_EQ(a.row(i).sum(), 1.0);
    EXPECT_EQ((a.row(i).array() == 1.0).count(), 1);
  }
}

TEST(Likelihood, InvariantUnderRelabeling) {
  const auto sim = testing_support::simulated(200, 0.2, 8);
  EMConfig cfg = quick_config();
  cfg.restarts = 1;
  const FittedModel fit = fit_mixture(sim.data, PenaltySpec::scad(0.0), cfg);
  ASSERT_GE(fit.params.K(), 2u);
  MixtureParams swapped = fit.params;
  std::reverse(swapped.components.begin(), swapped.components.end());
  swapped.pi.reverseInPlace();
  EXPECT_NEAR(observed_loglik(sim.data, swapped), observed_loglik(sim.data, fit.params), 1e-9);
  const ResponsibilityMatrix a = e_step(sim.data, fit.params), b = e_step(sim.data, swapped);
  EXPECT_LT((a.rowwise().reverse() - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Likelihood, CompleteDataBelowObservedAtPosterior) {
  // log f(y) = E_s[log pi f] + entropy(s) at the posterior, so Q <= l.
  const auto sim = testing_support::simulated(150, 0.1, 9);
  EMConfig cfg = quick_config();
  cfg.restarts = 1;
  const FittedModel fit = fit_mixture(sim.data, PenaltySpec::scad(0.0), cfg);
  const ResponsibilityMatrix s = e_step(sim.data, fit.params);
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s.data()[i] > 0.0) entropy -= s.data()[i] * std::log(s.data()[i]);
  EXPECT_NEAR(complete_data_loglik(sim.data, s, fit.params) + entropy, observed_loglik(sim.data, fit.params), 1e-6);
}

TEST(FitMixture, ObserverSeesSimplexInvariants) {
  const auto sim = testing_support::simulated(200, 0.1, 10);
  const PenaltySpec spec = PenaltySpec::scad(0.1);
  int calls = 0;
  const FittedModel fit = fit_mixture(sim.data, spec, quick_config(), [&](const IterationTrace& tr) {
    ++calls;
    const auto& s = *tr.responsibilities;
    const auto& pi = *tr.pi;
    ASSERT_EQ(s.cols(), pi.size());
    EXPECT_NEAR(pi.sum(), 1.0, 1e-12);
    EXPECT_GE(pi.minCoeff(), spec.prune_threshold);
    for (Eigen::Index i = 0; i < s.rows(); ++i) EXPECT_NEAR(s.row(i).sum(), 1.0, 1e-12);
    EXPECT_GE(s.minCoeff(), 0.0);
  });
  EXPECT_GT(calls, 0);
  EXPECT_EQ(fit.selected_K, fit.params.K());
  EXPECT_NEAR(fit.params.pi.sum(), 1.0, 1e-12);
  for (Eigen::Index k = 1; k < fit.params.pi.size(); ++k) EXPECT_GE(fit.params.pi[k - 1], fit.params.pi[k]);
}

TEST(FitMixture, ReproducibleAcrossWorkerCounts) {
  const auto sim = testing_support::simulated(150, 0.1, 11);
  EMConfig cfg = quick_config();
  cfg.restarts = 4;
  const std::string one = model_to_json(fit_mixture(sim.data, PenaltySpec::mcp(0.1), cfg));
  EXPECT_EQ(one, model_to_json(fit_mixture(sim.data, PenaltySpec::mcp(0.1), cfg)));
  cfg.workers = 4;
  EXPECT_EQ(one, model_to_json(fit_mixture(sim.data, PenaltySpec::mcp(0.1), cfg)));
  cfg.seed += 1;
  EXPECT_NE(one, model_to_json(fit_mixture(sim.data, PenaltySpec::mcp(0.1), cfg)));
}

TEST(FitMixture, SingleComponentIsCox) {
  const Dataset d = testing_support::random_dataset(150, 3, 12, true);
  EMConfig cfg;
  cfg.k_init = 1;
  cfg.restarts = 1;
  const FittedModel fit = fit_mixture(d, PenaltySpec::scad(0.0), cfg);
  ASSERT_EQ(fit.params.K(), 1u);
  const std::vector<double> w(d.n(), 1.0);
  const NewtonResult cox = maximize_weighted_partial(d, w, Eigen::VectorXd::Zero(3));
  EXPECT_LT((fit.params.components[0].beta - cox.beta).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_TRUE(fit.converged);
  EXPECT_LE(fit.iterations, 3);
}

TEST(FitMixture, StandardizationDoesNotChangeTheFit) {
  const Dataset d = testing_support::random_dataset(120, 2, 13);
  Eigen::MatrixXd x = d.covariates();
  x.col(0) = x.col(0) * 40.0 + Eigen::VectorXd::Constant(120, 7.0);
  const Dataset scaled = d.with_covariates(x);
  EMConfig cfg;
  cfg.k_init = 1;
  cfg.restarts = 1;
  const FittedModel a = fit_mixture(d, PenaltySpec::scad(0.0), cfg);
  const FittedModel b = fit_mixture(scaled, PenaltySpec::scad(0.0), cfg);
  EXPECT_NEAR(a.params.components[0].beta[0], b.params.components[0].beta[0] * 40.0, 1e-6);
  EXPECT_NEAR(a.params.components[0].beta[1], b.params.components[0].beta[1], 1e-6);
  EXPECT_NEAR(observed_loglik(d, a.params), observed_loglik(scaled, b.params), 1e-6);
}

TEST(FitMixture, PenaltyShrinksComponentCount) {
  const auto sim = testing_support::simulated(300, 0.05, 14);
  EMConfig cfg = quick_config();
  cfg.k_init = 6;
  cfg.max_iterations = 200;
  const FittedModel loose = fit_mixture(sim.data, PenaltySpec::scad(0.0), cfg);
  const FittedModel tight = fit_mixture(sim.data, PenaltySpec::scad(0.25), cfg);
  EXPECT_LT(tight.params.K(), loose.params.K());
  EXPECT_GE(tight.params.K(), 1u);
}

TEST(FitMixture, RejectsBadConfig) {
  const Dataset d = testing_support::random_dataset(20, 1, 15);
  EMConfig cfg;
  cfg.k_init = 0;
  EXPECT_THROW(fit_mixture(d, PenaltySpec::scad(0.1), cfg), std::invalid_argument);
  cfg = EMConfig{};
  cfg.k_init = 21;
  EXPECT_THROW(fit_mixture(d, PenaltySpec::scad(0.1), cfg), std::invalid_argument);
  EXPECT_THROW(fit_mixture(d, PenaltySpec::scad(-1.0), EMConfig{}), std::invalid_argument);
}
