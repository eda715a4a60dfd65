#pragma once

#include "coxmix/data.hpp"
#include "coxmix/em.hpp"
#include "coxmix/penalty.hpp"
#include "coxmix/rng.hpp"

#include <optional>
#include <string>
#include <vector>

namespace coxmix {

struct SimConfig {
  std::size_t n = 600;
  std::vector<double> pi_true{1.0 / 3.0, 2.0 / 3.0};
  std::vector<Eigen::VectorXd> beta_true{Eigen::Vector2d(-3.0, -2.0), Eigen::Vector2d(1.0, 1.0)};
  double ar1_rho = 0.5;
  double censor_target = 0.05;  // 0 disables censoring
  std::uint64_t seed = 1;
  std::size_t pilot_size = 100000;

  std::size_t K() const { return pi_true.size(); }
  std::size_t p() const { return beta_true.empty() ? 0 : static_cast<std::size_t>(beta_true.front().size()); }
  void validate() const;
};

// Rows ~ N(0, Sigma) with Sigma_st = rho^|s-t|.
Eigen::MatrixXd ar1_covariates(std::size_t n, std::size_t p, double rho, Rng& rng);

// Inverse of Lambda_0(t) = 2(e^{4t} - 1) at e * exp(-lp).
double transformation_event_time(double e, double lp);

// Transformation function H(t) = log(2(e^{4t} - 1)).
double transformation_h(double t);

// Censoring fraction of C_i ~ U[0, bound] against the given event times:
// mean over i of min(T_i, bound) / bound.
double expected_censoring(std::span<const double> event_times, double bound);

// Bound of the uniform censoring distribution hitting config.censor_target on
// a pilot sample of config.pilot_size event times.
double calibrate_censoring(const SimConfig& config, Rng& rng);

struct SimulatedData {
  Dataset data;
  std::vector<int> labels;  // 0-based true component
  std::vector<double> event_times;
  double censor_bound = 0.0;  // +inf when uncensored
};

// Calibrates the censoring bound first unless one is given.
SimulatedData generate_dataset(const SimConfig& config, Rng& rng, std::optional<double> censor_bound = std::nullopt);

struct StudyConfig {
  SimConfig sim;
  std::size_t replications = 100;
  std::vector<PenaltySpec> penalties{PenaltySpec::scad(0.0)};  // level replaced by tuning
  EMConfig em;
  std::vector<double> c_grid;  // empty: default grid
  double cn_constant = 1.0;
  int workers = 1;  // concurrent replications
};

struct ReplicationResult {
  std::size_t replication = 0;
  PenaltyKind kind = PenaltyKind::SCAD;
  bool ok = false;
  std::string error;
  std::size_t K_hat = 0;
  double level = 0.0;
  // aligned to the true components when K_hat equals the true K
  Eigen::VectorXd pi;
  std::vector<Eigen::VectorXd> beta;
};

struct StudyRow {
  std::string penalty;
  std::size_t n = 0;
  double censor_target = 0.0;
  std::size_t component = 0;  // 1-based
  std::string parameter;      // pi, beta1, beta2, ...
  double bias = 0.0;
  double sd = 0.0;
  std::size_t replications_used = 0;
  std::size_t K_hat_mode = 0;
  double K_correct_fraction = 0.0;
};

struct StudyResult {
  double censor_bound = 0.0;
  std::vector<ReplicationResult> replications;
  std::vector<StudyRow> rows;
};

// Permutation of fitted components (perm[k] = fitted index for true k)
// minimizing the total squared coefficient distance.
std::vector<std::size_t> align_components(const std::vector<Eigen::VectorXd>& fitted,
                                          const std::vector<Eigen::VectorXd>& truth);

// (mean - truth, sample standard deviation); sd is NaN for a single value.
std::pair<double, double> bias_and_sd(std::span<const double> values, double truth);

StudyResult run_study(const StudyConfig& config);

}  // namespace coxmix
