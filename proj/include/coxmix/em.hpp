#pragma once

#include "coxmix/coxfit.hpp"
#include "coxmix/data.hpp"
#include "coxmix/penalty.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace coxmix {

// n x K posterior membership probabilities; rows sum to one.
using ResponsibilityMatrix = Eigen::MatrixXd;

struct MixtureParams {
  Eigen::VectorXd pi;
  std::vector<ComponentFit> components;

  std::size_t K() const { return components.size(); }
};

// How the penalized M-step maps responsibilities to mixing proportions.
enum class MixingUpdate {
  // Maximizes the linearized surrogate exactly: the Lagrange multiplier is
  // solved so that the proportions sum to one.
  Exact,
  // The closed form with the multiplier evaluated at the previous
  // proportions, renormalized onto the simplex.
  ClosedForm,
};

struct EMConfig {
  int k_init = 10;
  int max_iterations = 500;
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int restarts = 5;
  std::uint64_t seed = 20240521;
  bool standardize = true;
  KernelKind kernel = KernelKind::Gaussian;
  double bandwidth = 0.0;  // <= 0: sd(Y) n^(-1/5) on the fitting data
  NewtonOptions newton;
  MixingUpdate mixing_update = MixingUpdate::Exact;
  int workers = 1;  // threads used across restarts

  void validate() const;
};

struct FittedModel {
  MixtureParams params;  // coefficients on the original covariate scale
  ResponsibilityMatrix responsibilities;
  std::vector<double> history;  // penalized observed log-likelihood per iteration
  PenaltySpec spec;
  EMConfig config;
  std::size_t selected_K = 0;
  std::uint64_t seed = 0;  // config.seed; the restart stream is derived from it
  int restart = 0;         // index of the winning restart
  int iterations = 0;
  bool converged = false;
  bool components_distinct = true;
  std::vector<std::string> warnings;
};

// Snapshot handed to an observer after every M-step proportion update
// (post-pruning) of every restart.
struct IterationTrace {
  int restart = 0;
  int iteration = 0;
  const ResponsibilityMatrix* responsibilities = nullptr;
  const Eigen::VectorXd* pi = nullptr;
  double penalized_loglik = 0.0;  // value before this iteration's update
  bool pruned = false;
};
using EMObserver = std::function<void(const IterationTrace&)>;

// Random hard assignment into config.k_init columns, uniform proportions,
// and per-column Cox fits with profile baselines.
std::pair<MixtureParams, ResponsibilityMatrix> initialize(const Dataset& data, const EMConfig& config,
                                                          std::uint64_t rng_seed);

// Draws the n x K binary start matrix only (no model fitting).
ResponsibilityMatrix initial_assignment(const Dataset& data, int k, std::uint64_t rng_seed);

// log f_k(y_i, delta_i | x_i), n x K.
Eigen::MatrixXd log_density_matrix(const Dataset& data, const MixtureParams& params);

ResponsibilityMatrix e_step(const Dataset& data, const MixtureParams& params);

Eigen::VectorXd update_mixing_proportions(const ResponsibilityMatrix& s, const Eigen::VectorXd& pi_prev,
                                          const PenaltySpec& spec, std::size_t n);
Eigen::VectorXd update_mixing_proportions_closed_form(const ResponsibilityMatrix& s, const Eigen::VectorXd& pi_prev,
                                                      const PenaltySpec& spec, std::size_t n);

// sum_k colsum_k log pi_k - n level sum_k g_k pi_k, with g_k the slopes of the
// log-scale penalty at pi_prev. The objective the proportion update maximizes.
double lla_surrogate(const Eigen::VectorXd& column_sums, const Eigen::VectorXd& pi, const Eigen::VectorXd& pi_prev,
                     const PenaltySpec& spec, std::size_t n);

std::pair<MixtureParams, ResponsibilityMatrix> prune_components(MixtureParams params, ResponsibilityMatrix s,
                                                                double threshold);

double observed_loglik(const Dataset& data, const MixtureParams& params);
double penalized_observed_loglik(const Dataset& data, const MixtureParams& params, const PenaltySpec& spec);
double complete_data_loglik(const Dataset& data, const ResponsibilityMatrix& s, const MixtureParams& params);

bool check_convergence(double loglik_curr, double loglik_prev, const EMConfig& config);

FittedModel fit_mixture(const Dataset& data, const PenaltySpec& spec, const EMConfig& config,
                        const EMObserver& observer = {});

}  // namespace coxmix
