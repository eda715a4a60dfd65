#pragma once

#include "coxmix/data.hpp"
#include "coxmix/kernels.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace coxmix {

/// Discrete baseline-hazard mass at the distinct event times of a dataset,
/// plus the kernel used to turn it into a smooth hazard.
struct BaselineHazard {
  std::vector<double> event_times;  // distinct, strictly increasing
  std::vector<double> increments;   // aligned with event_times, >= 0
  KernelKind kernel = KernelKind::Gaussian;
  double bandwidth = 1.0;
};

struct ComponentFit {
  Eigen::VectorXd beta;
  BaselineHazard baseline;
  bool converged = false;
  int newton_iterations = 0;
};

struct CoxDerivatives {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

struct NewtonOptions {
  int max_iterations = 25;
  double gradient_tolerance = 1e-8;
  int max_halvings = 20;
};

struct SmoothingOptions {
  KernelKind kernel = KernelKind::Gaussian;
  double bandwidth = 0.0;  // <= 0 selects default_bandwidth(data)
};

struct NewtonResult {
  Eigen::VectorXd beta;
  double value = 0.0;
  double gradient_norm = 0.0;  // max-norm at beta
  bool converged = false;
  int iterations = 0;
};

// sum_i delta_i w_i [beta'x_i - log sum_{j: y_j >= y_i} w_j exp(beta'x_j)]
// Weights must be nonnegative; at least one event needs positive weight.
double weighted_partial_loglik(const Dataset& data, std::span<const double> weights, const Eigen::VectorXd& beta);

CoxDerivatives weighted_partial_derivatives(const Dataset& data, std::span<const double> weights,
                                            const Eigen::VectorXd& beta);

// Newton-Raphson with step halving; ridge-damped when the Hessian is singular.
NewtonResult maximize_weighted_partial(const Dataset& data, std::span<const double> weights,
                                       Eigen::VectorXd beta_init, const NewtonOptions& options = {});

// Per-record Breslow mass w_i / sum_{j: y_j >= y_i} w_j exp(beta'x_j) for
// events, 0 for censored records.
std::vector<double> profile_hazard_increments(const Dataset& data, std::span<const double> weights,
                                              const Eigen::VectorXd& beta);

// Aggregates per-record increments onto the distinct event times of `data`.
BaselineHazard make_baseline(const Dataset& data, std::span<const double> per_record_increments,
                             KernelKind kernel, double bandwidth);

ComponentFit fit_weighted_cox(const Dataset& data, std::span<const double> weights, Eigen::VectorXd beta_init,
                              const NewtonOptions& newton = {}, const SmoothingOptions& smoothing = {});

// sd(Y) * n^(-1/5); falls back to 1 when all times coincide.
double default_bandwidth(const Dataset& data);

double smooth_baseline_hazard(const BaselineHazard& baseline, double t);
double cumulative_hazard(const BaselineHazard& baseline, double t);

// delta [log lambda0(y) + beta'x] - exp(beta'x) Lambda0(y), with the smoothed
// hazard for the point value, the step estimator for the integral and the log
// hazard floored at log(1e-300).
double component_log_density(const SurvivalRecord& record, const ComponentFit& fit);

}  // namespace coxmix
