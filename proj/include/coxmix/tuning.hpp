#pragma once

#include "coxmix/em.hpp"

#include <string>
#include <vector>

namespace coxmix {

struct TuningPoint {
  double c = 0.0;
  double level = 0.0;
  std::size_t K_hat = 0;
  double bic = 0.0;
  double loglik = 0.0;  // unpenalized observed log-likelihood
  int iterations = 0;
  bool converged = false;
  std::string error;  // nonempty when the fit failed
};

struct TuningReport {
  std::vector<TuningPoint> grid;
  std::size_t best_index = 0;
  double cn_constant = 1.0;
  FittedModel best_model;
};

// D_f = K - 1 + K p
double degrees_of_freedom(std::size_t K, std::size_t p);

// C_n = c log(log(n + K))
double bic_cn(double cn_constant, std::size_t n, std::size_t K);

// Unpenalized observed log-likelihood minus C_n D_f log(n) / 2.
double bic_score(const Dataset& data, const FittedModel& model, double cn_constant);
double bic_from_loglik(double loglik, std::size_t n, std::size_t K, std::size_t p, double cn_constant);

// c sqrt(log(n) / n)
double tuning_level(double c, std::size_t n);

// 20 equally spaced points on [0.1, 2.0].
std::vector<double> default_c_grid();

// Fits every grid point with the same seed schedule and marks the arg-max of
// BIC (ties: smaller K, then smaller level). `base` supplies kind, shape,
// epsilon and prune threshold; its level is replaced per grid point.
// `workers` grid points run at once, each fit with a single worker.
TuningReport select_tuning(const Dataset& data, const PenaltySpec& base, const std::vector<double>& c_grid,
                           const EMConfig& config, double cn_constant = 1.0, int workers = 1);

}  // namespace coxmix
