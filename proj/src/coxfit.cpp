#include "coxmix/coxfit.hpp"

#include "coxmix/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace coxmix {

namespace {

void check_weights(const Dataset& data, std::span<const double> w) {
  if (w.size() != data.n()) throw std::invalid_argument("weight vector length differs from record count");
  bool usable = false;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) throw std::invalid_argument("weights must be finite and >= 0");
    if (w[i] > 0.0 && data.status(i) == 1) usable = true;
  }
  if (!usable) throw DegenerateComponentError("component has no event with positive weight");
}

double max_linear_predictor(std::span<const double> w, const Eigen::VectorXd& eta) {
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] > 0.0) shift = std::max(shift, eta[static_cast<Eigen::Index>(i)]);
  return shift;
}

// Walks the sorted order from the largest time down, adding each tie block to
// the running risk-set sums before scoring the block's events (Breslow ties).
template <bool WithDerivatives>
CoxDerivatives accumulate(const Dataset& data, std::span<const double> w, const Eigen::VectorXd& beta) {
  const auto& order = data.sort_index();
  const auto& x = data.covariates();
  const Eigen::Index p = x.cols();
  const Eigen::VectorXd eta = x * beta;
  const double shift = max_linear_predictor(w, eta);

  CoxDerivatives out;
  if constexpr (WithDerivatives) {
    out.gradient = Eigen::VectorXd::Zero(p);
    out.hessian = Eigen::MatrixXd::Zero(p, p);
  }
  if (!std::isfinite(shift)) {
    out.value = -std::numeric_limits<double>::infinity();
    return out;
  }
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(WithDerivatives ? p : 0);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(WithDerivatives ? p : 0, WithDerivatives ? p : 0);

  std::size_t end = data.n();
  while (end > 0) {
    const std::size_t start = data.tie_start(end - 1);
    for (std::size_t q = start; q < end; ++q) {
      const std::size_t i = order[q];
      if (w[i] <= 0.0) continue;
      const double r = w[i] * std::exp(eta[static_cast<Eigen::Index>(i)] - shift);
      s0 += r;
      if constexpr (WithDerivatives) {
        const auto xi = x.row(static_cast<Eigen::Index>(i)).transpose();
        s1.noalias() += r * xi;
        s2.noalias() += r * xi * xi.transpose();
      }
    }
    for (std::size_t q = start; q < end; ++q) {
      const std::size_t i = order[q];
      if (data.status(i) != 1 || w[i] <= 0.0) continue;
      if (!(s0 > 0.0)) {
        out.value = -std::numeric_limits<double>::infinity();
        return out;
      }
      out.value += w[i] * (eta[static_cast<Eigen::Index>(i)] - shift - std::log(s0));
      if constexpr (WithDerivatives) {
        const Eigen::VectorXd mean = s1 / s0;
        out.gradient.noalias() += w[i] * (x.row(static_cast<Eigen::Index>(i)).transpose() - mean);
        out.hessian.noalias() -= w[i] * (s2 / s0 - mean * mean.transpose());
      }
    }
    end = start;
  }
  return out;
}

}  // namespace

double weighted_partial_loglik(const Dataset& data, std::span<const double> weights, const Eigen::VectorXd& beta) {
  check_weights(data, weights);
  return accumulate<false>(data, weights, beta).value;
}

CoxDerivatives weighted_partial_derivatives(const Dataset& data, std::span<const double> weights,
                                            const Eigen::VectorXd& beta) {
  check_weights(data, weights);
  return accumulate<true>(data, weights, beta);
}

NewtonResult maximize_weighted_partial(const Dataset& data, std::span<const double> weights,
                                       Eigen::VectorXd beta_init, const NewtonOptions& options) {
  check_weights(data, weights);
  if (static_cast<std::size_t>(beta_init.size()) != data.p())
    throw std::invalid_argument("initial coefficient length differs from covariate dimension");

  NewtonResult res;
  res.beta = std::move(beta_init);
  CoxDerivatives d = accumulate<true>(data, weights, res.beta);
  if (!std::isfinite(d.value)) throw NumericalError("partial likelihood is not finite at the starting point");

  const Eigen::Index p = res.beta.size();
  for (int it = 0;; ++it) {
    res.gradient_norm = p > 0 ? d.gradient.cwiseAbs().maxCoeff() : 0.0;
    if (res.gradient_norm <= options.gradient_tolerance) {
      res.converged = true;
      break;
    }
    if (it >= options.max_iterations) break;

    const Eigen::MatrixXd info = -d.hessian;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
      const double trace = info.trace();
      const double ridge = 1e-8 * (trace > 0.0 ? trace : 1.0);
      ldlt.compute(info + ridge * Eigen::MatrixXd::Identity(p, p));
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0)
        throw NumericalError("Cox information matrix is not positive definite even after ridge damping");
    }
    const Eigen::VectorXd step = ldlt.solve(d.gradient);
    if (!step.allFinite()) throw NumericalError("Newton step is not finite");

    double scale = 1.0;
    bool accepted = false;
    Eigen::VectorXd candidate;
    for (int h = 0; h <= options.max_halvings; ++h, scale *= 0.5) {
      candidate = res.beta + scale * step;
      const double v = accumulate<false>(data, weights, candidate).value;
      if (std::isfinite(v) && v >= d.value) {
        accepted = true;
        break;
      }
    }
    // Near the optimum the predicted gain drops below the rounding noise of
    // the objective; a full Newton step is then taken on trust.
    if (!accepted && 0.5 * d.gradient.dot(step) <= 1e-12 * (1.0 + std::abs(d.value))) {
      candidate = res.beta + step;
      accepted = std::isfinite(accumulate<false>(data, weights, candidate).value);
    }
    if (!accepted) break;
    res.beta = candidate;
    d = accumulate<true>(data, weights, res.beta);
    ++res.iterations;
  }
  res.value = d.value;
  return res;
}

std::vector<double> profile_hazard_increments(const Dataset& data, std::span<const double> weights,
                                              const Eigen::VectorXd& beta) {
  check_weights(data, weights);
  const auto& order = data.sort_index();
  const Eigen::VectorXd eta = data.covariates() * beta;
  const double shift = max_linear_predictor(weights, eta);
  std::vector<double> inc(data.n(), 0.0);
  double s0 = 0.0;
  std::size_t end = data.n();
  while (end > 0) {
    const std::size_t start = data.tie_start(end - 1);
    for (std::size_t q = start; q < end; ++q) {
      const std::size_t i = order[q];
      if (weights[i] > 0.0) s0 += weights[i] * std::exp(eta[static_cast<Eigen::Index>(i)] - shift);
    }
    for (std::size_t q = start; q < end; ++q) {
      const std::size_t i = order[q];
      if (data.status(i) != 1 || weights[i] <= 0.0) continue;
      if (!(s0 > 0.0)) throw DegenerateComponentError("empty weighted risk set at an event time");
      inc[i] = std::exp(std::log(weights[i]) - shift - std::log(s0));
    }
    end = start;
  }
  return inc;
}

BaselineHazard make_baseline(const Dataset& data, std::span<const double> per_record_increments, KernelKind kernel,
                             double bandwidth) {
  if (per_record_increments.size() != data.n()) throw std::invalid_argument("increment vector length mismatch");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  BaselineHazard b;
  b.kernel = kernel;
  b.bandwidth = bandwidth;
  for (std::size_t i : data.sort_index()) {
    if (data.status(i) != 1) continue;
    const double t = data.time(i);
    if (b.event_times.empty() || b.event_times.back() != t) {
      b.event_times.push_back(t);
      b.increments.push_back(0.0);
    }
    b.increments.back() += per_record_increments[i];
  }
  return b;
}

ComponentFit fit_weighted_cox(const Dataset& data, std::span<const double> weights, Eigen::VectorXd beta_init,
                              const NewtonOptions& newton, const SmoothingOptions& smoothing) {
  NewtonResult nr = maximize_weighted_partial(data, weights, std::move(beta_init), newton);
  const auto inc = profile_hazard_increments(data, weights, nr.beta);
  const double h = smoothing.bandwidth > 0.0 ? smoothing.bandwidth : default_bandwidth(data);
  return ComponentFit{std::move(nr.beta), make_baseline(data, inc, smoothing.kernel, h), nr.converged, nr.iterations};
}

double default_bandwidth(const Dataset& data) {
  const auto& y = data.times();
  const double n = static_cast<double>(data.n());
  if (data.n() < 2) return 1.0;
  const double mean = y.mean();
  const double sd = std::sqrt((y.array() - mean).square().sum() / (n - 1.0));
  return sd > 0.0 ? sd * std::pow(n, -0.2) : 1.0;
}

double smooth_baseline_hazard(const BaselineHazard& baseline, double t) {
  if (!(baseline.bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  const double h = baseline.bandwidth;
  double sum = 0.0;
  for (std::size_t b = 0; b < baseline.event_times.size(); ++b)
    sum += kernel_value(baseline.kernel, (t - baseline.event_times[b]) / h) * baseline.increments[b];
  return sum / h;
}

double cumulative_hazard(const BaselineHazard& baseline, double t) {
  double sum = 0.0;
  for (std::size_t b = 0; b < baseline.event_times.size() && baseline.event_times[b] <= t; ++b)
    sum += baseline.increments[b];
  return sum;
}

double component_log_density(const SurvivalRecord& record, const ComponentFit& fit) {
  const double eta = record.x.dot(fit.beta);
  double v = -std::exp(eta) * cumulative_hazard(fit.baseline, record.y);
  if (record.delta == 1) {
    const double hz = smooth_baseline_hazard(fit.baseline, record.y);
    v += (hz > 1e-300 ? std::log(hz) : kernels::kLogHazardFloor) + eta;
  }
  return v;
}

}  // namespace coxmix
