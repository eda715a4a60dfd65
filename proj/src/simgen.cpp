#include "coxmix/simgen.hpp"

#include "coxmix/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace coxmix {

void SimConfig::validate() const {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (pi_true.empty()) throw std::invalid_argument("pi_true is empty");
  double total = 0.0;
  for (double p : pi_true) {
    if (!(p >= 0.0)) throw std::invalid_argument("pi_true entries must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("pi_true must sum to 1");
  if (beta_true.size() != pi_true.size()) throw std::invalid_argument("beta_true needs one vector per component");
  for (const auto& b : beta_true)
    if (static_cast<std::size_t>(b.size()) != p() || p() == 0)
      throw std::invalid_argument("beta_true vectors must share a positive length");
  if (!(std::abs(ar1_rho) < 1.0)) throw std::invalid_argument("ar1_rho must satisfy |rho| < 1");
  if (!(censor_target >= 0.0 && censor_target < 1.0)) throw std::invalid_argument("censor_target must lie in [0, 1)");
  if (pilot_size < 100) throw std::invalid_argument("pilot_size must be >= 100");
}

Eigen::MatrixXd ar1_covariates(std::size_t n, std::size_t p, double rho, Rng& rng) {
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("ar1 correlation must satisfy |rho| < 1");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  const double innovation = std::sqrt(1.0 - rho * rho);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double prev = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double z = rng.normal();
      prev = j == 0 ? z : rho * prev + innovation * z;
      x(i, j) = prev;
    }
  }
  return x;
}

double transformation_event_time(double e, double lp) { return 0.25 * std::log1p(0.5 * e * std::exp(-lp)); }

double transformation_h(double t) { return std::log(2.0 * std::expm1(4.0 * t)); }

double expected_censoring(std::span<const double> event_times, double bound) {
  double total = 0.0;
  for (double t : event_times) total += std::min(t, bound) / bound;
  return total / static_cast<double>(event_times.size());
}

namespace {

std::size_t draw_component(const std::vector<double>& pi, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < pi.size(); ++k) {
    acc += pi[k];
    if (u < acc) return k;
  }
  return pi.size() - 1;
}

}  // namespace

double calibrate_censoring(const SimConfig& config, Rng& rng) {
  config.validate();
  if (!(config.censor_target > 0.0)) throw std::invalid_argument("censoring target 0 is unreachable by a finite bound");
  std::vector<double> t(config.pilot_size);
  const Eigen::MatrixXd x = ar1_covariates(config.pilot_size, config.p(), config.ar1_rho, rng);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::size_t k = draw_component(config.pi_true, rng);
    t[i] = transformation_event_time(rng.exponential(), x.row(static_cast<Eigen::Index>(i)).dot(config.beta_true[k]));
  }
  // the censoring fraction falls from 1 towards 0 as the bound grows
  double lo = *std::min_element(t.begin(), t.end());
  double hi = std::max(1.0, lo);
  if (!(lo > 0.0)) lo = 1e-300;
  while (expected_censoring(t, hi) > config.censor_target) {
    hi *= 2.0;
    if (!std::isfinite(hi)) throw std::runtime_error("could not bracket the censoring bound");
  }
  if (expected_censoring(t, lo) < config.censor_target) throw std::runtime_error("censoring target is unreachable");
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (expected_censoring(t, mid) > config.censor_target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SimulatedData generate_dataset(const SimConfig& config, Rng& rng, std::optional<double> censor_bound) {
  config.validate();
  double bound = std::numeric_limits<double>::infinity();
  if (censor_bound) bound = *censor_bound;
  else if (config.censor_target > 0.0) bound = calibrate_censoring(config, rng);
  if (!(bound > 0.0)) throw std::invalid_argument("censoring bound must be > 0");

  const Eigen::MatrixXd x = ar1_covariates(config.n, config.p(), config.ar1_rho, rng);
  Eigen::VectorXd y(static_cast<Eigen::Index>(config.n));
  std::vector<int> status(config.n);
  std::vector<int> labels(config.n);
  std::vector<double> event_times(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    const std::size_t k = draw_component(config.pi_true, rng);
    const double lp = x.row(static_cast<Eigen::Index>(i)).dot(config.beta_true[k]);
    const double t = transformation_event_time(rng.exponential(), lp);
    const double c = std::isinf(bound) ? bound : bound * rng.uniform();
    labels[i] = static_cast<int>(k);
    event_times[i] = t;
    y[static_cast<Eigen::Index>(i)] = std::min(t, c);
    status[i] = t <= c ? 1 : 0;
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < config.p(); ++j) names.push_back("x" + std::to_string(j + 1));
  return SimulatedData{Dataset(std::move(y), std::move(status), x, std::move(names)), std::move(labels),
                       std::move(event_times), bound};
}

std::vector<std::size_t> align_components(const std::vector<Eigen::VectorXd>& fitted,
                                          const std::vector<Eigen::VectorXd>& truth) {
  if (fitted.size() != truth.size()) throw std::invalid_argument("alignment needs equal component counts");
  std::vector<std::size_t> perm(truth.size()), best;
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) cost += (fitted[perm[k]] - truth[k]).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::pair<double, double> bias_and_sd(std::span<const double> values, double truth) {
  if (values.empty()) throw std::invalid_argument("no values to summarize");
  const double m = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= m;
  if (values.size() == 1) return {mean - truth, std::numeric_limits<double>::quiet_NaN()};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean - truth, std::sqrt(ss / (m - 1.0))};
}

StudyResult run_study(const StudyConfig& config) {
  config.sim.validate();
  if (config.replications < 1) throw std::invalid_argument("replications must be >= 1");
  if (config.penalties.empty()) throw std::invalid_argument("no penalty kinds requested");
  if (config.workers < 1) throw std::invalid_argument("workers must be >= 1");
  config.em.validate();

  StudyResult result;
  {
    Rng pilot(derive_seed(config.sim.seed, ~std::uint64_t{0}));
    result.censor_bound = config.sim.censor_target > 0.0 ? calibrate_censoring(config.sim, pilot)
                                                         : std::numeric_limits<double>::infinity();
  }
  const std::vector<double> grid = config.c_grid.empty() ? default_c_grid() : config.c_grid;
  const std::size_t R = config.replications;
  const std::size_t P = config.penalties.size();
  const std::size_t K_true = config.sim.K();
  result.replications.resize(R * P);

#pragma omp parallel for num_threads(config.workers) schedule(dynamic, 1)
  for (std::size_t r = 0; r < R; ++r) {
    const std::uint64_t stream = derive_seed(config.sim.seed, r);
    Rng rng(derive_seed(stream, 0));
    std::optional<SimulatedData> sim;
    std::string data_error;
    try {
      sim = generate_dataset(config.sim, rng, result.censor_bound);
    } catch (const std::exception& e) {
      data_error = e.what();
    }
    for (std::size_t q = 0; q < P; ++q) {
      ReplicationResult& rep = result.replications[r * P + q];
      rep.replication = r;
      rep.kind = config.penalties[q].kind;
      if (!sim) {
        rep.error = data_error;
        continue;
      }
      try {
        EMConfig em = config.em;
        em.seed = derive_seed(stream, 1);
        const TuningReport report = select_tuning(sim->data, config.penalties[q], grid, em, config.cn_constant, 1);
        const FittedModel& m = report.best_model;
        rep.K_hat = m.params.K();
        rep.level = report.grid[report.best_index].level;
        rep.ok = true;
        std::vector<Eigen::VectorXd> betas;
        for (const auto& c : m.params.components) betas.push_back(c.beta);
        if (rep.K_hat == K_true) {
          const auto perm = align_components(betas, config.sim.beta_true);
          rep.pi.resize(static_cast<Eigen::Index>(K_true));
          for (std::size_t k = 0; k < K_true; ++k) {
            rep.pi[static_cast<Eigen::Index>(k)] = m.params.pi[static_cast<Eigen::Index>(perm[k])];
            rep.beta.push_back(betas[perm[k]]);
          }
        } else {
          rep.pi = m.params.pi;
          rep.beta = std::move(betas);
        }
      } catch (const std::exception& e) {
        rep.error = e.what();
      }
    }
  }

  for (std::size_t q = 0; q < P; ++q) {
    std::map<std::size_t, std::size_t> counts;
    std::vector<const ReplicationResult*> correct;
    std::size_t ok = 0;
    for (std::size_t r = 0; r < R; ++r) {
      const ReplicationResult& rep = result.replications[r * P + q];
      if (!rep.ok) continue;
      ++ok;
      ++counts[rep.K_hat];
      if (rep.K_hat == K_true) correct.push_back(&rep);
    }
    std::size_t mode = 0, mode_count = 0;
    for (const auto& [k, c] : counts)
      if (c > mode_count) {
        mode = k;
        mode_count = c;
      }
    const double fraction = ok > 0 ? static_cast<double>(correct.size()) / static_cast<double>(ok) : 0.0;
    auto add_row = [&](std::size_t component, const std::string& parameter, std::span<const double> values,
                       double truth) {
      StudyRow row;
      row.penalty = std::string(to_string(config.penalties[q].kind));
      row.n = config.sim.n;
      row.censor_target = config.sim.censor_target;
      row.component = component + 1;
      row.parameter = parameter;
      row.replications_used = values.size();
      row.K_hat_mode = mode;
      row.K_correct_fraction = fraction;
      if (values.empty()) {
        row.bias = row.sd = std::numeric_limits<double>::quiet_NaN();
      } else {
        std::tie(row.bias, row.sd) = bias_and_sd(values, truth);
      }
      result.rows.push_back(std::move(row));
    };
    for (std::size_t k = 0; k < K_true; ++k) {
      std::vector<double> v;
      for (const auto* rep : correct) v.push_back(rep->pi[static_cast<Eigen::Index>(k)]);
      add_row(k, "pi", v, config.sim.pi_true[k]);
      for (std::size_t j = 0; j < config.sim.p(); ++j) {
        v.clear();
        for (const auto* rep : correct) v.push_back(rep->beta[k][static_cast<Eigen::Index>(j)]);
        add_row(k, "beta" + std::to_string(j + 1), v, config.sim.beta_true[k][static_cast<Eigen::Index>(j)]);
      }
    }
  }
  return result;
}

}  // namespace coxmix
