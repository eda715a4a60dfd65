#include "coxmix/tuning.hpp"

#include "coxmix/errors.hpp"

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace coxmix {

double degrees_of_freedom(std::size_t K, std::size_t p) {
  if (K == 0) throw std::invalid_argument("K must be >= 1");
  return static_cast<double>(K - 1 + K * p);
}

double bic_cn(double cn_constant, std::size_t n, std::size_t K) {
  const double inner = std::log(static_cast<double>(n + K));
  if (!(inner > 1.0)) throw std::invalid_argument("C_n undefined: log(log(n + K)) needs n + K > e");
  return cn_constant * std::log(inner);
}

double bic_from_loglik(double loglik, std::size_t n, std::size_t K, std::size_t p, double cn_constant) {
  return loglik - 0.5 * bic_cn(cn_constant, n, K) * degrees_of_freedom(K, p) * std::log(static_cast<double>(n));
}

double bic_score(const Dataset& data, const FittedModel& model, double cn_constant) {
  return bic_from_loglik(observed_loglik(data, model.params), data.n(), model.params.K(), data.p(), cn_constant);
}

double tuning_level(double c, std::size_t n) {
  const double nn = static_cast<double>(n);
  return c * std::sqrt(std::log(nn) / nn);
}

std::vector<double> default_c_grid() {
  std::vector<double> g(20);
  for (int i = 0; i < 20; ++i) g[static_cast<std::size_t>(i)] = 0.1 + 0.1 * i;
  return g;
}

TuningReport select_tuning(const Dataset& data, const PenaltySpec& base, const std::vector<double>& c_grid,
                           const EMConfig& config, double cn_constant, int workers) {
  if (c_grid.empty()) throw std::invalid_argument("tuning grid is empty");
  for (double c : c_grid)
    if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("tuning grid values must be finite and >= 0");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  config.validate();

  EMConfig inner = config;
  inner.workers = 1;
  const int G = static_cast<int>(c_grid.size());
  std::vector<TuningPoint> points(c_grid.size());
  std::vector<std::optional<FittedModel>> models(c_grid.size());

#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
  for (int g = 0; g < G; ++g) {
    const auto ug = static_cast<std::size_t>(g);
    TuningPoint& pt = points[ug];
    pt.c = c_grid[ug];
    pt.level = tuning_level(pt.c, data.n());
    try {
      PenaltySpec spec = base;
      spec.level = pt.level;
      FittedModel m = fit_mixture(data, spec, inner);
      pt.K_hat = m.params.K();
      pt.loglik = observed_loglik(data, m.params);
      pt.bic = bic_from_loglik(pt.loglik, data.n(), pt.K_hat, data.p(), cn_constant);
      pt.iterations = m.iterations;
      pt.converged = m.converged;
      models[ug] = std::move(m);
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
  }

  std::optional<std::size_t> best;
  for (std::size_t g = 0; g < points.size(); ++g) {
    if (!models[g] || !std::isfinite(points[g].bic)) continue;
    if (!best) {
      best = g;
      continue;
    }
    const TuningPoint& a = points[g];
    const TuningPoint& b = points[*best];
    if (a.bic > b.bic || (a.bic == b.bic && (a.K_hat < b.K_hat || (a.K_hat == b.K_hat && a.level < b.level))))
      best = g;
  }
  if (!best) {
    std::ostringstream os;
    os << "every tuning grid point failed:";
    for (const auto& pt : points) os << " [c=" << pt.c << "] " << pt.error << ";";
    throw NumericalError(os.str());
  }
  TuningReport report;
  report.grid = std::move(points);
  report.best_index = *best;
  report.cn_constant = cn_constant;
  report.best_model = std::move(*models[*best]);
  return report;
}

}  // namespace coxmix
