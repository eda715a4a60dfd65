#include "coxmix/em.hpp"

#include "coxmix/errors.hpp"
#include "coxmix/kernels.hpp"
#include "coxmix/rng.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace coxmix {

void EMConfig::validate() const {
  if (k_init < 1) throw std::invalid_argument("k_init must be >= 1");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  if (!(eps_abs > 0.0 && eps_abs < 1.0)) throw std::invalid_argument("eps_abs must lie in (0, 1)");
  if (!(eps_rel > 0.0 && eps_rel < 1.0)) throw std::invalid_argument("eps_rel must lie in (0, 1)");
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (bandwidth < 0.0) throw std::invalid_argument("bandwidth must be >= 0 (0 selects the default rule)");
}

namespace {

constexpr int kAssignmentAttempts = 20;

Eigen::VectorXd column_sums(const ResponsibilityMatrix& s) { return s.colwise().sum().transpose(); }

bool every_column_has_event(const Dataset& data, const ResponsibilityMatrix& s) {
  for (Eigen::Index k = 0; k < s.cols(); ++k) {
    bool found = false;
    for (std::size_t i = 0; i < data.n() && !found; ++i)
      found = data.status(i) == 1 && s(static_cast<Eigen::Index>(i), k) > 0.0;
    if (!found) return false;
  }
  return true;
}

// Redraws the assignment when a column ends up without events; after
// kAssignmentAttempts failures the column count drops by one.
ResponsibilityMatrix draw_start(const Dataset& data, int k_init, std::uint64_t seed) {
  if (static_cast<std::size_t>(k_init) > data.n()) throw std::invalid_argument("k_init exceeds the number of records");
  for (int k = k_init; k >= 1; --k) {
    for (int attempt = 0; attempt < kAssignmentAttempts; ++attempt) {
      const std::uint64_t s = attempt == 0 && k == k_init ? seed : derive_seed(seed, static_cast<std::uint64_t>(k * 1000 + attempt));
      ResponsibilityMatrix start = initial_assignment(data, k, s);
      if (every_column_has_event(data, start)) return start;
    }
  }
  throw NumericalError("could not draw a starting assignment");  // unreachable: k = 1 always has an event
}

std::vector<Eigen::Index> kept_columns(const Eigen::VectorXd& pi, double threshold) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < pi.size(); ++k)
    if (pi[k] >= threshold) keep.push_back(k);
  return keep;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = m.col(cols[c]);
  return out;
}

Eigen::VectorXd select_entries(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) out[static_cast<Eigen::Index>(c)] = v[idx[c]];
  return out;
}

double penalty_total(const Eigen::VectorXd& pi, const PenaltySpec& spec, std::size_t n) {
  if (spec.level == 0.0) return 0.0;
  double total = 0.0;
  for (Eigen::Index k = 0; k < pi.size(); ++k) total += log_scale_term(spec, std::clamp(pi[k], 0.0, 1.0));
  return static_cast<double>(n) * spec.level * total;
}

// Precomputed per-dataset structure for the EM inner loop: the distinct event
// times, where each record sits on that grid, and the kernel smoothing matrix.
struct Workspace {
  const Dataset* data;
  KernelKind kernel;
  double bandwidth;
  std::vector<double> grid;
  std::vector<std::ptrdiff_t> slot;  // grid index of an event record's time, -1 if censored
  std::vector<std::size_t> upto;     // number of grid times <= y_i
  Eigen::MatrixXd smoother;          // smoother(a, b) = K((grid_a - grid_b) / h) / h

  Workspace(const Dataset& d, KernelKind kind, double h) : data(&d), kernel(kind), bandwidth(h) {
    for (std::size_t i : d.sort_index())
      if (d.status(i) == 1 && (grid.empty() || grid.back() != d.time(i))) grid.push_back(d.time(i));
    slot.assign(d.n(), -1);
    upto.assign(d.n(), 0);
    for (std::size_t i = 0; i < d.n(); ++i) {
      const auto it = std::upper_bound(grid.begin(), grid.end(), d.time(i));
      upto[i] = static_cast<std::size_t>(it - grid.begin());
      if (d.status(i) == 1) slot[i] = static_cast<std::ptrdiff_t>(upto[i]) - 1;
    }
    kernels::parallel::kernel_matrix(grid, grid, h, kind, smoother);
  }

  std::size_t m() const { return grid.size(); }

  Eigen::VectorXd to_grid(const std::vector<double>& per_record) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m()));
    for (std::size_t i = 0; i < per_record.size(); ++i)
      if (slot[i] >= 0) g[slot[i]] += per_record[i];
    return g;
  }

  Eigen::MatrixXd log_densities(const Eigen::MatrixXd& beta, const Eigen::MatrixXd& inc) const {
    const Dataset& d = *data;
    const Eigen::Index n = static_cast<Eigen::Index>(d.n());
    const Eigen::Index K = beta.cols();
    const Eigen::MatrixXd lp = d.covariates() * beta;
    const Eigen::MatrixXd smooth = smoother * inc;
    Eigen::MatrixXd cum = inc;
    for (Eigen::Index a = 1; a < cum.rows(); ++a) cum.row(a) += cum.row(a - 1);
    Eigen::MatrixXd hazard = Eigen::MatrixXd::Zero(n, K);
    Eigen::MatrixXd cumhaz = Eigen::MatrixXd::Zero(n, K);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      if (slot[ui] >= 0) hazard.row(i) = smooth.row(slot[ui]);
      if (upto[ui] > 0) cumhaz.row(i) = cum.row(static_cast<Eigen::Index>(upto[ui]) - 1);
    }
    Eigen::MatrixXd out;
    kernels::parallel::component_log_densities(d.statuses(), lp, hazard, cumhaz, out);
    return out;
  }

  BaselineHazard baseline(const Eigen::VectorXd& inc) const {
    return BaselineHazard{grid, std::vector<double>(inc.data(), inc.data() + inc.size()), kernel, bandwidth};
  }
};

struct RestartResult {
  Eigen::VectorXd pi;
  Eigen::MatrixXd beta;  // p x K
  Eigen::MatrixXd inc;   // m x K
  std::vector<char> newton_converged;
  std::vector<int> newton_iterations;
  ResponsibilityMatrix s;
  std::vector<double> history;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

Eigen::VectorXd mixing_update(const ResponsibilityMatrix& s, const Eigen::VectorXd& pi, const PenaltySpec& spec,
                              std::size_t n, MixingUpdate rule) {
  return rule == MixingUpdate::Exact ? update_mixing_proportions(s, pi, spec, n)
                                     : update_mixing_proportions_closed_form(s, pi, spec, n);
}

RestartResult run_restart(const Workspace& ws, const PenaltySpec& spec, const EMConfig& config, std::uint64_t seed,
                          int restart, const EMObserver& observer) {
  const Dataset& d = *ws.data;
  const std::size_t n = d.n();
  const Eigen::Index p = static_cast<Eigen::Index>(d.p());

  RestartResult r;
  ResponsibilityMatrix s = draw_start(d, config.k_init, seed);
  Eigen::Index K = s.cols();
  if (K < config.k_init) {
    r.warnings.push_back("k_init reduced to " + std::to_string(K) + " so that every start column has an event");
  }
  r.pi = Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(K));
  r.beta = Eigen::MatrixXd::Zero(p, K);
  r.inc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ws.m()), K);
  r.newton_converged.assign(static_cast<std::size_t>(K), 0);
  r.newton_iterations.assign(static_cast<std::size_t>(K), 0);

  // Returns the columns whose weighted Cox fit had no usable event mass.
  auto m_step = [&](const ResponsibilityMatrix& w) {
    std::vector<Eigen::Index> degenerate;
    for (Eigen::Index k = 0; k < w.cols(); ++k) {
      const std::span<const double> wk(w.col(k).data(), n);
      try {
        // A warm start from a diverging component can underflow every risk
        // set; the zero vector always gives a finite objective.
        const bool warm_ok = std::isfinite(weighted_partial_loglik(d, wk, r.beta.col(k)));
        NewtonResult nr = maximize_weighted_partial(d, wk, warm_ok ? Eigen::VectorXd(r.beta.col(k)) : Eigen::VectorXd::Zero(p),
                                                    config.newton);
        r.inc.col(k) = ws.to_grid(profile_hazard_increments(d, wk, nr.beta));
        r.beta.col(k) = nr.beta;
        r.newton_converged[static_cast<std::size_t>(k)] = nr.converged;
        r.newton_iterations[static_cast<std::size_t>(k)] = nr.iterations;
      } catch (const DegenerateComponentError&) {
        degenerate.push_back(k);
      }
    }
    return degenerate;
  };
  auto keep_only = [&](const std::vector<Eigen::Index>& keep) {
    r.pi = select_entries(r.pi, keep);
    r.pi /= r.pi.sum();
    r.beta = select_columns(r.beta, keep);
    r.inc = select_columns(r.inc, keep);
    std::vector<char> nc;
    std::vector<int> ni;
    for (auto k : keep) {
      nc.push_back(r.newton_converged[static_cast<std::size_t>(k)]);
      ni.push_back(r.newton_iterations[static_cast<std::size_t>(k)]);
    }
    r.newton_converged = std::move(nc);
    r.newton_iterations = std::move(ni);
  };
  auto drop_degenerate = [&](const std::vector<Eigen::Index>& degenerate) {
    if (degenerate.empty()) return false;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < r.pi.size(); ++k)
      if (std::find(degenerate.begin(), degenerate.end(), k) == degenerate.end()) keep.push_back(k);
    if (keep.empty()) throw NumericalError("every component lost its event mass");
    r.warnings.push_back("dropped " + std::to_string(degenerate.size()) + " component(s) without event mass");
    keep_only(keep);
    return true;
  };

  if (drop_degenerate(m_step(s))) K = r.pi.size();

  Eigen::MatrixXd log_f = ws.log_densities(r.beta, r.inc);
  Eigen::VectorXd row_marginal;
  auto evaluate = [&]() {
    const std::size_t bad = kernels::parallel::responsibilities(log_f, r.pi.array().log().matrix(), s, row_marginal);
    if (bad > 0) r.warnings.push_back(std::to_string(bad) + " record(s) had zero density under every component");
    return row_marginal.sum() - penalty_total(r.pi, spec, n);
  };
  double loglik = evaluate();
  r.history.push_back(loglik);

  for (int it = 1; it <= config.max_iterations; ++it) {
    Eigen::VectorXd pi_new = mixing_update(s, r.pi, spec, n, config.mixing_update);
    const auto keep = kept_columns(pi_new, spec.prune_threshold);
    bool pruned = static_cast<Eigen::Index>(keep.size()) < pi_new.size();
    if (keep.empty()) throw NumericalError("every mixing proportion fell below the prune threshold");
    r.pi = pi_new;
    if (pruned) {
      keep_only(keep);
      log_f = select_columns(log_f, keep);
      kernels::parallel::responsibilities(log_f, r.pi.array().log().matrix(), s, row_marginal);
    }
    if (observer) observer(IterationTrace{restart, it, &s, &r.pi, loglik, pruned});

    if (drop_degenerate(m_step(s))) pruned = true;
    log_f = ws.log_densities(r.beta, r.inc);
    const double next = evaluate();
    r.history.push_back(next);
    r.iterations = it;
    if (!std::isfinite(next)) throw NumericalError("penalized log-likelihood became non-finite");
    const bool done = !pruned && check_convergence(next, loglik, config);
    loglik = next;
    if (done) {
      r.converged = true;
      break;
    }
  }
  r.s = s;
  return r;
}

}  // namespace

ResponsibilityMatrix initial_assignment(const Dataset& data, int k, std::uint64_t rng_seed) {
  if (k < 1) throw std::invalid_argument("component count must be >= 1");
  Rng rng(rng_seed);
  ResponsibilityMatrix s = ResponsibilityMatrix::Zero(static_cast<Eigen::Index>(data.n()), k);
  for (Eigen::Index i = 0; i < s.rows(); ++i) s(i, static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(k)))) = 1.0;
  return s;
}

std::pair<MixtureParams, ResponsibilityMatrix> initialize(const Dataset& data, const EMConfig& config,
                                                          std::uint64_t rng_seed) {
  config.validate();
  ResponsibilityMatrix s = draw_start(data, config.k_init, rng_seed);
  const Eigen::Index K = s.cols();
  const SmoothingOptions smoothing{config.kernel, config.bandwidth > 0.0 ? config.bandwidth : default_bandwidth(data)};
  MixtureParams params;
  params.pi = Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(K));
  for (Eigen::Index k = 0; k < K; ++k) {
    const std::span<const double> w(s.col(k).data(), data.n());
    params.components.push_back(
        fit_weighted_cox(data, w, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.p())), config.newton, smoothing));
  }
  return {std::move(params), std::move(s)};
}

Eigen::MatrixXd log_density_matrix(const Dataset& data, const MixtureParams& params) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.n());
  const Eigen::Index K = static_cast<Eigen::Index>(params.K());
  if (K == 0) throw std::invalid_argument("mixture has no components");
  Eigen::MatrixXd lp(n, K), hazard = Eigen::MatrixXd::Zero(n, K), cumhaz(n, K);

  std::vector<double> event_times;
  std::vector<Eigen::Index> event_rows;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.status(static_cast<std::size_t>(i)) == 1) {
      event_times.push_back(data.time(static_cast<std::size_t>(i)));
      event_rows.push_back(i);
    }
  }
  Eigen::MatrixXd weights;
  const BaselineHazard* cached = nullptr;
  for (Eigen::Index k = 0; k < K; ++k) {
    const ComponentFit& c = params.components[static_cast<std::size_t>(k)];
    if (static_cast<Eigen::Index>(c.beta.size()) != static_cast<Eigen::Index>(data.p()))
      throw std::invalid_argument("component coefficient length differs from covariate dimension");
    const BaselineHazard& b = c.baseline;
    lp.col(k) = data.covariates() * c.beta;
    if (!cached || cached->event_times != b.event_times || cached->bandwidth != b.bandwidth ||
        cached->kernel != b.kernel) {
      kernels::parallel::kernel_matrix(event_times, b.event_times, b.bandwidth, b.kernel, weights);
      cached = &b;
    }
    const Eigen::Map<const Eigen::VectorXd> inc(b.increments.data(), static_cast<Eigen::Index>(b.increments.size()));
    const Eigen::VectorXd smooth = weights * inc;
    for (std::size_t e = 0; e < event_rows.size(); ++e) hazard(event_rows[e], k) = smooth[static_cast<Eigen::Index>(e)];
    std::vector<double> prefix(b.increments.size());
    std::partial_sum(b.increments.begin(), b.increments.end(), prefix.begin());
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto it = std::upper_bound(b.event_times.begin(), b.event_times.end(), data.time(static_cast<std::size_t>(i)));
      const auto count = static_cast<std::size_t>(it - b.event_times.begin());
      cumhaz(i, k) = count == 0 ? 0.0 : prefix[count - 1];
    }
  }
  Eigen::MatrixXd out;
  kernels::parallel::component_log_densities(data.statuses(), lp, hazard, cumhaz, out);
  return out;
}

namespace {
std::pair<ResponsibilityMatrix, Eigen::VectorXd> posterior(const Dataset& data, const MixtureParams& params,
                                                           std::size_t* degenerate = nullptr) {
  const Eigen::MatrixXd log_f = log_density_matrix(data, params);
  ResponsibilityMatrix s;
  Eigen::VectorXd marginal;
  const std::size_t bad = kernels::parallel::responsibilities(log_f, params.pi.array().log().matrix(), s, marginal);
  if (degenerate) *degenerate = bad;
  return {std::move(s), std::move(marginal)};
}
}  // namespace

ResponsibilityMatrix e_step(const Dataset& data, const MixtureParams& params) { return posterior(data, params).first; }

double observed_loglik(const Dataset& data, const MixtureParams& params) {
  return posterior(data, params).second.sum();
}

double penalized_observed_loglik(const Dataset& data, const MixtureParams& params, const PenaltySpec& spec) {
  return observed_loglik(data, params) - penalty_total(params.pi, spec, data.n());
}

double complete_data_loglik(const Dataset& data, const ResponsibilityMatrix& s, const MixtureParams& params) {
  const Eigen::MatrixXd log_f = log_density_matrix(data, params);
  if (s.rows() != log_f.rows() || s.cols() != log_f.cols()) throw std::invalid_argument("responsibility shape mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index k = 0; k < s.cols(); ++k)
      if (s(i, k) != 0.0) total += s(i, k) * (std::log(params.pi[k]) + log_f(i, k));
  return total;
}

double lla_surrogate(const Eigen::VectorXd& column_sums, const Eigen::VectorXd& pi, const Eigen::VectorXd& pi_prev,
                     const PenaltySpec& spec, std::size_t n) {
  double v = 0.0;
  for (Eigen::Index k = 0; k < pi.size(); ++k) {
    if (column_sums[k] > 0.0) v += column_sums[k] * std::log(pi[k]);
    v -= static_cast<double>(n) * spec.level * lla_coefficient(spec, pi_prev[k]) * pi[k];
  }
  return v;
}

Eigen::VectorXd update_mixing_proportions_closed_form(const ResponsibilityMatrix& s, const Eigen::VectorXd& pi_prev,
                                                      const PenaltySpec& spec, std::size_t n) {
  if (pi_prev.size() != s.cols()) throw std::invalid_argument("pi_prev length differs from responsibility columns");
  const Eigen::VectorXd col = column_sums(s);
  const double nn = static_cast<double>(n);
  Eigen::VectorXd g(pi_prev.size());
  for (Eigen::Index k = 0; k < g.size(); ++k) g[k] = spec.level == 0.0 ? 0.0 : lla_coefficient(spec, pi_prev[k]);
  const double base = nn - nn * spec.level * g.dot(pi_prev);
  Eigen::VectorXd pi(col.size());
  for (Eigen::Index k = 0; k < pi.size(); ++k) {
    const double denom = base + nn * spec.level * g[k];
    if (!(denom > 0.0)) {
      std::ostringstream os;
      os << "mixing-proportion update has a nonpositive denominator at level " << spec.level
         << " (tuning level too aggressive)";
      throw NumericalError(os.str());
    }
    pi[k] = col[k] / denom;
  }
  const double total = pi.sum();
  if (std::abs(total - 1.0) > 1e-12) pi /= total;
  return pi;
}

Eigen::VectorXd update_mixing_proportions(const ResponsibilityMatrix& s, const Eigen::VectorXd& pi_prev,
                                          const PenaltySpec& spec, std::size_t n) {
  if (pi_prev.size() != s.cols()) throw std::invalid_argument("pi_prev length differs from responsibility columns");
  const Eigen::VectorXd col = column_sums(s);
  const double nn = static_cast<double>(n);
  const double mass = col.sum();
  if (!(mass > 0.0)) throw NumericalError("responsibilities carry no mass");
  if (spec.level == 0.0) return col / mass;

  // Stationarity of the surrogate gives pi_k = col_k / (rho + c_k) with
  // c_k = n level g_k; rho is the root of sum_k pi_k(rho) = 1, which is
  // decreasing in rho on (-min c, inf).
  Eigen::VectorXd c(col.size());
  for (Eigen::Index k = 0; k < c.size(); ++k) c[k] = nn * spec.level * lla_coefficient(spec, pi_prev[k]);
  double c_min = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < c.size(); ++k)
    if (col[k] > 0.0) c_min = std::min(c_min, c[k]);

  auto total = [&](double rho, double* slope) {
    double t = 0.0, dt = 0.0;
    for (Eigen::Index k = 0; k < c.size(); ++k) {
      if (col[k] <= 0.0) continue;
      const double q = 1.0 / (rho + c[k]);
      t += col[k] * q;
      dt -= col[k] * q * q;
    }
    if (slope) *slope = dt;
    return t;
  };

  double lo = -c_min;
  double hi = mass - c_min;  // total(hi) <= mass / mass = 1
  double rho = nn - nn * spec.level * (c.array() / (nn * spec.level) * pi_prev.array()).sum();
  if (!(rho > lo && rho < hi)) rho = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double slope = 0.0;
    const double f = total(rho, &slope) - 1.0;
    if (f == 0.0) break;
    if (f > 0.0) lo = rho; else hi = rho;
    double next = rho - f / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == rho || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(rho))) {
      rho = next;
      break;
    }
    rho = next;
  }
  Eigen::VectorXd pi(col.size());
  for (Eigen::Index k = 0; k < pi.size(); ++k) pi[k] = col[k] > 0.0 ? col[k] / (rho + c[k]) : 0.0;
  return pi / pi.sum();
}

std::pair<MixtureParams, ResponsibilityMatrix> prune_components(MixtureParams params, ResponsibilityMatrix s,
                                                                double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("prune threshold must be > 0");
  if (s.cols() != params.pi.size()) throw std::invalid_argument("responsibility columns differ from component count");
  const auto keep = kept_columns(params.pi, threshold);
  if (keep.empty()) throw NumericalError("every mixing proportion is below the prune threshold");
  if (static_cast<Eigen::Index>(keep.size()) == params.pi.size()) return {std::move(params), std::move(s)};
  MixtureParams out;
  out.pi = select_entries(params.pi, keep);
  out.pi /= out.pi.sum();
  for (auto k : keep) out.components.push_back(std::move(params.components[static_cast<std::size_t>(k)]));
  ResponsibilityMatrix kept = select_columns(s, keep);
  for (Eigen::Index i = 0; i < kept.rows(); ++i) {
    const double row = kept.row(i).sum();
    if (row > 0.0) kept.row(i) /= row;
    else kept.row(i).setConstant(1.0 / static_cast<double>(kept.cols()));
  }
  return {std::move(out), std::move(kept)};
}

bool check_convergence(double loglik_curr, double loglik_prev, const EMConfig& config) {
  const double diff = std::abs(loglik_curr - loglik_prev);
  const bool absolute = diff < config.eps_abs;
  const bool relative = loglik_curr == 0.0 ? absolute : diff / std::abs(loglik_curr) < config.eps_rel;
  return absolute && relative;
}

FittedModel fit_mixture(const Dataset& data, const PenaltySpec& spec, const EMConfig& config,
                        const EMObserver& observer) {
  spec.validate();
  config.validate();
  if (static_cast<std::size_t>(config.k_init) > data.n()) throw std::invalid_argument("k_init exceeds the number of records");

  Dataset work = data;
  std::optional<Standardization> st;
  if (config.standardize && data.n() >= 2) {
    auto [z, s] = standardize_covariates(data);
    work = std::move(z);
    st = std::move(s);
  }
  const double h = config.bandwidth > 0.0 ? config.bandwidth : default_bandwidth(data);
  const Workspace ws(work, config.kernel, h);

  const int restarts = config.restarts;
  std::vector<std::optional<RestartResult>> results(static_cast<std::size_t>(restarts));
  std::vector<std::string> failures(static_cast<std::size_t>(restarts));
#pragma omp parallel for num_threads(config.workers) schedule(dynamic, 1)
  for (int r = 0; r < restarts; ++r) {
    try {
      results[static_cast<std::size_t>(r)] =
          run_restart(ws, spec, config, derive_seed(config.seed, static_cast<std::uint64_t>(r)), r, observer);
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(r)] = e.what();
    }
  }

  int best = -1;
  for (int r = 0; r < restarts; ++r) {
    const auto& res = results[static_cast<std::size_t>(r)];
    if (!res) continue;
    if (best < 0 || res->history.back() > results[static_cast<std::size_t>(best)]->history.back()) best = r;
  }
  if (best < 0) {
    std::ostringstream os;
    os << "all " << restarts << " restarts failed:";
    for (int r = 0; r < restarts; ++r) os << " [restart " << r << "] " << failures[static_cast<std::size_t>(r)] << ";";
    throw NumericalError(os.str());
  }
  RestartResult& win = *results[static_cast<std::size_t>(best)];

  FittedModel model;
  model.spec = spec;
  model.config = config;
  model.seed = config.seed;
  model.restart = best;
  model.iterations = win.iterations;
  model.converged = win.converged;
  model.history = std::move(win.history);
  model.warnings = std::move(win.warnings);
  for (int r = 0; r < restarts; ++r)
    if (!failures[static_cast<std::size_t>(r)].empty())
      model.warnings.push_back("restart " + std::to_string(r) + " failed: " + failures[static_cast<std::size_t>(r)]);

  const Eigen::Index K = win.pi.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return win.pi[a] > win.pi[b]; });

  model.params.pi = select_entries(win.pi, order);
  model.responsibilities = select_columns(win.s, order);
  for (auto k : order) {
    Eigen::VectorXd beta = win.beta.col(k);
    Eigen::VectorXd inc = win.inc.col(k);
    if (st) {
      beta = st->beta_to_original(beta);
      inc *= std::exp(-beta.dot(st->center));
    }
    ComponentFit c{std::move(beta), ws.baseline(inc), win.newton_converged[static_cast<std::size_t>(k)] != 0,
                   win.newton_iterations[static_cast<std::size_t>(k)]};
    model.params.components.push_back(std::move(c));
  }
  model.selected_K = static_cast<std::size_t>(K);
  for (Eigen::Index a = 0; a < K; ++a) {
    for (Eigen::Index b = a + 1; b < K; ++b) {
      const auto& ba = model.params.components[static_cast<std::size_t>(a)].beta;
      const auto& bb = model.params.components[static_cast<std::size_t>(b)].beta;
      if (ba.size() == 0 || (ba - bb).cwiseAbs().maxCoeff() < 1e-6) {
        if (ba.size() == 0 && K == 1) continue;
        model.components_distinct = false;
      }
    }
  }
  if (!model.components_distinct) model.warnings.push_back("two or more components share coefficient vectors");
  return model;
}

}  // namespace coxmix
