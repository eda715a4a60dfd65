#include "coxmix/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <limits>

namespace coxmix::kernels {

namespace detail {
std::size_t conditional_survival_row(const SurvivalSweep& sweep, std::span<const int> status,
                                     std::span<const double> marker, double h, KernelKind kind,
                                     std::size_t i, const Eigen::MatrixXd& queries, Eigen::MatrixXd& out,
                                     std::vector<double>& group_weight, std::vector<double>& group_event,
                                     std::vector<double>& curve);
}

namespace parallel {

void kernel_matrix(std::span<const double> rows, std::span<const double> cols, double h, KernelKind kind,
                   Eigen::MatrixXd& out) {
  const auto nr = static_cast<std::ptrdiff_t>(rows.size());
  const auto nc = static_cast<Eigen::Index>(cols.size());
  out.resize(nr, nc);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t a = 0; a < nr; ++a) {
    const double ra = rows[static_cast<std::size_t>(a)];
    for (Eigen::Index b = 0; b < nc; ++b)
      out(a, b) = kernel_value(kind, (ra - cols[static_cast<std::size_t>(b)]) / h) / h;
  }
}

void component_log_densities(std::span<const int> status, const Eigen::MatrixXd& lp,
                             const Eigen::MatrixXd& hazard, const Eigen::MatrixXd& cumhaz,
                             Eigen::MatrixXd& out) {
  const Eigen::Index n = lp.rows();
  const Eigen::Index K = lp.cols();
  out.resize(n, K);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool event = status[static_cast<std::size_t>(i)] == 1;
    for (Eigen::Index k = 0; k < K; ++k) {
      double v = -std::exp(lp(i, k)) * cumhaz(i, k);
      if (event) {
        const double hz = hazard(i, k);
        v += (hz > 1e-300 ? std::log(hz) : kLogHazardFloor) + lp(i, k);
      }
      out(i, k) = v;
    }
  }
}

std::size_t responsibilities(const Eigen::MatrixXd& log_f, const Eigen::VectorXd& log_pi,
                             Eigen::MatrixXd& s, Eigen::VectorXd& row_log_marginal) {
  const Eigen::Index n = log_f.rows();
  const Eigen::Index K = log_f.cols();
  s.resize(n, K);
  row_log_marginal.resize(n);
  std::size_t degenerate = 0;
#pragma omp parallel for schedule(static) reduction(+ : degenerate)
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < K; ++k) m = std::max(m, log_pi[k] + log_f(i, k));
    if (!std::isfinite(m)) {
      for (Eigen::Index k = 0; k < K; ++k) s(i, k) = 1.0 / static_cast<double>(K);
      row_log_marginal[i] = m;
      ++degenerate;
      continue;
    }
    double total = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      const double e = std::exp(log_pi[k] + log_f(i, k) - m);
      s(i, k) = e;
      total += e;
    }
    for (Eigen::Index k = 0; k < K; ++k) s(i, k) /= total;
    row_log_marginal[i] = m + std::log(total);
  }
  return degenerate;
}

std::size_t conditional_survival(const SurvivalSweep& sweep, std::span<const int> status,
                                 std::span<const double> marker, double h, KernelKind kind,
                                 const Eigen::MatrixXd& queries, Eigen::MatrixXd& out) {
  out.resize(queries.rows(), queries.cols());
  const auto n = static_cast<std::ptrdiff_t>(marker.size());
  std::size_t skipped = 0;
#pragma omp parallel reduction(+ : skipped)
  {
    std::vector<double> gw, ge, curve;
#pragma omp for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i)
      skipped += detail::conditional_survival_row(sweep, status, marker, h, kind, static_cast<std::size_t>(i),
                                                  queries, out, gw, ge, curve);
  }
  return skipped;
}

}  // namespace parallel
}  // namespace coxmix::kernels
