#pragma once

// Data-parallel inner loops shared by the EM engine and the tdROC evaluator.
//
// Every kernel exists twice: `serial::` is the plain reference loop kept for
// testing and benchmarking, `parallel::` is the OpenMP version used by the
// library. Each output element is produced by exactly one thread with the
// same operation order as the serial loop, so both produce bit-identical
// results for any thread count.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace coxmix {

enum class KernelKind { Gaussian, Epanechnikov };

std::string_view to_string(KernelKind kind);
KernelKind parse_kernel_kind(std::string_view name);

// Unit-bandwidth kernel K(u).
inline double kernel_value(KernelKind kind, double u) {
  if (kind == KernelKind::Gaussian) return 0.39894228040143267794 * std::exp(-0.5 * u * u);
  const double a = 1.0 - u * u;
  return a > 0.0 ? 0.75 * a : 0.0;
}

// Event-time mass that a kernel-weighted Kaplan-Meier sweep needs: records
// sorted by time, grouped into distinct-time blocks.
struct SurvivalSweep {
  std::vector<std::size_t> order;        // record indices by ascending time
  std::vector<std::size_t> group_begin;  // size groups + 1, offsets into order
  std::vector<double> group_time;
  std::vector<char> group_has_event;

  static SurvivalSweep build(std::span<const double> time, std::span<const int> status);
  std::size_t groups() const { return group_time.size(); }
};

namespace kernels {

namespace serial {

// out(a, b) = K((rows[a] - cols[b]) / h) / h
void kernel_matrix(std::span<const double> rows, std::span<const double> cols, double h, KernelKind kind,
                   Eigen::MatrixXd& out);

// out(i, k) = status_i (log max(hazard(i,k), floor) + lp(i,k)) - exp(lp(i,k)) cumhaz(i,k)
void component_log_densities(std::span<const int> status, const Eigen::MatrixXd& lp,
                             const Eigen::MatrixXd& hazard, const Eigen::MatrixXd& cumhaz,
                             Eigen::MatrixXd& out);

// Row-wise posterior membership from log densities and log mixing weights.
// row_log_marginal(i) = log sum_k exp(log_pi(k) + log_f(i,k)). Rows whose
// terms are all -inf become uniform; the return value counts them.
std::size_t responsibilities(const Eigen::MatrixXd& log_f, const Eigen::VectorXd& log_pi,
                             Eigen::MatrixXd& s, Eigen::VectorXd& row_log_marginal);

// Kernel-weighted Kaplan-Meier. For each subject i the records are weighted
// by K((marker_j - marker_i) / h) and out(i, q) is the weighted product-limit
// survival at queries(i, q). h = +inf gives unit weights. Returns the number
// of (subject, event time) factors skipped because the weighted risk set was
// empty.
std::size_t conditional_survival(const SurvivalSweep& sweep, std::span<const int> status,
                                 std::span<const double> marker, double h, KernelKind kind,
                                 const Eigen::MatrixXd& queries, Eigen::MatrixXd& out);

}  // namespace serial

namespace parallel {

void kernel_matrix(std::span<const double> rows, std::span<const double> cols, double h, KernelKind kind,
                   Eigen::MatrixXd& out);
void component_log_densities(std::span<const int> status, const Eigen::MatrixXd& lp,
                             const Eigen::MatrixXd& hazard, const Eigen::MatrixXd& cumhaz,
                             Eigen::MatrixXd& out);
std::size_t responsibilities(const Eigen::MatrixXd& log_f, const Eigen::VectorXd& log_pi,
                             Eigen::MatrixXd& s, Eigen::VectorXd& row_log_marginal);
std::size_t conditional_survival(const SurvivalSweep& sweep, std::span<const int> status,
                                 std::span<const double> marker, double h, KernelKind kind,
                                 const Eigen::MatrixXd& queries, Eigen::MatrixXd& out);

}  // namespace parallel

inline constexpr double kLogHazardFloor = -690.77552789821368;  // log(1e-300)

}  // namespace kernels
}  // namespace coxmix
