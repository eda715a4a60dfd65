#include "coxmix/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace coxmix {

std::string_view to_string(KernelKind kind) {
  return kind == KernelKind::Gaussian ? "gaussian" : "epanechnikov";
}

KernelKind parse_kernel_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "gaussian") return KernelKind::Gaussian;
  if (lower == "epanechnikov") return KernelKind::Epanechnikov;
  throw std::invalid_argument("unknown kernel '" + std::string(name) + "'");
}

SurvivalSweep SurvivalSweep::build(std::span<const double> time, std::span<const int> status) {
  SurvivalSweep sw;
  sw.order.resize(time.size());
  std::iota(sw.order.begin(), sw.order.end(), std::size_t{0});
  std::stable_sort(sw.order.begin(), sw.order.end(), [&](std::size_t a, std::size_t b) { return time[a] < time[b]; });
  for (std::size_t pos = 0; pos < sw.order.size(); ++pos) {
    const double t = time[sw.order[pos]];
    if (pos == 0 || t != sw.group_time.back()) {
      sw.group_begin.push_back(pos);
      sw.group_time.push_back(t);
      sw.group_has_event.push_back(0);
    }
    if (status[sw.order[pos]] == 1) sw.group_has_event.back() = 1;
  }
  sw.group_begin.push_back(sw.order.size());
  return sw;
}

namespace kernels {

namespace detail {

// Shared by both variants: one subject's weighted product-limit curve.
std::size_t conditional_survival_row(const SurvivalSweep& sweep, std::span<const int> status,
                                     std::span<const double> marker, double h, KernelKind kind,
                                     std::size_t i, const Eigen::MatrixXd& queries, Eigen::MatrixXd& out,
                                     std::vector<double>& group_weight, std::vector<double>& group_event,
                                     std::vector<double>& curve) {
  const std::size_t groups = sweep.groups();
  group_weight.assign(groups, 0.0);
  group_event.assign(groups, 0.0);
  curve.assign(groups, 1.0);
  const double mi = marker[i];
  const bool flat = std::isinf(h);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t pos = sweep.group_begin[g]; pos < sweep.group_begin[g + 1]; ++pos) {
      const std::size_t j = sweep.order[pos];
      const double w = flat ? 1.0 : kernel_value(kind, (marker[j] - mi) / h);
      group_weight[g] += w;
      if (status[j] == 1) group_event[g] += w;
    }
  }
  std::size_t skipped = 0;
  double at_risk = 0.0;
  // suffix sums give the weighted risk set {j : Y_j >= s}
  for (std::size_t g = groups; g-- > 0;) {
    at_risk += group_weight[g];
    group_weight[g] = at_risk;
  }
  double s = 1.0;
  for (std::size_t g = 0; g < groups; ++g) {
    if (sweep.group_has_event[g]) {
      if (group_weight[g] > 0.0) {
        s *= 1.0 - group_event[g] / group_weight[g];
      } else {
        ++skipped;
      }
    }
    curve[g] = s;
  }
  for (Eigen::Index q = 0; q < queries.cols(); ++q) {
    const double t = queries(static_cast<Eigen::Index>(i), q);
    auto it = std::upper_bound(sweep.group_time.begin(), sweep.group_time.end(), t);
    out(static_cast<Eigen::Index>(i), q) =
        it == sweep.group_time.begin() ? 1.0 : curve[static_cast<std::size_t>(it - sweep.group_time.begin()) - 1];
  }
  return skipped;
}

}  // namespace detail

namespace serial {

void kernel_matrix(std::span<const double> rows, std::span<const double> cols, double h, KernelKind kind,
                   Eigen::MatrixXd& out) {
  out.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b)
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = kernel_value(kind, (rows[a] - cols[b]) / h) / h;
}

void component_log_densities(std::span<const int> status, const Eigen::MatrixXd& lp,
                             const Eigen::MatrixXd& hazard, const Eigen::MatrixXd& cumhaz,
                             Eigen::MatrixXd& out) {
  out.resize(lp.rows(), lp.cols());
  for (Eigen::Index i = 0; i < lp.rows(); ++i) {
    for (Eigen::Index k = 0; k < lp.cols(); ++k) {
      double v = -std::exp(lp(i, k)) * cumhaz(i, k);
      if (status[static_cast<std::size_t>(i)] == 1) {
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
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < K; ++k) m = std::max(m, log_pi[k] + log_f(i, k));
    if (!std::isfinite(m)) {
      s.row(i).setConstant(1.0 / static_cast<double>(K));
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
  std::vector<double> gw, ge, curve;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < marker.size(); ++i)
    skipped += detail::conditional_survival_row(sweep, status, marker, h, kind, i, queries, out, gw, ge, curve);
  return skipped;
}

}  // namespace serial
}  // namespace kernels
}  // namespace coxmix
