#pragma once

#include "coxmix/data.hpp"
#include "coxmix/em.hpp"
#include "coxmix/kernels.hpp"

#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace coxmix {

enum class MarkerMode { External, CoxLinearPredictor, MixturePosteriorLp, MixtureEventProb };

std::string_view to_string(MarkerMode mode);
MarkerMode parse_marker_mode(std::string_view name);

struct MarkerSet {
  std::vector<double> markers;
  MarkerMode source = MarkerMode::External;
};

struct WeightVector {
  double t = 0.0;
  std::vector<double> weights;
  std::size_t warnings = 0;  // scenario-4 subjects with zero conditional survival at Y_i
};

struct RocPoint {
  double threshold = 0.0;
  double sensitivity = 0.0;
  double one_minus_specificity = 0.0;
};

struct RocCurve {
  double t = 0.0;
  std::vector<RocPoint> points;  // threshold +inf first, -inf last
  double auc = 0.0;
};

// MixtureEventProb needs t: 1 - sum_k pi_k exp(-exp(b_k'x) Lambda_k(t)).
MarkerSet compute_marker(const MixtureParams& params, const Dataset& data, MarkerMode mode,
                         std::optional<double> t = std::nullopt);

// 1.06 sd(M) n^(-1/5); 1 when the markers are constant.
double default_marker_bandwidth(std::span<const double> markers);

// Kernel-weighted Kaplan-Meier S_h(t | M_i) with risk sets {j : Y_j >= s}.
// h = +inf gives the ordinary Kaplan-Meier estimate.
double conditional_survival(const MarkerSet& markers, const Dataset& data, double h, double t, std::size_t i,
                            KernelKind kind = KernelKind::Gaussian);

WeightVector censoring_weights(const MarkerSet& markers, const Dataset& data, double t, double h,
                               KernelKind kind = KernelKind::Gaussian);

// (sensitivity, specificity) at threshold c: cases M > c, controls M <= c.
std::pair<double, double> sensitivity_specificity(const MarkerSet& markers, const WeightVector& weights, double c);

RocCurve roc_curve(const MarkerSet& markers, const WeightVector& weights);

// Trapezoidal area under (1 - specificity, sensitivity).
double auc(const RocCurve& curve);

}  // namespace coxmix
