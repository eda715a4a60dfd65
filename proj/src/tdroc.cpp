#include "coxmix/tdroc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace coxmix {

std::string_view to_string(MarkerMode mode) {
  switch (mode) {
    case MarkerMode::External: return "external";
    case MarkerMode::CoxLinearPredictor: return "cox_linear_predictor";
    case MarkerMode::MixturePosteriorLp: return "mixture_posterior_lp";
    case MarkerMode::MixtureEventProb: return "mixture_event_prob";
  }
  return "external";
}

MarkerMode parse_marker_mode(std::string_view name) {
  for (MarkerMode m : {MarkerMode::External, MarkerMode::CoxLinearPredictor, MarkerMode::MixturePosteriorLp,
                       MarkerMode::MixtureEventProb})
    if (name == to_string(m)) return m;
  throw std::invalid_argument("unknown marker mode '" + std::string(name) + "'");
}

MarkerSet compute_marker(const MixtureParams& params, const Dataset& data, MarkerMode mode, std::optional<double> t) {
  const std::size_t K = params.K();
  if (K == 0) throw std::invalid_argument("model has no components");
  for (const auto& c : params.components)
    if (static_cast<std::size_t>(c.beta.size()) != data.p())
      throw std::invalid_argument("model coefficient length differs from the data's covariate count");
  const Eigen::Index n = static_cast<Eigen::Index>(data.n());
  MarkerSet out;
  out.source = mode;
  out.markers.resize(data.n());
  Eigen::MatrixXd lp(n, static_cast<Eigen::Index>(K));
  for (std::size_t k = 0; k < K; ++k) lp.col(static_cast<Eigen::Index>(k)) = data.covariates() * params.components[k].beta;

  switch (mode) {
    case MarkerMode::External:
      throw std::invalid_argument("external markers are supplied by the caller, not computed from a model");
    case MarkerMode::CoxLinearPredictor:
      if (K != 1)
        throw std::invalid_argument("cox_linear_predictor needs a single-component model; use mixture_event_prob or "
                                    "mixture_posterior_lp for K > 1");
      for (Eigen::Index i = 0; i < n; ++i) out.markers[static_cast<std::size_t>(i)] = lp(i, 0);
      break;
    case MarkerMode::MixturePosteriorLp: {
      const ResponsibilityMatrix s = e_step(data, params);
      for (Eigen::Index i = 0; i < n; ++i) out.markers[static_cast<std::size_t>(i)] = s.row(i).dot(lp.row(i));
      break;
    }
    case MarkerMode::MixtureEventProb: {
      if (!t) throw std::invalid_argument("mixture_event_prob needs an evaluation time");
      std::vector<double> cum(K);
      for (std::size_t k = 0; k < K; ++k) cum[k] = cumulative_hazard(params.components[k].baseline, *t);
      for (Eigen::Index i = 0; i < n; ++i) {
        double surv = 0.0;
        for (std::size_t k = 0; k < K; ++k)
          surv += params.pi[static_cast<Eigen::Index>(k)] * std::exp(-std::exp(lp(i, static_cast<Eigen::Index>(k))) * cum[k]);
        out.markers[static_cast<std::size_t>(i)] = 1.0 - surv;
      }
      break;
    }
  }
  for (double m : out.markers)
    if (!std::isfinite(m)) throw std::invalid_argument("computed marker is not finite");
  return out;
}

double default_marker_bandwidth(std::span<const double> markers) {
  const std::size_t n = markers.size();
  if (n < 2) return 1.0;
  double mean = 0.0;
  for (double m : markers) mean += m;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double m : markers) ss += (m - mean) * (m - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return sd > 0.0 ? 1.06 * sd * std::pow(static_cast<double>(n), -0.2) : 1.0;
}

namespace {

void check_inputs(const MarkerSet& markers, const Dataset& data, double h) {
  if (markers.markers.size() != data.n()) throw std::invalid_argument("marker count differs from record count");
  for (double m : markers.markers)
    if (!std::isfinite(m)) throw std::invalid_argument("markers must be finite");
  if (!(h > 0.0)) throw std::invalid_argument("marker bandwidth must be > 0");
}

SurvivalSweep sweep_for(const Dataset& data) {
  const auto& y = data.times();
  return SurvivalSweep::build(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())), data.statuses());
}

}  // namespace

double conditional_survival(const MarkerSet& markers, const Dataset& data, double h, double t, std::size_t i,
                            KernelKind kind) {
  check_inputs(markers, data, h);
  if (i >= data.n()) throw std::out_of_range("subject index out of range");
  const std::vector<double>& m = markers.markers;
  const bool flat = std::isinf(h);
  std::vector<double> w(data.n());
  for (std::size_t j = 0; j < data.n(); ++j) w[j] = flat ? 1.0 : kernel_value(kind, (m[j] - m[i]) / h);
  std::vector<double> event_times;
  for (std::size_t j = 0; j < data.n(); ++j)
    if (data.status(j) == 1 && data.time(j) <= t) event_times.push_back(data.time(j));
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());
  double s = 1.0;
  for (double u : event_times) {
    double at_risk = 0.0, events = 0.0;
    for (std::size_t j = 0; j < data.n(); ++j) {
      if (data.time(j) >= u) at_risk += w[j];
      if (data.time(j) == u && data.status(j) == 1) events += w[j];
    }
    if (at_risk > 0.0) s *= 1.0 - events / at_risk;
  }
  return s;
}

WeightVector censoring_weights(const MarkerSet& markers, const Dataset& data, double t, double h, KernelKind kind) {
  check_inputs(markers, data, h);
  const Eigen::Index n = static_cast<Eigen::Index>(data.n());
  WeightVector w;
  w.t = t;
  w.weights.assign(data.n(), 0.0);
  bool need_survival = false;
  for (std::size_t i = 0; i < data.n(); ++i) need_survival |= data.status(i) == 0 && data.time(i) < t;

  Eigen::MatrixXd surv;
  if (need_survival) {
    Eigen::MatrixXd queries(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      queries(i, 0) = t;
      queries(i, 1) = data.time(static_cast<std::size_t>(i));
    }
    kernels::parallel::conditional_survival(sweep_for(data), data.statuses(), markers.markers, h, kind, queries, surv);
  }
  for (std::size_t i = 0; i < data.n(); ++i) {
    const double y = data.time(i);
    if (y > t) continue;
    if (data.status(i) == 1) {
      w.weights[i] = 1.0;
    } else if (y < t) {
      const double s_t = surv(static_cast<Eigen::Index>(i), 0);
      const double s_y = surv(static_cast<Eigen::Index>(i), 1);
      if (s_y > 0.0) {
        w.weights[i] = std::clamp(1.0 - s_t / s_y, 0.0, 1.0);
      } else {
        w.weights[i] = 1.0;
        ++w.warnings;
      }
    }
  }
  return w;
}

namespace {

struct Masses {
  double cases = 0.0;
  double controls = 0.0;
};

Masses masses(const MarkerSet& markers, const WeightVector& weights) {
  if (weights.weights.size() != markers.markers.size()) throw std::invalid_argument("weight count differs from marker count");
  Masses m;
  for (double w : weights.weights) {
    m.cases += w;
    m.controls += 1.0 - w;
  }
  if (!(m.cases > 0.0)) throw std::domain_error("sensitivity undefined: no case mass at t = " + std::to_string(weights.t));
  if (!(m.controls > 0.0))
    throw std::domain_error("specificity undefined: no control mass at t = " + std::to_string(weights.t));
  return m;
}

}  // namespace

std::pair<double, double> sensitivity_specificity(const MarkerSet& markers, const WeightVector& weights, double c) {
  const Masses total = masses(markers, weights);
  double tp = 0.0, tn = 0.0;
  for (std::size_t i = 0; i < markers.markers.size(); ++i) {
    const double w = weights.weights[i];
    if (markers.markers[i] > c) tp += w;
    else tn += 1.0 - w;
  }
  return {tp / total.cases, tn / total.controls};
}

RocCurve roc_curve(const MarkerSet& markers, const WeightVector& weights) {
  const Masses total = masses(markers, weights);
  const std::size_t n = markers.markers.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return markers.markers[a] > markers.markers[b]; });

  RocCurve curve;
  curve.t = weights.t;
  const double inf = std::numeric_limits<double>::infinity();
  curve.points.push_back({inf, 0.0, 0.0});
  // lowering the threshold to a distinct marker value moves its whole tie
  // block (M > c fails at c = value) into the positives at the next step, so
  // the point at threshold v counts markers strictly above v
  double tp = 0.0, fp = 0.0;
  std::size_t pos = 0;
  while (pos < n) {
    const double v = markers.markers[order[pos]];
    curve.points.push_back({v, tp / total.cases, fp / total.controls});
    while (pos < n && markers.markers[order[pos]] == v) {
      tp += weights.weights[order[pos]];
      fp += 1.0 - weights.weights[order[pos]];
      ++pos;
    }
  }
  curve.points.push_back({-inf, 1.0, 1.0});
  curve.auc = auc(curve);
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const RocPoint& a = curve.points[i - 1];
    const RocPoint& b = curve.points[i];
    area += (b.one_minus_specificity - a.one_minus_specificity) * 0.5 * (a.sensitivity + b.sensitivity);
  }
  return std::clamp(area, 0.0, 1.0);
}

}  // namespace coxmix
