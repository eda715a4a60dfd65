#include "coxmix/penalty.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

namespace coxmix {

std::string_view to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::LS: return "ls";
    case PenaltyKind::SCAD: return "scad";
    case PenaltyKind::MCP: return "mcp";
  }
  return "?";
}

PenaltyKind parse_penalty_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "ls") return PenaltyKind::LS;
  if (lower == "scad") return PenaltyKind::SCAD;
  if (lower == "mcp") return PenaltyKind::MCP;
  throw std::invalid_argument("unknown penalty '" + std::string(name) + "' (expected ls, scad or mcp)");
}

double default_shape(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::SCAD: return 3.7;
    case PenaltyKind::MCP: return 3.0;
    case PenaltyKind::LS: return 0.0;
  }
  return 0.0;
}

PenaltySpec PenaltySpec::ls(double level) { return {PenaltyKind::LS, level, 0.0}; }
PenaltySpec PenaltySpec::scad(double level, double a) { return {PenaltyKind::SCAD, level, a}; }
PenaltySpec PenaltySpec::mcp(double level, double b) { return {PenaltyKind::MCP, level, b}; }

void PenaltySpec::validate() const {
  if (!(level >= 0.0) || !std::isfinite(level)) throw std::invalid_argument("penalty level must be finite and >= 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("penalty epsilon must be > 0");
  if (!(prune_threshold > 0.0)) throw std::invalid_argument("prune threshold must be > 0");
  if (kind == PenaltyKind::SCAD && !(shape > 2.0)) throw std::invalid_argument("SCAD shape a must exceed 2");
  if (kind == PenaltyKind::MCP && !(shape > 1.0)) throw std::invalid_argument("MCP shape b must exceed 1");
}

namespace {

void require_folded_concave(const PenaltySpec& spec, const char* op) {
  if (spec.kind == PenaltyKind::LS)
    throw std::invalid_argument(std::string(op) + " is not defined for the LS penalty");
}

void require_unit_interval(double pi) {
  if (!(pi >= 0.0 && pi <= 1.0)) throw std::invalid_argument("mixing proportion must lie in [0, 1]");
}

}  // namespace

double penalty_derivative(const PenaltySpec& spec, double pi) {
  require_folded_concave(spec, "penalty_derivative");
  require_unit_interval(pi);
  const double level = spec.level;
  if (spec.kind == PenaltyKind::SCAD) {
    const double a = spec.shape;
    if (pi <= level) return 1.0;
    if (level == 0.0) return 0.0;
    return std::max(0.0, a * level - pi) / ((a - 1.0) * level);
  }
  const double b = spec.shape;
  if (pi > b * level) return 0.0;
  return std::max(0.0, level - pi / b);
}

double penalty_value(const PenaltySpec& spec, double pi) {
  require_folded_concave(spec, "penalty_value");
  require_unit_interval(pi);
  const double level = spec.level;
  if (spec.kind == PenaltyKind::SCAD) {
    const double a = spec.shape;
    if (pi <= level) return pi;
    const double tail = (a + 1.0) * level / 2.0;
    if (pi <= a * level) return std::min(tail, (2.0 * a * level * pi - pi * pi - level * level) / (2.0 * (a - 1.0) * level));
    return tail;
  }
  const double b = spec.shape;
  const double tail = level * level * b / 2.0;
  if (pi <= b * level) return std::min(tail, level * pi - pi * pi / (2.0 * b));
  return tail;
}

double log_scale_term(const PenaltySpec& spec, double pi) {
  require_unit_interval(pi);
  const double p = spec.kind == PenaltyKind::LS ? pi : penalty_value(spec, pi);
  return std::log1p(p / spec.epsilon);
}

double lla_coefficient(const PenaltySpec& spec, double pi0) {
  require_unit_interval(pi0);
  if (spec.kind == PenaltyKind::LS) return 1.0 / (spec.epsilon + pi0);
  return penalty_derivative(spec, pi0) / (spec.epsilon + penalty_value(spec, pi0));
}

}  // namespace coxmix
