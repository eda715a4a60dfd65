#pragma once

#include <string>
#include <string_view>

namespace coxmix {

enum class PenaltyKind { LS, SCAD, MCP };

std::string_view to_string(PenaltyKind kind);
PenaltyKind parse_penalty_kind(std::string_view name);  // "ls" | "scad" | "mcp", case-insensitive

/// Penalty on a mixing proportion.
///
/// `level` is the tuning level (rho for LS, kappa for SCAD, alpha for MCP)
/// and multiplies the log-scale term in the objective. `shape` is a for SCAD
/// and b for MCP. `epsilon` is the floor inside the logarithm and
/// `prune_threshold` the cutoff below which a component is deleted.
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::SCAD;
  double level = 0.0;
  double shape = 3.7;
  double epsilon = 1e-4;
  double prune_threshold = 1e-5;

  static PenaltySpec ls(double level);
  static PenaltySpec scad(double level, double a = 3.7);
  static PenaltySpec mcp(double level, double b = 3.0);

  void validate() const;  // throws std::invalid_argument
};

double default_shape(PenaltyKind kind);

// p'(pi) for SCAD/MCP. SCAD uses the normalized derivative
// I(pi <= k) + (a k - pi)_+ / ((a - 1) k) I(pi > k); MCP uses (alpha - pi/b)_+.
double penalty_derivative(const PenaltySpec& spec, double pi);

// p(pi) = integral of penalty_derivative from 0 to pi.
double penalty_value(const PenaltySpec& spec, double pi);

// log(eps + p(pi)) - log(eps); LS uses p(pi) = pi.
double log_scale_term(const PenaltySpec& spec, double pi);

// Slope of the log-scale term at pi0: p'(pi0) / (eps + p(pi0)).
double lla_coefficient(const PenaltySpec& spec, double pi0);

}  // namespace coxmix
