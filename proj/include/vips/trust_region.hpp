#pragma once

#include <optional>
#include <utility>

#include "vips/gaussian.hpp"
#include "vips/surrogate.hpp"

namespace vips {

/// Dual of the KL-constrained, entropy-regularized Gaussian update.
/// The update interpolates natural parameters between the current
/// component (weight eta / (eta + 1)) and the surrogate coefficients
/// (weight 1 / (eta + 1)); eta is the step-size multiplier of the KL
/// constraint KL(new || current) <= epsilon.
struct DualProblem {
  Gaussian current;
  QuadraticSurrogate surrogate;
  double epsilon = 1.0;
  double eta_min = 0.0;  // smallest eta with positive-definite Q(eta), plus margin

  DualProblem(Gaussian cur, QuadraticSurrogate sur, double eps);
};

/// Convex combination of natural parameters at step size eta; no
/// factorization is performed.
std::pair<Matrix, Vector> interpolate_natural(double eta, const DualProblem& dp);

/// Dual value G(eta) and its derivative dG = epsilon - KL(q_eta || current).
/// Throws gaussian_error if Q(eta) is not positive definite.
std::pair<double, double> dual_value_and_gradient(double eta, const DualProblem& dp);

/// Thrown when no feasible step exists (no eta <= 1e10 makes Q(eta) PD).
class update_rejected : public std::runtime_error {
 public:
  explicit update_rejected(const std::string& what) : std::runtime_error(what) {}
};

/// Trust-region update of a single Gaussian under a quadratic surrogate:
/// returns the interpolated Gaussian at eta* where eta* is eta_min when the
/// unconstrained update already satisfies KL <= epsilon, and otherwise the
/// root of dG(eta) = 0 so that the constraint is active.
Gaussian gva_update(const Gaussian& current, const QuadraticSurrogate& surrogate,
                    double epsilon);

inline constexpr double kEpsilonMin = 1e-2;
inline constexpr double kEpsilonMax = 5.0;
inline constexpr double kEtaMax = 1e10;

/// Per-component KL bound adaptation: x1.1 on improvement, x0.8 otherwise,
/// clamped to [lo, hi].
double adapt_kl_bound(double epsilon_o, bool improved, double lo = kEpsilonMin,
                      double hi = kEpsilonMax);

}  // namespace vips
