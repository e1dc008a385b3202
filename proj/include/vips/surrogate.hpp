#pragma once

#include <optional>

#include "vips/gaussian.hpp"

namespace vips {

/// Local quadratic reward model f(x) = -1/2 x^T R x + x^T r + offset.
/// R is symmetric; the offset is fit but ignored by consumers.
struct QuadraticSurrogate {
  Matrix R;
  Vector r;
  double offset = 0.0;
};

/// Ridge coefficient state for the weighted least-squares fit.
struct RidgeState {
  double kappa = 1e-10;
};

inline constexpr double kKappaMin = 1e-14;
inline constexpr double kKappaMax = 1e-6;

/// Feature map (1, x_1..x_D, x_i x_j for i <= j); length 1 + D + D(D+1)/2.
/// Off-diagonal products appear once (i < j).
Vector quadratic_features(const Eigen::Ref<const Vector>& x);

/// Number of quadratic features for dimension d.
int feature_count(int d);

/// Importance-weighted ridge regression of a quadratic on (X, y).
/// The regression runs in whitened coordinates z = L^-1 (x - mean) of the
/// component being updated, and the coefficients are mapped back to the
/// original space. kappa penalizes all features except the constant.
/// Returns nullopt when the normal-equations factorization fails or
/// produces non-finite coefficients; the caller adapts kappa and retries.
std::optional<QuadraticSurrogate> fit_weighted_quadratic(
    const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
    const Eigen::Ref<const Vector>& weights, double kappa,
    const Gaussian& whitener);

/// kappa x10 on failure, /2 on success, clamped to [lo, hi].
RidgeState adapt_ridge(RidgeState state, bool fit_succeeded,
                       double lo = kKappaMin, double hi = kKappaMax);

}  // namespace vips
