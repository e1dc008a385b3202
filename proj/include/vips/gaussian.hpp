#pragma once

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace vips {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Thrown when a Gaussian cannot be constructed from the given parameters
/// (asymmetric or indefinite covariance, infeasible natural parameters).
class gaussian_error : public std::runtime_error {
 public:
  explicit gaussian_error(const std::string& what) : std::runtime_error(what) {}
};

/// Immutable full-covariance multivariate normal, kept in both moment
/// (mean, covariance) and natural (precision, shift) form with a cached
/// Cholesky factor. Values are safe to share across concurrent readers.
class Gaussian {
 public:
  /// Relative Frobenius tolerance below which a covariance is symmetrized
  /// as (S + S^T)/2 instead of being rejected.
  static constexpr double kSymmetryTol = 1e-10;

  Gaussian(Vector mean, Matrix covariance);

  /// Construct from natural parameters: covariance = Q^-1, mean = Q^-1 q.
  static Gaussian from_natural(const Matrix& precision, const Vector& shift);

  /// Non-throwing variant used by callers that treat an indefinite
  /// interpolated precision as a recoverable condition.
  static std::optional<Gaussian> try_from_natural(const Matrix& precision,
                                                  const Vector& shift);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }
  const Matrix& chol() const { return chol_; }
  const Matrix& precision() const { return precision_; }
  const Vector& shift() const { return shift_; }
  double log_det_cov() const { return log_det_cov_; }

  /// Batched log N(x; mean, covariance), one value per row of X.
  /// The quadratic form goes through the cached Cholesky factor.
  Vector log_density(const Eigen::Ref<const Matrix>& X) const;

  /// Log density at a single point.
  double log_density_at(const Eigen::Ref<const Vector>& x) const;

  /// Draw n samples as rows: x = mean + L z with z standard normal.
  Matrix sample(int n, Rng& rng) const;

  /// Differential entropy 0.5 * log|2 pi e covariance|.
  double entropy() const;

  bool same_parameters(const Gaussian& other) const;

 private:
  Gaussian() = default;

  Vector mean_;
  Matrix covariance_;
  Matrix chol_;       // lower triangular, covariance = chol chol^T
  Matrix precision_;  // Q = covariance^-1
  Vector shift_;      // q = Q mean
  double log_det_cov_ = 0.0;
};

/// Closed-form KL(g1 || g2); both must have equal dimension.
double kl_divergence(const Gaussian& g1, const Gaussian& g2);

/// Scale factor c such that a Gaussian with covariance c * covariance has
/// entropy target_entropy: c = exp((2 H - log|2 pi e S|) / n).
double scale_to_entropy(const Matrix& covariance, double target_entropy);

/// Row-wise log-sum-exp, max-shifted.
double log_sum_exp(const Eigen::Ref<const Vector>& v);

}  // namespace vips
