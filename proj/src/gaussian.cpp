#include "vips/gaussian.hpp"

#include <cmath>
#include <numbers>

namespace vips {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

Matrix symmetrize_or_throw(const Matrix& cov) {
  const double scale = cov.norm();
  const double asym = (cov - cov.transpose()).norm();
  if (asym > Gaussian::kSymmetryTol * std::max(scale, 1e-300)) {
    throw gaussian_error("covariance is not symmetric (relative asymmetry " +
                         std::to_string(asym / scale) + ")");
  }
  return 0.5 * (cov + cov.transpose());
}
}  // namespace

Gaussian::Gaussian(Vector mean, Matrix covariance) {
  if (mean.size() != covariance.rows() || covariance.rows() != covariance.cols()) {
    throw gaussian_error("mean/covariance dimension mismatch");
  }
  mean_ = std::move(mean);
  covariance_ = symmetrize_or_throw(covariance);
  Eigen::LLT<Matrix> llt(covariance_);
  if (llt.info() != Eigen::Success) {
    throw gaussian_error("covariance is not positive definite");
  }
  chol_ = llt.matrixL();
  log_det_cov_ = 2.0 * chol_.diagonal().array().log().sum();
  const int d = dim();
  precision_ = llt.solve(Matrix::Identity(d, d));
  precision_ = 0.5 * (precision_ + precision_.transpose());
  shift_ = precision_ * mean_;
}

Gaussian Gaussian::from_natural(const Matrix& precision, const Vector& shift) {
  auto g = try_from_natural(precision, shift);
  if (!g) {
    throw gaussian_error("natural parameters are infeasible (precision not PD)");
  }
  return *std::move(g);
}

std::optional<Gaussian> Gaussian::try_from_natural(const Matrix& precision,
                                                   const Vector& shift) {
  if (shift.size() != precision.rows() || precision.rows() != precision.cols()) {
    throw gaussian_error("precision/shift dimension mismatch");
  }
  Matrix q;
  try {
    q = symmetrize_or_throw(precision);
  } catch (const gaussian_error&) {
    return std::nullopt;
  }
  Eigen::LLT<Matrix> llt(q);
  if (llt.info() != Eigen::Success) return std::nullopt;

  const int d = static_cast<int>(q.rows());
  Gaussian g;
  g.precision_ = q;
  g.covariance_ = llt.solve(Matrix::Identity(d, d));
  g.covariance_ = 0.5 * (g.covariance_ + g.covariance_.transpose());
  Eigen::LLT<Matrix> cov_llt(g.covariance_);
  if (cov_llt.info() != Eigen::Success) return std::nullopt;
  g.chol_ = cov_llt.matrixL();
  g.log_det_cov_ = 2.0 * g.chol_.diagonal().array().log().sum();
  g.mean_ = llt.solve(shift);
  g.shift_ = q * g.mean_;
  if (!g.mean_.allFinite() || !g.covariance_.allFinite()) return std::nullopt;
  return g;
}

Vector Gaussian::log_density(const Eigen::Ref<const Matrix>& X) const {
  if (X.cols() != dim()) {
    throw gaussian_error("log_density: dimension mismatch");
  }
  // Solve L Y^T = (X - mean)^T; the squared column norms are the
  // Mahalanobis terms.
  Matrix centered = (X.rowwise() - mean_.transpose()).transpose();
  chol_.triangularView<Eigen::Lower>().solveInPlace(centered);
  Vector quad = centered.colwise().squaredNorm();
  const double norm_const = -0.5 * (dim() * kLog2Pi + log_det_cov_);
  return (norm_const - 0.5 * quad.array()).matrix();
}

double Gaussian::log_density_at(const Eigen::Ref<const Vector>& x) const {
  return log_density(x.transpose())(0);
}

Matrix Gaussian::sample(int n, Rng& rng) const {
  const int d = dim();
  Matrix z(n, d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) z(i, j) = normal(rng);
  }
  Matrix out = z * chol_.transpose();
  out.rowwise() += mean_.transpose();
  return out;
}

double Gaussian::entropy() const {
  return 0.5 * (dim() * (kLog2Pi + 1.0) + log_det_cov_);
}

bool Gaussian::same_parameters(const Gaussian& other) const {
  return dim() == other.dim() && mean_ == other.mean_ &&
         covariance_ == other.covariance_;
}

double kl_divergence(const Gaussian& g1, const Gaussian& g2) {
  if (g1.dim() != g2.dim()) {
    throw gaussian_error("kl_divergence: dimension mismatch");
  }
  const int d = g1.dim();
  const Vector diff = g2.mean() - g1.mean();
  // tr(S2^-1 S1) and the Mahalanobis term via the factor of S2.
  Matrix a = g2.chol().triangularView<Eigen::Lower>().solve(g1.chol());
  const double trace_term = a.squaredNorm();
  Vector b = g2.chol().triangularView<Eigen::Lower>().solve(diff);
  const double maha = b.squaredNorm();
  const double kl =
      0.5 * (trace_term + maha - d + g2.log_det_cov() - g1.log_det_cov());
  return std::max(kl, 0.0);
}

double scale_to_entropy(const Matrix& covariance, double target_entropy) {
  const int n = static_cast<int>(covariance.rows());
  Eigen::LLT<Matrix> llt(0.5 * (covariance + covariance.transpose()));
  if (llt.info() != Eigen::Success) {
    throw gaussian_error("scale_to_entropy: covariance is not positive definite");
  }
  const double log_det = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  const double log_det_2epi = n * (kLog2Pi + 1.0) + log_det;
  return std::exp((2.0 * target_entropy - log_det_2epi) / n);
}

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // all -inf (or a nan/inf poisoning)
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace vips
