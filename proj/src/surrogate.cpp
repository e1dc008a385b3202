#include "vips/surrogate.hpp"

#include <algorithm>
#include <cmath>

namespace vips {

int feature_count(int d) { return 1 + d + d * (d + 1) / 2; }

Vector quadratic_features(const Eigen::Ref<const Vector>& x) {
  const int d = static_cast<int>(x.size());
  Vector f(feature_count(d));
  f(0) = 1.0;
  f.segment(1, d) = x;
  int k = 1 + d;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) f(k++) = x(i) * x(j);
  }
  return f;
}

std::optional<QuadraticSurrogate> fit_weighted_quadratic(
    const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
    const Eigen::Ref<const Vector>& weights, double kappa,
    const Gaussian& whitener) {
  const int n = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());
  const int nf = feature_count(d);

  // Whitened coordinates z = L^-1 (x - mean).
  Matrix Z = (X.rowwise() - whitener.mean().transpose()).transpose();
  whitener.chol().triangularView<Eigen::Lower>().solveInPlace(Z);
  Z.transposeInPlace();

  Matrix design(n, nf);
  for (int i = 0; i < n; ++i) {
    design.row(i) = quadratic_features(Z.row(i).transpose()).transpose();
  }

  Matrix wx = weights.asDiagonal() * design;
  Matrix normal = design.transpose() * wx;
  normal.diagonal().tail(nf - 1).array() += kappa;  // constant feature unpenalized
  Vector rhs = wx.transpose() * y;

  Eigen::LDLT<Matrix> ldlt(normal);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  Vector beta = ldlt.solve(rhs);
  if (!beta.allFinite()) return std::nullopt;

  // Read off the whitened quadratic -1/2 z^T A z + z^T b + c. Diagonal
  // coefficients give A_ii = -2 beta_ii; each off-diagonal coefficient is
  // halved onto (i, j) and (j, i).
  const double c = beta(0);
  Vector b = beta.segment(1, d);
  Matrix A(d, d);
  int k = 1 + d;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      if (i == j) {
        A(i, i) = -2.0 * beta(k);
      } else {
        A(i, j) = -beta(k);
        A(j, i) = -beta(k);
      }
      ++k;
    }
  }

  // Map back: with z = L^-1 (x - mu), the quadratic in x has
  // R = L^-T A L^-1 and r = R mu + L^-T b.
  Matrix linv = whitener.chol().triangularView<Eigen::Lower>().solve(
      Matrix::Identity(d, d));
  Matrix R = linv.transpose() * A * linv;
  R = 0.5 * (R + R.transpose());
  Vector r = R * whitener.mean() + linv.transpose() * b;

  if (!R.allFinite() || !r.allFinite()) return std::nullopt;
  const Vector& mu = whitener.mean();
  const double offset =
      c - (linv.transpose() * b).dot(mu) - 0.5 * mu.dot(R * mu);
  return QuadraticSurrogate{std::move(R), std::move(r), offset};
}

RidgeState adapt_ridge(RidgeState state, bool fit_succeeded, double lo,
                       double hi) {
  state.kappa = fit_succeeded ? state.kappa / 2.0 : state.kappa * 10.0;
  state.kappa = std::clamp(state.kappa, lo, hi);
  return state;
}

}  // namespace vips
