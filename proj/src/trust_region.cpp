#include "vips/trust_region.hpp"

#include <algorithm>
#include <cmath>

namespace vips {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

bool is_pd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(0.5 * (m + m.transpose()));
  return llt.info() == Eigen::Success;
}

// Log partition of exp(-1/2 x^T Q x + x^T q):
// log Z = 1/2 (q^T Q^-1 q + log|2 pi Q^-1|). This is the convention under
// which dG/d eta equals epsilon - KL(q_eta || current); the analytic
// gradient is checked against finite differences of G in the test suite.
double log_partition(const Matrix& precision, const Vector& shift) {
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw gaussian_error("log_partition: precision not positive definite");
  }
  const int d = static_cast<int>(precision.rows());
  const double log_det_q =
      2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  const Vector mu = llt.solve(shift);
  return 0.5 * (shift.dot(mu) + d * kLog2Pi - log_det_q);
}

// Smallest eta (with multiplicative margin) for which the interpolated
// precision is positive definite. Nullopt if none below kEtaMax.
std::optional<double> find_eta_min(const Gaussian& current,
                                   const QuadraticSurrogate& surrogate) {
  auto q_of = [&](double eta) -> Matrix {
    const double a = eta / (eta + 1.0);
    return a * current.precision() + (1.0 - a) * surrogate.R;
  };
  if (is_pd(surrogate.R)) return 0.0;
  double hi = 1.0;
  while (!is_pd(q_of(hi))) {
    hi *= 2.0;
    if (hi > kEtaMax) return std::nullopt;
  }
  double lo = hi / 2.0;  // infeasible
  for (int i = 0; i < 80 && (hi - lo) > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (is_pd(q_of(mid)) ? hi : lo) = mid;
  }
  return hi * (1.0 + 1e-6);
}
}  // namespace

DualProblem::DualProblem(Gaussian cur, QuadraticSurrogate sur, double eps)
    : current(std::move(cur)), surrogate(std::move(sur)), epsilon(eps) {
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
  auto em = find_eta_min(current, surrogate);
  if (!em) {
    throw update_rejected(
        "surrogate too indefinite: no feasible step size below 1e10");
  }
  eta_min = *em;
}

std::pair<Matrix, Vector> interpolate_natural(double eta, const DualProblem& dp) {
  const double a = eta / (eta + 1.0);
  Matrix q_mat = a * dp.current.precision() + (1.0 - a) * dp.surrogate.R;
  Vector q_vec = a * dp.current.shift() + (1.0 - a) * dp.surrogate.r;
  return {std::move(q_mat), std::move(q_vec)};
}

std::pair<double, double> dual_value_and_gradient(double eta,
                                                  const DualProblem& dp) {
  auto [q_mat, q_vec] = interpolate_natural(eta, dp);
  auto interpolated = Gaussian::try_from_natural(q_mat, q_vec);
  if (!interpolated) {
    throw gaussian_error("infeasible step: interpolated precision not PD");
  }
  const double log_z_cur =
      log_partition(dp.current.precision(), dp.current.shift());
  const double log_z_eta = log_partition(q_mat, q_vec);
  const double value =
      eta * dp.epsilon - eta * log_z_cur + (eta + 1.0) * log_z_eta;
  const double grad = dp.epsilon - kl_divergence(*interpolated, dp.current);
  return {value, grad};
}

Gaussian gva_update(const Gaussian& current, const QuadraticSurrogate& surrogate,
                    double epsilon) {
  DualProblem dp(current, surrogate, epsilon);

  auto make_at = [&](double eta) {
    auto [q_mat, q_vec] = interpolate_natural(eta, dp);
    auto g = Gaussian::try_from_natural(q_mat, q_vec);
    if (!g) throw update_rejected("interpolated natural parameters infeasible");
    return *std::move(g);
  };
  auto kl_at = [&](double eta) { return kl_divergence(make_at(eta), current); };

  // Unconstrained update already inside the trust region.
  if (kl_at(dp.eta_min) <= epsilon) return make_at(dp.eta_min);

  // KL(eta) decreases towards 0 as eta grows, so dG = epsilon - KL has a
  // sign change on [eta_min, hi]. Bracket by doubling, then regula falsi
  // with bisection fallback.
  double lo = dp.eta_min;                    // dG(lo) < 0
  double hi = std::max(1.0, 2.0 * (lo + 1.0));
  while (kl_at(hi) > epsilon) {
    hi *= 2.0;
    if (hi > kEtaMax) {
      throw update_rejected("no step size below 1e10 satisfies the KL bound");
    }
  }

  double f_lo = epsilon - kl_at(lo);
  double f_hi = epsilon - kl_at(hi);
  double eta = hi;
  int last_side = 0;  // Illinois: halve a retained endpoint to avoid stalling
  for (int i = 0; i < 200; ++i) {
    double cand = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
    const double f_cand = epsilon - kl_at(cand);
    eta = cand;
    if (std::abs(f_cand) <= 1e-5 * epsilon) break;
    if (f_cand < 0.0) {
      lo = cand;
      f_lo = f_cand;
      if (last_side < 0) f_hi *= 0.5;
      last_side = -1;
    } else {
      hi = cand;
      f_hi = f_cand;
      if (last_side > 0) f_lo *= 0.5;
      last_side = 1;
    }
    if ((hi - lo) <= 1e-12 * hi) {
      eta = hi;  // feasible side of the bracket
      break;
    }
  }
  // Commit the feasible endpoint if the iterate overshoots the bound.
  Gaussian result = make_at(eta);
  if (kl_divergence(result, current) > epsilon * (1.0 + 1e-3)) {
    result = make_at(hi);
  }
  return result;
}

double adapt_kl_bound(double epsilon_o, bool improved, double lo, double hi) {
  return std::clamp(epsilon_o * (improved ? 1.1 : 0.8), lo, hi);
}

}  // namespace vips
