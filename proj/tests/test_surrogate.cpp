#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "vips/surrogate.hpp"

using namespace vips;
using vips::testing::random_spd;
using vips::testing::random_vector;

namespace {

// Evaluate -1/2 x^T A x + b^T x + c row-wise.
Vector quadratic_values(const Eigen::Ref<const Matrix>& X, const Matrix& A,
                        const Vector& b, double c) {
  Vector y(X.rows());
  for (int i = 0; i < X.rows(); ++i) {
    const Vector x = X.row(i);
    y(i) = -0.5 * x.dot(A * x) + b.dot(x) + c;
  }
  return y;
}

struct Generated {
  Matrix X;
  Vector y;
  Matrix A;
  Vector b;
  Gaussian whitener;
};

Generated make_exact_instance(int d, Rng& rng) {
  const int n = 3 * feature_count(d);
  Gaussian whitener(random_vector(d, rng), random_spd(d, rng));
  Matrix X = whitener.sample(n, rng);
  Matrix A = random_spd(d, rng);
  Vector b = random_vector(d, rng);
  return {X, quadratic_values(X, A, b, 0.7), A, b, whitener};
}

}  // namespace

TEST_CASE("feature map") {
  CHECK(feature_count(2) == 6);
  Vector x1(1);
  x1 << 2;
  Vector f = quadratic_features(x1);
  CHECK(f.size() == 3);
  CHECK(f(0) == 1.0);
  CHECK(f(1) == 2.0);
  CHECK(f(2) == 4.0);
  Vector z = quadratic_features(Vector::Zero(3));
  CHECK(z(0) == 1.0);
  CHECK(z.tail(z.size() - 1).norm() == 0.0);
}

TEST_CASE("exact quadratic recovery") {
  Rng rng(21);
  for (int d : {1, 2, 5, 10}) {
    Generated g = make_exact_instance(d, rng);
    const Vector w = Vector::Constant(g.X.rows(), 1.0 / g.X.rows());
    auto fit = fit_weighted_quadratic(g.X, g.y, w, 0.0, g.whitener);
    REQUIRE(fit.has_value());
    CHECK((fit->R - g.A).norm() / g.A.norm() < 1e-6);
    CHECK((fit->r - g.b).norm() / (1 + g.b.norm()) < 1e-6);
    // the fit reproduces the data, offset included
    Vector pred = quadratic_values(g.X, fit->R, fit->r, fit->offset);
    CHECK((pred - g.y).norm() / (1 + g.y.norm()) < 1e-6);
  }
}

TEST_CASE("row permutation invariance") {
  Rng rng(22);
  Generated g = make_exact_instance(3, rng);
  Vector w(g.X.rows());
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  for (int i = 0; i < w.size(); ++i) w(i) = unif(rng);
  w /= w.sum();
  auto fit = fit_weighted_quadratic(g.X, g.y, w, 1e-10, g.whitener);
  REQUIRE(fit.has_value());

  std::vector<int> perm(g.X.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix Xp(g.X.rows(), g.X.cols());
  Vector yp(g.y.size()), wp(w.size());
  for (size_t i = 0; i < perm.size(); ++i) {
    Xp.row(i) = g.X.row(perm[i]);
    yp(i) = g.y(perm[i]);
    wp(i) = w(perm[i]);
  }
  auto fit_p = fit_weighted_quadratic(Xp, yp, wp, 1e-10, g.whitener);
  REQUIRE(fit_p.has_value());
  CHECK((fit->R - fit_p->R).norm() < 1e-10);
  CHECK((fit->r - fit_p->r).norm() < 1e-10);
}

TEST_CASE("duplicated rows with split weights") {
  Rng rng(23);
  Generated g = make_exact_instance(2, rng);
  const int n = static_cast<int>(g.X.rows());
  Vector w = Vector::Constant(n, 1.0 / n);
  auto fit = fit_weighted_quadratic(g.X, g.y, w, 1e-10, g.whitener);
  REQUIRE(fit.has_value());

  Matrix X2(2 * n, g.X.cols());
  Vector y2(2 * n), w2(2 * n);
  X2 << g.X, g.X;
  y2 << g.y, g.y;
  w2 << 0.5 * w, 0.5 * w;
  auto fit2 = fit_weighted_quadratic(X2, y2, w2, 1e-10, g.whitener);
  REQUIRE(fit2.has_value());
  CHECK((fit->R - fit2->R).norm() < 1e-8);
  CHECK((fit->r - fit2->r).norm() < 1e-8);
}

TEST_CASE("huge ridge shrinks everything but the offset") {
  Rng rng(24);
  Generated g = make_exact_instance(3, rng);
  const Vector w = Vector::Constant(g.X.rows(), 1.0 / g.X.rows());
  auto fit = fit_weighted_quadratic(g.X, g.y, w, 1e12, g.whitener);
  REQUIRE(fit.has_value());
  CHECK(fit->R.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(fit->r.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("adapt_ridge") {
  CHECK(adapt_ridge(RidgeState{1e-10}, false).kappa ==
        doctest::Approx(1e-9).epsilon(1e-12));
  CHECK(adapt_ridge(RidgeState{1e-10}, true).kappa ==
        doctest::Approx(5e-11).epsilon(1e-12));
  CHECK(adapt_ridge(RidgeState{1e-14}, true).kappa ==
        doctest::Approx(1e-14).epsilon(1e-12));
  CHECK(adapt_ridge(RidgeState{1e-6}, false).kappa ==
        doctest::Approx(1e-6).epsilon(1e-12));
}
