#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "vips/sample_db.hpp"

using namespace vips;
using vips::testing::random_spd;
using vips::testing::random_vector;

namespace {

Gaussian iso(double x, double y) {
  Vector m(2);
  m << x, y;
  return Gaussian(m, Matrix::Identity(2, 2));
}

SampleDatabase db_with(const std::vector<std::pair<Gaussian, int>>& specs,
                       Rng& rng) {
  SampleDatabase db(specs.front().first.dim());
  for (const auto& [g, n] : specs) {
    Matrix X = g.sample(n, rng);
    db.insert(X, Vector::Zero(n), g);
  }
  return db;
}

}  // namespace

TEST_CASE("insert bookkeeping") {
  Rng rng(51);
  Gaussian g = iso(0, 0);
  SampleDatabase db(2);
  Matrix X = g.sample(10, rng);
  db.insert(X, Vector::Zero(10), g);
  CHECK(db.total_count() == 10);
  CHECK(db.num_origins() == 1);

  db.insert(g.sample(5, rng), Vector::Zero(5), g);
  CHECK(db.num_origins() == 1);  // identical parameters, same origin
  CHECK(db.total_count() == 15);

  Vector y(3);
  y << 1.0, std::nan(""), 2.0;
  db.insert(g.sample(3, rng), y, iso(1, 1));
  CHECK(db.num_origins() == 2);
  CHECK(db.total_count() == 17);  // NaN record dropped
  CHECK(db.dropped_nan_count() == 1);
}

TEST_CASE("effective sample size") {
  CHECK(effective_sample_size(Vector::Constant(10, 0.1)) ==
        doctest::Approx(10.0).epsilon(1e-12));
  Vector onehot = Vector::Zero(5);
  onehot(2) = 1.0;
  CHECK(effective_sample_size(onehot) == doctest::Approx(1.0).epsilon(1e-12));
  Vector half = Vector::Zero(4);
  half(0) = half(1) = 0.5;
  CHECK(effective_sample_size(half) == doctest::Approx(2.0).epsilon(1e-12));

  Rng rng(52);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    Vector w(20);
    for (int i = 0; i < 20; ++i) w(i) = unif(rng);
    w /= w.sum();
    const double n_eff = effective_sample_size(w);
    CHECK(n_eff >= 1.0 - 1e-12);
    CHECK(n_eff <= 20.0 + 1e-12);
  }
}

TEST_CASE("select_samples takes everything from a single origin") {
  Rng rng(53);
  SampleDatabase db = db_with({{iso(0, 0), 12}}, rng);
  MixtureModel m({1.0}, {iso(0, 0)});
  ActiveSampleSet a = select_samples(db, m, 12, Dissimilarity::kMahalanobis, rng);
  CHECK(a.count() == 12);
  CHECK(db.group(0).usage == 1.0);
}

TEST_CASE("first-draw probabilities are symmetric for equal origins") {
  Rng rng(54);
  MixtureModel m({1.0}, {iso(0, 0)});
  // origins placed symmetrically about the component mean
  SampleDatabase db = db_with({{iso(3, 0), 4}, {iso(-3, 0), 4}}, rng);
  int first = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    db.group(0).usage = 0.0;
    db.group(1).usage = 0.0;
    ActiveSampleSet a = select_samples(db, m, 1, Dissimilarity::kMahalanobis, rng);
    REQUIRE(a.refs.size() >= 1);
    if (a.refs.front().origin == 0) ++first;
  }
  // chi-squared test against p = 0.5 at significance well below 0.01
  const double expected = trials / 2.0;
  const double chi2 = 2.0 * (first - expected) * (first - expected) / expected;
  CHECK(chi2 < 6.63);
}

TEST_CASE("usage difference of ln 9 gives 0.9 / 0.1 first-draw odds") {
  Rng rng(55);
  MixtureModel m({1.0}, {iso(0, 0)});
  SampleDatabase db = db_with({{iso(3, 0), 4}, {iso(-3, 0), 4}}, rng);
  int first = 0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    db.group(0).usage = 0.0;
    db.group(1).usage = std::log(9.0);
    ActiveSampleSet a = select_samples(db, m, 1, Dissimilarity::kMahalanobis, rng);
    if (a.refs.front().origin == 0) ++first;
  }
  const double p = static_cast<double>(first) / trials;
  CHECK(std::abs(p - 0.9) < 3.0 * std::sqrt(0.9 * 0.1 / trials) + 1e-9);
}

TEST_CASE("selection matches an independent replay of the procedure") {
  Rng rng(56);
  SampleDatabase db =
      db_with({{iso(1, 0), 3}, {iso(-1, 0), 5}, {iso(0, 2), 2}}, rng);
  MixtureModel m({0.5, 0.5}, {iso(0.5, 0), iso(-0.5, 0)});
  const int n_reuse = 6;

  Rng seeded(777);
  ActiveSampleSet got = select_samples(db, m, n_reuse,
                                       Dissimilarity::kMahalanobis, seeded);

  // independent replay of the same procedure, duplicates counted
  for (int i = 0; i < db.num_origins(); ++i) db.group(i).usage = 0.0;
  Rng replay_rng(777);
  std::set<SampleRef> chosen;
  std::vector<SampleRef> order;
  std::vector<double> usage(db.num_origins(), 0.0);
  for (int o = 0; o < m.size(); ++o) {
    std::vector<double> log_h(db.num_origins());
    for (int i = 0; i < db.num_origins(); ++i) {
      log_h[i] = m.component(o).log_density_at(db.group(i).origin.mean()) -
                 usage[i];
    }
    std::vector<bool> taken(db.num_origins(), false);
    int added = 0;
    int remaining = db.num_origins();
    while (added < n_reuse && remaining > 0) {
      double norm = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < db.num_origins(); ++i) {
        if (!taken[i]) norm = std::max(norm, log_h[i]);
      }
      double z = 0.0;
      for (int i = 0; i < db.num_origins(); ++i) {
        if (!taken[i]) z += std::exp(log_h[i] - norm);
      }
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      const double u = unif(replay_rng);
      double acc = 0.0;
      int pick = -1;
      for (int i = 0; i < db.num_origins(); ++i) {
        if (taken[i]) continue;
        acc += std::exp(log_h[i] - norm) / z;
        pick = i;
        if (u <= acc) break;
      }
      taken[pick] = true;
      --remaining;
      usage[pick] += 1.0;
      for (int r = 0; r < db.group(pick).samples.rows(); ++r) {
        if (chosen.insert({pick, r}).second) order.push_back({pick, r});
        ++added;
        if (added >= n_reuse) break;
      }
    }
  }
  REQUIRE(got.refs.size() == order.size());
  for (size_t i = 0; i < order.size(); ++i) {
    CHECK(got.refs[i].origin == order[i].origin);
    CHECK(got.refs[i].row == order[i].row);
  }
}

TEST_CASE("compute_weights: matched proposal gives uniform weights") {
  Rng rng(57);
  Gaussian g = iso(0, 0);
  SampleDatabase db = db_with({{g, 50}}, rng);
  MixtureModel m({1.0}, {g});
  ActiveSampleSet a = select_samples(db, m, 50, Dissimilarity::kMahalanobis, rng);
  compute_weights(a, db, m);
  CHECK((a.weights.row(0).array() - 1.0 / 50).abs().maxCoeff() < 1e-12);
  CHECK(a.n_eff(0) == doctest::Approx(50.0).epsilon(1e-10));
  CHECK(a.weights.row(0).sum() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("importance estimate agrees with plain Monte Carlo") {
  Rng rng(58);
  Gaussian target_comp = iso(0.7, -0.4);
  SampleDatabase db = db_with({{iso(0, 0), 4000}, {iso(1, 0), 4000}}, rng);
  MixtureModel m({1.0}, {target_comp});
  ActiveSampleSet a = select_samples(db, m, 8000, Dissimilarity::kMahalanobis, rng);
  compute_weights(a, db, m);

  Vector mean_hat = Vector::Zero(2);
  for (int i = 0; i < a.count(); ++i) {
    mean_hat += a.weights(0, i) * a.X.row(i).transpose();
  }
  // standard error of the weighted estimate, per dimension
  const double se = 1.0 / std::sqrt(a.n_eff(0));
  CHECK((mean_hat - target_comp.mean()).cwiseAbs().maxCoeff() < 3.0 * se);
}

TEST_CASE("sample_where_needed") {
  MixtureModel m({0.5, 0.5}, {iso(0, 0), iso(40, 40)});
  SampleDatabase db(2);
  ActiveSampleSet active;
  active.X = Matrix(0, 2);
  active.log_targets = Vector(0);
  const TargetFn target = [](const Eigen::Ref<const Matrix>& X) {
    return Vector(-0.5 * X.rowwise().squaredNorm());
  };
  std::vector<Rng> rngs;
  rngs.emplace_back(Rng(1));
  rngs.emplace_back(Rng(2));
  auto rng_for = [&rngs](int o) -> Rng& { return rngs[o]; };

  auto n_new = sample_where_needed(db, active, m, 30, target, rng_for);
  CHECK(n_new == std::vector<int>{30, 30});  // empty set: n_des per component
  CHECK(active.count() == 60);
  // isolated fresh components keep nearly all their effective sample size
  CHECK(active.n_eff(0) >= 29.0);
  CHECK(active.n_eff(1) >= 29.0);
  // a second call tops each component up to exactly n_des effective samples
  std::vector<int> expected(2);
  for (int o = 0; o < 2; ++o) {
    expected[o] = std::max(0, 30 - static_cast<int>(std::floor(active.n_eff(o))));
  }
  auto again = sample_where_needed(db, active, m, 30, target, rng_for);
  CHECK(again == expected);
  auto third = sample_where_needed(db, active, m, 30, target, rng_for);
  CHECK(third[0] <= again[0]);
  CHECK(third[1] <= again[1]);
}

TEST_CASE("usage counts never decrease") {
  Rng rng(60);
  SampleDatabase db = db_with({{iso(0, 0), 5}, {iso(2, 0), 5}}, rng);
  MixtureModel m({1.0}, {iso(0, 0)});
  double prev0 = 0.0, prev1 = 0.0;
  for (int t = 0; t < 5; ++t) {
    select_samples(db, m, 7, Dissimilarity::kMahalanobis, rng);
    CHECK(db.group(0).usage >= prev0);
    CHECK(db.group(1).usage >= prev1);
    prev0 = db.group(0).usage;
    prev1 = db.group(1).usage;
  }
  CHECK(prev0 + prev1 > 0.0);
}
