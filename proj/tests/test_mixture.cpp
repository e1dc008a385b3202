#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "vips/sample_db.hpp"

using namespace vips;
using vips::testing::random_spd;
using vips::testing::random_vector;

namespace {

MixtureModel random_mixture(int k, int d, Rng& rng, double mean_scale = 3.0) {
  std::vector<Gaussian> comps;
  std::vector<double> w;
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  double sum = 0.0;
  for (int o = 0; o < k; ++o) {
    comps.emplace_back(random_vector(d, rng, mean_scale), random_spd(d, rng));
    sum += (w.emplace_back(unif(rng)));
  }
  for (double& v : w) v /= sum;
  return MixtureModel(w, std::move(comps));
}

// Draw n samples per component, store them under their component origins,
// and build a weighted active set holding all of them.
std::pair<SampleDatabase, ActiveSampleSet> active_from_mixture(
    const MixtureModel& m, const TargetFn& target, int n_per_comp, Rng& rng) {
  SampleDatabase db(m.dim());
  for (int o = 0; o < m.size(); ++o) {
    Matrix X = m.component(o).sample(n_per_comp, rng);
    db.insert(X, target(X), m.component(o));
  }
  ActiveSampleSet active = select_samples(
      db, m, n_per_comp * m.size(), Dissimilarity::kUniform, rng);
  compute_weights(active, db, m);
  return {std::move(db), std::move(active)};
}

}  // namespace

TEST_CASE("mixture density basics") {
  Rng rng(31);
  const int d = 2;
  Gaussian g(random_vector(d, rng), random_spd(d, rng));
  Matrix X = g.sample(20, rng);

  MixtureModel single({1.0}, {g});
  CHECK((single.log_density(X) - g.log_density(X)).norm() < 1e-12);

  MixtureModel twin({0.5, 0.5}, {g, g});
  CHECK((twin.log_density(X) - g.log_density(X)).norm() < 1e-10);
}

TEST_CASE("mixture density matches the naive sum") {
  Rng rng(32);
  MixtureModel m = random_mixture(3, 2, rng);
  Matrix X = m.sample(50, rng);
  Vector log_q = m.log_density(X);
  for (int i = 0; i < X.rows(); ++i) {
    double acc = 0.0;
    for (int o = 0; o < m.size(); ++o) {
      acc += m.weight(o) * std::exp(m.component(o).log_density_at(X.row(i)));
    }
    CHECK(log_q(i) == doctest::Approx(std::log(acc)).epsilon(1e-10));
  }
}

TEST_CASE("responsibilities") {
  Rng rng(33);
  const int d = 2;
  Gaussian g(random_vector(d, rng), random_spd(d, rng));
  MixtureModel single({1.0}, {g});
  Matrix X = g.sample(10, rng);
  CHECK(single.log_responsibilities(X).cwiseAbs().maxCoeff() < 1e-12);

  Matrix iso = Matrix::Identity(1, 1);
  Vector left(1), right(1);
  left << -1.0;
  right << 1.0;
  MixtureModel sym({0.5, 0.5}, {Gaussian(left, iso), Gaussian(right, iso)});
  Matrix mid = Matrix::Zero(1, 1);
  Matrix lr = sym.log_responsibilities(mid);
  CHECK(lr(0, 0) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(lr(0, 1) == doctest::Approx(std::log(0.5)).epsilon(1e-12));

  MixtureModel m = random_mixture(3, 2, rng);
  Matrix Y = m.sample(40, rng);
  Matrix r = m.log_responsibilities(Y);
  for (int i = 0; i < Y.rows(); ++i) {
    CHECK(r.row(i).array().exp().sum() == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("density / responsibility consistency") {
  Rng rng(34);
  MixtureModel m = random_mixture(3, 2, rng);
  Matrix X = m.sample(30, rng);
  Vector log_q = m.log_density(X);
  Matrix lr = m.log_responsibilities(X);
  Matrix lc = m.component_log_densities(X);
  for (int i = 0; i < X.rows(); ++i) {
    for (int o = 0; o < m.size(); ++o) {
      CHECK(m.log_weight(o) + lc(i, o) - lr(i, o) ==
            doctest::Approx(log_q(i)).epsilon(1e-10));
    }
  }
}

TEST_CASE("update_weights arithmetic") {
  auto w = update_weights({0.0, 0.0});
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-12));
  w = update_weights({std::log(3.0), 0.0});
  CHECK(w[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(0.25).epsilon(1e-12));
  w = update_weights({0.0, -100.0});
  CHECK(w[1] == doctest::Approx(1e-6).epsilon(1e-9));
  CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("update_weights shift invariance") {
  // integer rewards stay exact under a representable shift
  const std::vector<double> base{1.0, 2.0, 3.0};
  std::vector<double> shifted{1001.0, 1002.0, 1003.0};
  auto a = update_weights(base);
  auto b = update_weights(shifted);
  for (int i = 0; i < 3; ++i) CHECK(a[i] == b[i]);

  Rng rng(35);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> r{normal(rng), normal(rng), normal(rng)};
  std::vector<double> rs{r[0] + 987.25, r[1] + 987.25, r[2] + 987.25};
  auto c = update_weights(r);
  auto e = update_weights(rs);
  for (int i = 0; i < 3; ++i) CHECK(c[i] == doctest::Approx(e[i]).epsilon(1e-10));
}

TEST_CASE("weight update fixed point at exact rewards") {
  Rng rng(36);
  MixtureModel m = random_mixture(3, 2, rng);
  std::vector<double> rewards(m.size());
  for (int o = 0; o < m.size(); ++o) rewards[o] = m.log_weight(o);
  auto w = update_weights(rewards);
  for (int o = 0; o < m.size(); ++o) {
    CHECK(w[o] == doctest::Approx(m.weight(o)).epsilon(1e-10));
  }
}

TEST_CASE("component rewards approach log weights when target is the model") {
  Rng rng(37);
  MixtureModel m = random_mixture(3, 2, rng);
  const TargetFn target = [&m](const Eigen::Ref<const Matrix>& X) {
    return m.log_density(X);
  };
  auto [db, active] = active_from_mixture(m, target, 7000, rng);
  Matrix log_resp = m.log_responsibilities(active.X);
  auto rewards = component_rewards(m, active, log_resp);
  for (int o = 0; o < m.size(); ++o) {
    CHECK(std::abs(rewards[o] - m.log_weight(o)) < 0.05);
  }
}

TEST_CASE("component rewards shift with the target") {
  Rng rng(38);
  MixtureModel m = random_mixture(2, 2, rng);
  const TargetFn target = [&m](const Eigen::Ref<const Matrix>& X) {
    return m.log_density(X);
  };
  auto [db, active] = active_from_mixture(m, target, 500, rng);
  Matrix log_resp = m.log_responsibilities(active.X);
  auto base = component_rewards(m, active, log_resp);
  ActiveSampleSet shifted = active;
  shifted.log_targets.array() += 4.2;
  auto moved = component_rewards(m, shifted, log_resp);
  for (int o = 0; o < m.size(); ++o) {
    CHECK(moved[o] - base[o] == doctest::Approx(4.2).epsilon(1e-10));
  }
}

TEST_CASE("degenerate component keeps its previous reward") {
  Rng rng(39);
  MixtureModel m = random_mixture(2, 2, rng);
  const TargetFn target = [&m](const Eigen::Ref<const Matrix>& X) {
    return m.log_density(X);
  };
  auto [db, active] = active_from_mixture(m, target, 100, rng);
  m.state(0).last_reward = -123.0;
  active.weight_valid[0] = false;
  Matrix log_resp = m.log_responsibilities(active.X);
  auto rewards = component_rewards(m, active, log_resp);
  CHECK(rewards[0] == -123.0);
}

TEST_CASE("elbo estimate oracles") {
  Rng rng(40);
  MixtureModel m = random_mixture(2, 2, rng);

  const TargetFn self = [&m](const Eigen::Ref<const Matrix>& X) {
    return m.log_density(X);
  };
  auto [db, active] = active_from_mixture(m, self, 10000, rng);
  CHECK(std::abs(elbo_estimate(m, active)) < 0.05);

  // constant multiple of the model: estimate -> log c
  ActiveSampleSet scaled = active;
  scaled.log_targets.array() += std::log(7.0);
  CHECK(elbo_estimate(m, scaled) ==
        doctest::Approx(std::log(7.0)).epsilon(0.05));

  // single Gaussian model vs Gaussian target: -> -KL(q || p)
  Gaussian q(random_vector(2, rng), random_spd(2, rng));
  Gaussian p(q.mean() + random_vector(2, rng, 0.3), random_spd(2, rng));
  MixtureModel qm({1.0}, {q});
  const TargetFn pt = [&p](const Eigen::Ref<const Matrix>& X) {
    return p.log_density(X);
  };
  auto [db2, active2] = active_from_mixture(qm, pt, 20000, rng);
  CHECK(std::abs(elbo_estimate(qm, active2) + kl_divergence(q, p)) < 0.05);
}

TEST_CASE("add and remove components") {
  Rng rng(41);
  MixtureModel m = random_mixture(2, 2, rng);
  const double w0 = m.weight(0);
  ComponentState cs;
  m.add_component(Gaussian(random_vector(2, rng), random_spd(2, rng)), 1e-29,
                  cs);
  CHECK(m.size() == 3);
  CHECK(m.weight(2) == 1e-29);
  CHECK(m.weight(0) == doctest::Approx(w0).epsilon(1e-12));
  double sum = 0.0;
  for (int o = 0; o < m.size(); ++o) sum += m.weight(o);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  m.remove_components({2});
  CHECK(m.size() == 2);
  sum = 0.0;
  for (int o = 0; o < m.size(); ++o) sum += m.weight(o);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}
