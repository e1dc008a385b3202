#include "vips/adaptation.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vips {

std::pair<Vector, double> score_candidates(const SampleDatabase& db,
                                           const MixtureModel& m,
                                           double delta) {
  if (db.total_count() == 0) throw std::invalid_argument("empty database");

  double best_score = -std::numeric_limits<double>::infinity();
  Vector best_sample;
  double max_log_q = -std::numeric_limits<double>::infinity();

  // One batched mixture-density pass over the whole candidate pool.
  std::vector<Vector> log_q_per_group(db.num_origins());
  for (int g = 0; g < db.num_origins(); ++g) {
    log_q_per_group[g] = m.log_density(db.group(g).samples);
    if (log_q_per_group[g].size() > 0) {
      max_log_q = std::max(max_log_q, log_q_per_group[g].maxCoeff());
    }
  }
  const double clamp = max_log_q - delta;
  for (int g = 0; g < db.num_origins(); ++g) {
    const auto& group = db.group(g);
    for (int r = 0; r < group.samples.rows(); ++r) {
      const double score =
          group.log_targets(r) - std::max(log_q_per_group[g](r), clamp);
      if (score > best_score) {  // strict: ties keep the lowest index
        best_score = score;
        best_sample = group.samples.row(r);
      }
    }
  }
  return {best_sample, best_score};
}

double target_entropy(const MixtureModel& m) {
  double h = 0.0;
  for (int o = 0; o < m.size(); ++o) {
    h += m.weight(o) * m.component(o).entropy();
  }
  return h;
}

Matrix init_covariance(const MixtureModel& m, const Vector& mean_new,
                       double target_entropy_value, const TargetFn& target,
                       SampleDatabase& db, Rng& rng) {
  const int d = m.dim();

  Matrix iso = Matrix::Identity(d, d);
  iso *= scale_to_entropy(iso, target_entropy_value);

  Matrix resp_avg = Matrix::Zero(d, d);
  const Vector resp =
      m.log_responsibilities(mean_new.transpose()).row(0).array().exp();
  for (int o = 0; o < m.size(); ++o) {
    resp_avg += resp(o) * m.component(o).covariance();
  }
  resp_avg *= scale_to_entropy(resp_avg, target_entropy_value);

  const Gaussian g_iso(mean_new, iso);
  const Gaussian g_avg(mean_new, resp_avg);

  // One shared importance sample set from the 50/50 proposal mixture.
  const int n = 10 * d;
  Matrix X(n, d);
  std::bernoulli_distribution coin(0.5);
  std::vector<bool> from_iso(n);
  for (int i = 0; i < n; ++i) {
    from_iso[i] = coin(rng);
    X.row(i) = (from_iso[i] ? g_iso : g_avg).sample(1, rng);
  }
  Vector y = target(X);
  for (int i = 0; i < y.size(); ++i) {
    if (std::isnan(y(i))) y(i) = -std::numeric_limits<double>::infinity();
  }
  // Store under the actual origins so later iterations can reuse them.
  {
    std::vector<int> iso_rows, avg_rows;
    for (int i = 0; i < n; ++i) (from_iso[i] ? iso_rows : avg_rows).push_back(i);
    auto insert_subset = [&](const std::vector<int>& rows, const Gaussian& g) {
      if (rows.empty()) return;
      Matrix xs(rows.size(), d);
      Vector ys(rows.size());
      for (size_t k = 0; k < rows.size(); ++k) {
        xs.row(static_cast<int>(k)) = X.row(rows[k]);
        ys(static_cast<int>(k)) = y(rows[k]);
      }
      db.insert(xs, ys, g);
    };
    insert_subset(iso_rows, g_iso);
    insert_subset(avg_rows, g_avg);
  }

  const Vector log_iso = g_iso.log_density(X);
  const Vector log_avg = g_avg.log_density(X);
  Vector log_z(n);
  for (int i = 0; i < n; ++i) {
    const double hi = std::max(log_iso(i), log_avg(i));
    log_z(i) = hi + std::log(0.5 * (std::exp(log_iso(i) - hi) +
                                    std::exp(log_avg(i) - hi)));
  }

  double best_reward = -std::numeric_limits<double>::infinity();
  double best_alpha = 0.0;
  Matrix best_cov = resp_avg;
  for (int step = 0; step <= 10; ++step) {
    const double alpha = 0.1 * step;
    Matrix cov = alpha * iso + (1.0 - alpha) * resp_avg;
    const Gaussian g_alpha(mean_new, cov);
    Vector log_w = g_alpha.log_density(X) - log_z;
    const double norm = log_sum_exp(log_w);
    Vector w = (log_w.array() - norm).exp();
    const double reward = (w.array() * y.array()).sum();
    if (reward >= best_reward) {  // ties break toward larger alpha
      best_reward = reward;
      best_alpha = alpha;
      best_cov = std::move(cov);
    }
  }
  (void)best_alpha;
  return best_cov;
}

void maybe_add_component(MixtureModel& m, AdaptationState& state,
                         SampleDatabase& db, const TargetFn& target,
                         int iteration, Rng& rng) {
  if (iteration % state.add_rate != 0) return;
  if (db.total_count() == 0) return;  // nothing to score yet

  const double delta = state.next_delta();
  auto [mean_new, score] = score_candidates(db, m, delta);
  const double h_init = target_entropy(m);
  Matrix cov = init_covariance(m, mean_new, h_init, target, db, rng);

  ComponentState cs;
  cs.epsilon = 1.0;
  cs.kappa = 1e-10;
  cs.last_reward = score;
  m.add_component(Gaussian(std::move(mean_new), std::move(cov)),
                  state.initial_weight, cs);
}

void update_deletion_trackers(MixtureModel& m, double min_weight) {
  for (int o = 0; o < m.size(); ++o) {
    ComponentState& s = m.state(o);
    const bool low = m.weight(o) < min_weight * (1.0 + 1e-12);
    const bool improved =
        s.last_reward > s.best_reward_in_streak + 1e-12;
    if (!low || improved) {
      s.low_weight_streak = low ? 1 : 0;
      s.best_reward_in_streak = s.last_reward;
    } else {
      ++s.low_weight_streak;
    }
  }
}

void delete_components(MixtureModel& m, const AdaptationState& state) {
  if (m.size() <= 1) return;
  int top = 0;
  for (int o = 1; o < m.size(); ++o) {
    if (m.weight(o) > m.weight(top)) top = o;
  }
  std::vector<int> doomed;
  for (int o = 0; o < m.size(); ++o) {
    if (o == top) continue;
    if (m.state(o).low_weight_streak >= state.delete_rate) doomed.push_back(o);
  }
  if (!doomed.empty()) m.remove_components(doomed);
}

}  // namespace vips
