#include "vips/sample_db.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace vips {

double effective_sample_size(const Eigen::Ref<const Vector>& weights) {
  return 1.0 / weights.squaredNorm();
}

void SampleDatabase::insert(const Eigen::Ref<const Matrix>& X,
                            const Eigen::Ref<const Vector>& log_targets,
                            const Gaussian& origin) {
  if (X.rows() != log_targets.size() || X.cols() != dim_) {
    throw std::invalid_argument("insert: shape mismatch");
  }
  std::vector<int> keep;
  for (int i = 0; i < X.rows(); ++i) {
    if (std::isnan(log_targets(i))) {
      ++dropped_nan_;
    } else {
      keep.push_back(i);
    }
  }
  if (keep.empty()) return;

  int gi = -1;
  for (int i = num_origins() - 1; i >= 0; --i) {
    if (groups_[i].origin.same_parameters(origin)) {
      gi = i;
      break;
    }
  }
  if (gi < 0) {
    if (max_origins_ && num_origins() >= *max_origins_) {
      total_count_ -= static_cast<int>(groups_.front().samples.rows());
      groups_.erase(groups_.begin());
    }
    groups_.push_back(OriginGroup{origin, Matrix(0, dim_), Vector(0), 0.0});
    gi = num_origins() - 1;
  }
  OriginGroup& g = groups_[gi];
  const int old_n = static_cast<int>(g.samples.rows());
  g.samples.conservativeResize(old_n + keep.size(), dim_);
  g.log_targets.conservativeResize(old_n + keep.size());
  for (size_t k = 0; k < keep.size(); ++k) {
    g.samples.row(old_n + static_cast<int>(k)) = X.row(keep[k]);
    g.log_targets(old_n + static_cast<int>(k)) = log_targets(keep[k]);
  }
  total_count_ += static_cast<int>(keep.size());
}

namespace {

double dissimilarity(const Gaussian& component, const Gaussian& origin,
                     Dissimilarity mode) {
  switch (mode) {
    case Dissimilarity::kMahalanobis:
      return -component.log_density_at(origin.mean());
    case Dissimilarity::kReverseKl:
      return kl_divergence(component, origin);
    case Dissimilarity::kForwardKl:
      return kl_divergence(origin, component);
    case Dissimilarity::kUniform:
      return 0.0;
  }
  return 0.0;
}

// Draw an index from unnormalized log probabilities; entries already taken
// are marked -inf.
int draw_log_categorical(const Vector& log_p, Rng& rng) {
  const double norm = log_sum_exp(log_p);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  int last = -1;
  for (int i = 0; i < log_p.size(); ++i) {
    if (std::isinf(log_p(i)) && log_p(i) < 0) continue;
    acc += std::exp(log_p(i) - norm);
    last = i;
    if (u <= acc) return i;
  }
  return last;
}

void append_rows(ActiveSampleSet& active, const SampleDatabase& db,
                 const std::vector<SampleRef>& refs) {
  const int old_n = active.count();
  const int add = static_cast<int>(refs.size());
  active.X.conservativeResize(old_n + add, db.dim());
  active.log_targets.conservativeResize(old_n + add);
  for (int k = 0; k < add; ++k) {
    active.X.row(old_n + k) = db.sample(refs[k]);
    active.log_targets(old_n + k) = db.log_target(refs[k]);
    active.refs.push_back(refs[k]);
  }
}

}  // namespace

ActiveSampleSet select_samples(SampleDatabase& db, const MixtureModel& m,
                               int n_reuse, Dissimilarity mode, Rng& rng) {
  ActiveSampleSet active;
  active.X = Matrix(0, db.dim());
  active.log_targets = Vector(0);
  if (db.num_origins() == 0) return active;

  std::set<SampleRef> chosen;
  std::vector<int> origin_count_in_set(db.num_origins(), 0);

  for (int o = 0; o < m.size(); ++o) {
    Vector log_h(db.num_origins());
    for (int i = 0; i < db.num_origins(); ++i) {
      log_h(i) = -dissimilarity(m.component(o), db.group(i).origin, mode) -
                 db.group(i).usage;
    }
    int added = 0;
    int remaining = db.num_origins();
    while (added < n_reuse && remaining > 0) {
      const int i = draw_log_categorical(log_h, rng);
      log_h(i) = -std::numeric_limits<double>::infinity();
      --remaining;
      db.group(i).usage += 1.0;
      const int rows = static_cast<int>(db.group(i).samples.rows());
      std::vector<SampleRef> fresh;
      for (int r = 0; r < rows; ++r) {
        const SampleRef ref{i, r};
        if (chosen.insert(ref).second) {
          fresh.push_back(ref);
          ++origin_count_in_set[i];
        }
        ++added;  // duplicates count toward n_reuse too
        if (added >= n_reuse) break;
      }
      append_rows(active, db, fresh);
    }
  }

  for (int i = 0; i < db.num_origins(); ++i) {
    if (origin_count_in_set[i] > 0) {
      active.origin_ids.push_back(i);
      active.origin_counts.push_back(origin_count_in_set[i]);
    }
  }
  return active;
}

void compute_weights(ActiveSampleSet& active, const SampleDatabase& db,
                     const MixtureModel& m) {
  if (active.empty()) throw std::invalid_argument("empty active sample set");
  const int n = active.count();
  const int k = m.size();
  const int g = static_cast<int>(active.origin_ids.size());

  // log z(x) as a mixture of the contributing origins, each weighted by
  // how many of its samples are in the set.
  const double log_total = std::log(static_cast<double>(n));
  Matrix joint(n, g);
  for (int j = 0; j < g; ++j) {
    joint.col(j) =
        db.group(active.origin_ids[j]).origin.log_density(active.X).array() +
        std::log(static_cast<double>(active.origin_counts[j])) - log_total;
  }
  active.log_background.resize(n);
  for (int i = 0; i < n; ++i) {
    active.log_background(i) = log_sum_exp(joint.row(i));
  }

  active.weights.resize(k, n);
  active.n_eff.resize(k);
  active.weight_valid.assign(k, true);
  for (int o = 0; o < k; ++o) {
    Vector log_w =
        m.component(o).log_density(active.X) - active.log_background;
    const double norm = log_sum_exp(log_w);
    if (!std::isfinite(norm)) {
      active.weights.row(o).setConstant(1.0 / n);
      active.n_eff(o) = static_cast<double>(n);
      active.weight_valid[o] = false;
      continue;
    }
    active.weights.row(o) = (log_w.array() - norm).exp();
    active.n_eff(o) = effective_sample_size(active.weights.row(o));
  }
}

std::vector<int> sample_where_needed(
    SampleDatabase& db, ActiveSampleSet& active, const MixtureModel& m,
    int n_des, const TargetFn& target,
    const std::function<Rng&(int)>& rng_for_component) {
  // Need counts are decided from the pre-call weights; the single weight
  // recomputation happens after all draws.
  std::vector<int> n_new_per(m.size(), n_des);
  if (!active.empty() && active.n_eff.size() == m.size()) {
    for (int o = 0; o < m.size(); ++o) {
      n_new_per[o] =
          std::max(0, n_des - static_cast<int>(std::floor(active.n_eff(o))));
    }
  }
  for (int o = 0; o < m.size(); ++o) {
    const int n_new = n_new_per[o];
    if (n_new == 0) continue;

    const Gaussian& comp = m.component(o);
    Matrix X = comp.sample(n_new, rng_for_component(o));
    Vector y = target(X);
    // NaN targets are treated as -inf downstream; keep accounting exact.
    for (int i = 0; i < y.size(); ++i) {
      if (std::isnan(y(i))) y(i) = -std::numeric_limits<double>::infinity();
    }

    const int origin_before = db.num_origins();
    db.insert(X, y, comp);
    int gi = -1;
    for (int i = db.num_origins() - 1; i >= 0; --i) {
      if (db.group(i).origin.same_parameters(comp)) {
        gi = i;
        break;
      }
    }
    (void)origin_before;

    const int rows = static_cast<int>(db.group(gi).samples.rows());
    std::vector<SampleRef> fresh;
    for (int r = rows - n_new; r < rows; ++r) fresh.push_back({gi, r});
    append_rows(active, db, fresh);

    bool listed = false;
    for (size_t j = 0; j < active.origin_ids.size(); ++j) {
      if (active.origin_ids[j] == gi) {
        active.origin_counts[j] += n_new;
        listed = true;
        break;
      }
    }
    if (!listed) {
      active.origin_ids.push_back(gi);
      active.origin_counts.push_back(n_new);
    }
  }
  if (!active.empty()) compute_weights(active, db, m);
  return n_new_per;
}

}  // namespace vips
