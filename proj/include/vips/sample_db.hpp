#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "vips/mixture.hpp"

namespace vips {

enum class Dissimilarity { kMahalanobis, kReverseKl, kForwardKl, kUniform };

/// Batched unnormalized log target density; rows of the matrix are points.
using TargetFn = std::function<Vector(const Eigen::Ref<const Matrix>&)>;

/// All samples drawn from one origin Gaussian, with their target values.
struct OriginGroup {
  Gaussian origin;
  Matrix samples;       // rows
  Vector log_targets;   // log p~(x) per row, finite or -inf
  double usage = 0.0;   // times this origin's samples were reused (n_i)
};

/// Reference to one stored sample: (origin index, row within the origin).
struct SampleRef {
  int origin = 0;
  int row = 0;
  friend bool operator==(const SampleRef&, const SampleRef&) = default;
  friend auto operator<=>(const SampleRef&, const SampleRef&) = default;
};

/// Persistent store of every target evaluation, grouped by the Gaussian
/// that generated the sample. Growth is unbounded by default; a cap with
/// oldest-origin eviction can be enabled via set_max_origins.
class SampleDatabase {
 public:
  explicit SampleDatabase(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  int total_count() const { return total_count_; }
  int num_origins() const { return static_cast<int>(groups_.size()); }
  const OriginGroup& group(int i) const { return groups_[i]; }
  OriginGroup& group(int i) { return groups_[i]; }
  int dropped_nan_count() const { return dropped_nan_; }

  /// Append records under origin; records with NaN targets are dropped and
  /// counted. Reuses an existing origin group when the Gaussian parameters
  /// are identical.
  void insert(const Eigen::Ref<const Matrix>& X,
              const Eigen::Ref<const Vector>& log_targets,
              const Gaussian& origin);

  const Vector sample(SampleRef ref) const {
    return groups_[ref.origin].samples.row(ref.row);
  }
  double log_target(SampleRef ref) const {
    return groups_[ref.origin].log_targets(ref.row);
  }

  void set_max_origins(std::optional<int> cap) { max_origins_ = cap; }

 private:
  int dim_;
  std::vector<OriginGroup> groups_;
  int total_count_ = 0;
  int dropped_nan_ = 0;
  std::optional<int> max_origins_;
};

/// Per-iteration working set: deduplicated samples, the background mixture
/// z (contributing origins weighted by their sample counts in the set), and
/// per-component self-normalized importance weights.
struct ActiveSampleSet {
  Matrix X;                        // N x D
  Vector log_targets;              // N
  std::vector<SampleRef> refs;     // N, database identity of each row
  std::vector<int> origin_ids;     // contributing origins (database indices)
  std::vector<int> origin_counts;  // samples per contributing origin
  Vector log_background;           // N, log z(x_s)
  Matrix weights;                  // K x N, rows self-normalized
  Vector n_eff;                    // K
  std::vector<bool> weight_valid;  // per component: normalizer was finite

  int count() const { return static_cast<int>(X.rows()); }
  bool empty() const { return X.rows() == 0; }
};

/// n_eff = 1 / sum w^2 for a self-normalized weight row.
double effective_sample_size(const Eigen::Ref<const Vector>& weights);

/// For each mixture component, draw origins without replacement with
/// probability proportional to exp(-d(component, origin) - usage) and add
/// all of an origin's samples until at least n_reuse samples were counted
/// (duplicates already present still count). Selected origins' usage
/// counters are incremented. Weights are not yet computed.
ActiveSampleSet select_samples(SampleDatabase& db, const MixtureModel& m,
                               int n_reuse, Dissimilarity mode, Rng& rng);

/// Evaluate the background mixture and per-component self-normalized
/// weights and effective sample sizes over the active set.
void compute_weights(ActiveSampleSet& active, const SampleDatabase& db,
                     const MixtureModel& m);

/// Per component, draw max(0, n_des - floor(n_eff)) new samples from that
/// component, evaluate the target, insert into the database and the active
/// set, then recompute weights once. Returns the per-component draw counts.
std::vector<int> sample_where_needed(
    SampleDatabase& db, ActiveSampleSet& active, const MixtureModel& m,
    int n_des, const TargetFn& target,
    const std::function<Rng&(int)>& rng_for_component);

}  // namespace vips
