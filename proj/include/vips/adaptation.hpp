#pragma once

#include <utility>
#include <vector>

#include "vips/sample_db.hpp"

namespace vips {

inline constexpr double kInitialWeight = 1e-29;

/// Model-size control: add components at promising database samples, delete
/// stagnant low-weight ones.
struct AdaptationState {
  std::vector<double> delta_cycle{1000.0, 500.0, 200.0, 100.0, 50.0};
  int delta_cursor = 0;
  int add_rate = 30;       // iterations between additions
  int delete_rate = 10;    // low-weight iterations before deletion
  double initial_weight = kInitialWeight;
  double min_weight = kMinWeight;

  double next_delta() {
    const double d = delta_cycle[delta_cursor];
    delta_cursor = (delta_cursor + 1) % static_cast<int>(delta_cycle.size());
    return d;
  }
};

/// Score every database sample as a candidate mean for a new component:
/// score = R(x_s) - max(log q(x_s), max_i log q(x_i) - delta).
/// Returns (best sample, score); ties break toward the lowest database
/// index. Throws on an empty database.
std::pair<Vector, double> score_candidates(const SampleDatabase& db,
                                           const MixtureModel& m, double delta);

/// Weighted mean of component entropies, the entropy given to new
/// components.
double target_entropy(const MixtureModel& m);

/// Choose the covariance of a new component by line search over
/// interpolations of an isotropic and a responsibility-averaged covariance,
/// both rescaled to the target entropy. Line-search draws and target values
/// are inserted into the database.
Matrix init_covariance(const MixtureModel& m, const Vector& mean_new,
                       double target_entropy_value, const TargetFn& target,
                       SampleDatabase& db, Rng& rng);

/// Add a component (weight state.initial_weight) at the best-scoring
/// database sample when the iteration index is a multiple of the adding
/// rate.
void maybe_add_component(MixtureModel& m, AdaptationState& state,
                         SampleDatabase& db, const TargetFn& target,
                         int iteration, Rng& rng);

/// Record this iteration's weights and rewards into the per-component
/// low-weight streak trackers.
void update_deletion_trackers(MixtureModel& m, double min_weight = kMinWeight);

/// Delete components whose weight stayed under the floor for delete_rate
/// iterations without any reward increase. Never deletes the last component
/// or the single highest-weight one.
void delete_components(MixtureModel& m, const AdaptationState& state);

}  // namespace vips
