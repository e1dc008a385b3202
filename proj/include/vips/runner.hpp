#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vips/adaptation.hpp"
#include "vips/targets.hpp"
#include "vips/trust_region.hpp"

namespace vips {

/// Run configuration: adaptation-rule constants with their recommended
/// defaults, plus budget, seeding, and initial-mixture settings. Loadable
/// from a flat JSON document; unknown keys are rejected.
struct VipsConfig {
  double epsilon_min = kEpsilonMin;  // trust-region KL bound clamp
  double epsilon_max = kEpsilonMax;
  int n_des_per_dim = 20;     // desired effective samples per component
  int n_reuse_per_dim = 40;   // reused samples per component
  int n_add = 30;             // iterations between component additions
  int n_del = 10;             // low-weight iterations before deletion
  double min_weight = kMinWeight;
  double initial_weight = kInitialWeight;
  std::vector<double> delta_cycle{1000.0, 500.0, 200.0, 100.0, 50.0};
  double kappa_min = kKappaMin;  // ridge coefficient clamp
  double kappa_max = kKappaMax;
  long long max_fevals = 200000;
  int max_iterations = 1000;
  std::uint64_t seed = 0;
  Dissimilarity dissimilarity = Dissimilarity::kMahalanobis;
  bool reuse = true;
  bool adaptation = true;
  int init_components = 1;
  double init_mean_scale = 0.0;  // std of the initial mean draws
  double init_cov_scale = 1000.0;  // initial covariance = scale * I

  /// Throws std::invalid_argument when any range is violated.
  void validate() const;
};

/// Overlay the JSON document at path onto base. Unknown keys and
/// out-of-range values raise std::invalid_argument.
VipsConfig load_config(const std::string& path, VipsConfig base = {});

Dissimilarity parse_dissimilarity(const std::string& name);

struct ComponentStats {
  double weight = 0.0;
  double entropy = 0.0;
  double epsilon = 0.0;
  double n_eff = 0.0;
  int n_new = 0;
};

struct IterationStats {
  int iteration = 0;
  long long fevals = 0;  // cumulative target evaluations
  int num_components = 0;
  double elbo = 0.0;
  double seconds = 0.0;
  std::vector<ComponentStats> components;
};

/// Everything that persists across iterations.
struct OptimizerState {
  MixtureModel mixture;
  SampleDatabase db;
  AdaptationState adaptation;
  int iteration = 0;
};

/// Deterministic RNG substream for one (iteration, component, purpose)
/// triple of a seeded run.
Rng substream(std::uint64_t seed, std::uint64_t iteration,
              std::uint64_t component, std::uint64_t purpose);

/// Substream purposes; component updates themselves consume no randomness.
inline constexpr std::uint64_t kPurposeSelect = 0;
inline constexpr std::uint64_t kPurposeDraw = 1;
inline constexpr std::uint64_t kPurposeAdd = 2;
inline constexpr std::uint64_t kPurposeInit = 3;
inline constexpr std::uint64_t kPurposeTarget = 4;
inline constexpr std::uint64_t kPurposeFinalSamples = 5;

/// One outer-loop pass: add/delete components, build the active sample set,
/// draw where the effective sample size falls short, update weights from
/// the frozen responsibility snapshot, then update every component under
/// its trust region and commit atomically.
IterationStats run_iteration(OptimizerState& state, const VipsConfig& cfg,
                             const TargetDistribution& target);

struct RunResult {
  MixtureModel model;
  std::vector<IterationStats> log;
  std::string error;  // non-empty when the run aborted early
};

/// Build the initial mixture and iterate until max_iterations or
/// max_fevals. A target failure aborts the run but returns the last
/// committed state. Deterministic given (config, target) in single-threaded
/// mode (VIPS_THREADS unset or <= 1).
RunResult run(const VipsConfig& cfg, const TargetDistribution& target);

/// Reference single-loop variant: no sample reuse, no adaptation of the
/// component count; fresh samples each iteration, component updates, then
/// the weight update.
RunResult run_basic(const VipsConfig& cfg, const TargetDistribution& target);

MixtureModel make_initial_mixture(const VipsConfig& cfg, int dim);

/// model.json round trip: {version, dimension, weights, components:
/// [{mean, covariance row-major}]}.
void write_model_json(const std::string& path, const MixtureModel& m);
MixtureModel read_model_json(const std::string& path);

/// log.csv with header iter,fevals,elbo,num_components,seconds.
void write_log_csv(const std::string& path,
                   const std::vector<IterationStats>& log);

}  // namespace vips
