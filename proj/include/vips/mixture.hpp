#pragma once

#include <limits>
#include <vector>

#include "vips/gaussian.hpp"

namespace vips {

struct ActiveSampleSet;

inline constexpr double kMinWeight = 1e-6;

/// Optimizer state attached to each mixture component.
struct ComponentState {
  double epsilon = 1.0;            // trust-region KL bound
  double kappa = 1e-10;            // ridge coefficient
  double last_reward = std::numeric_limits<double>::quiet_NaN();
  int low_weight_streak = 0;
  double best_reward_in_streak = -std::numeric_limits<double>::infinity();
};

/// Gaussian mixture with per-component optimizer state. Weights live on the
/// simplex; every weight is at least kMinWeight except freshly added
/// components, which start at their tiny initial weight until the next
/// weight update.
class MixtureModel {
 public:
  MixtureModel(std::vector<double> weights, std::vector<Gaussian> components);

  int dim() const { return components_[0].dim(); }
  int size() const { return static_cast<int>(components_.size()); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Gaussian>& components() const { return components_; }
  const Gaussian& component(int o) const { return components_[o]; }
  double weight(int o) const { return weights_[o]; }
  double log_weight(int o) const { return log_weights_[o]; }
  ComponentState& state(int o) { return states_[o]; }
  const ComponentState& state(int o) const { return states_[o]; }

  void set_component(int o, Gaussian g) { components_[o] = std::move(g); }
  void set_weights(std::vector<double> weights);

  /// Append a component without renormalizing through the weight floor;
  /// existing weights are scaled by (1 - weight).
  void add_component(Gaussian g, double weight, ComponentState state);

  /// Remove the given components (sorted ascending) and renormalize.
  void remove_components(const std::vector<int>& indices);

  /// log q(x) per row of X, via max-shifted log-sum-exp.
  Vector log_density(const Eigen::Ref<const Matrix>& X) const;

  /// N x K matrix of log q(x|o) per row/component.
  Matrix component_log_densities(const Eigen::Ref<const Matrix>& X) const;

  /// N x K matrix of log q(o|x); each row's exp sums to one.
  Matrix log_responsibilities(const Eigen::Ref<const Matrix>& X) const;

  /// Categorical-then-Gaussian draws from the mixture.
  Matrix sample(int n, Rng& rng) const;

 private:
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<Gaussian> components_;
  std::vector<ComponentState> states_;
};

/// Importance-weighted estimate of each component's expected reward
/// R(o) = E_{q(x|o)}[R(x) + log resp(o|x)] + H(q(x|o)), using the active
/// set's per-component self-normalized weights. log_resp is the frozen
/// responsibility snapshot from the start of the iteration. Components
/// whose weight normalizer degenerated keep their previous reward.
std::vector<double> component_rewards(const MixtureModel& m,
                                      const ActiveSampleSet& active,
                                      const Eigen::Ref<const Matrix>& log_resp);

/// Closed-form weight update: softmax of rewards, floored at min_weight and
/// renormalized.
std::vector<double> update_weights(const std::vector<double>& rewards,
                                   double min_weight = kMinWeight);

/// Self-normalized importance estimate of E_q[log target - log q] over the
/// active set, with mixture-level weights q(x)/z(x).
double elbo_estimate(const MixtureModel& m, const ActiveSampleSet& active);

}  // namespace vips
