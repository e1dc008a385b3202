#include "vips/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vips/sample_db.hpp"

namespace vips {

namespace {
std::vector<double> logs_of(const std::vector<double>& w) {
  std::vector<double> lw(w.size());
  std::transform(w.begin(), w.end(), lw.begin(),
                 [](double v) { return std::log(v); });
  return lw;
}
}  // namespace

MixtureModel::MixtureModel(std::vector<double> weights,
                           std::vector<Gaussian> components)
    : weights_(std::move(weights)),
      components_(std::move(components)),
      states_(weights_.size()) {
  if (weights_.empty() || weights_.size() != components_.size()) {
    throw std::invalid_argument("mixture needs matching weights and components");
  }
  const double sum = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-10) {
    throw std::invalid_argument("mixture weights must sum to 1");
  }
  for (const auto& c : components_) {
    if (c.dim() != components_[0].dim()) {
      throw std::invalid_argument("mixture components must share a dimension");
    }
  }
  log_weights_ = logs_of(weights_);
}

void MixtureModel::set_weights(std::vector<double> weights) {
  if (weights.size() != components_.size()) {
    throw std::invalid_argument("weight count mismatch");
  }
  weights_ = std::move(weights);
  log_weights_ = logs_of(weights_);
}

void MixtureModel::add_component(Gaussian g, double weight,
                                 ComponentState state) {
  for (double& w : weights_) w *= (1.0 - weight);
  weights_.push_back(weight);
  log_weights_ = logs_of(weights_);
  components_.push_back(std::move(g));
  states_.push_back(state);
}

void MixtureModel::remove_components(const std::vector<int>& indices) {
  for (auto it = indices.rbegin(); it != indices.rend(); ++it) {
    weights_.erase(weights_.begin() + *it);
    components_.erase(components_.begin() + *it);
    states_.erase(states_.begin() + *it);
  }
  const double sum = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  for (double& w : weights_) w /= sum;
  log_weights_ = logs_of(weights_);
}

Matrix MixtureModel::component_log_densities(
    const Eigen::Ref<const Matrix>& X) const {
  Matrix out(X.rows(), size());
  for (int o = 0; o < size(); ++o) out.col(o) = components_[o].log_density(X);
  return out;
}

Vector MixtureModel::log_density(const Eigen::Ref<const Matrix>& X) const {
  Matrix joint = component_log_densities(X);
  for (int o = 0; o < size(); ++o) joint.col(o).array() += log_weights_[o];
  Vector out(X.rows());
  for (int i = 0; i < X.rows(); ++i) out(i) = log_sum_exp(joint.row(i));
  return out;
}

Matrix MixtureModel::log_responsibilities(
    const Eigen::Ref<const Matrix>& X) const {
  Matrix joint = component_log_densities(X);
  for (int o = 0; o < size(); ++o) joint.col(o).array() += log_weights_[o];
  for (int i = 0; i < X.rows(); ++i) {
    joint.row(i).array() -= log_sum_exp(joint.row(i));
  }
  return joint;
}

Matrix MixtureModel::sample(int n, Rng& rng) const {
  std::discrete_distribution<int> pick(weights_.begin(), weights_.end());
  Matrix out(n, dim());
  for (int i = 0; i < n; ++i) {
    out.row(i) = components_[pick(rng)].sample(1, rng);
  }
  return out;
}

std::vector<double> component_rewards(const MixtureModel& m,
                                      const ActiveSampleSet& active,
                                      const Eigen::Ref<const Matrix>& log_resp) {
  if (active.empty()) throw std::invalid_argument("empty active sample set");
  std::vector<double> rewards(m.size());
  for (int o = 0; o < m.size(); ++o) {
    if (!active.weight_valid[o]) {
      rewards[o] = m.state(o).last_reward;  // carried over
      continue;
    }
    const Vector w = active.weights.row(o);
    const double expected =
        (w.array() * (active.log_targets + log_resp.col(o)).array()).sum();
    rewards[o] = expected + m.component(o).entropy();
  }
  return rewards;
}

std::vector<double> update_weights(const std::vector<double>& rewards,
                                   double min_weight) {
  const int k = static_cast<int>(rewards.size());
  const double shift = *std::max_element(rewards.begin(), rewards.end());
  std::vector<double> w(k);
  double sum = 0.0;
  for (int o = 0; o < k; ++o) sum += (w[o] = std::exp(rewards[o] - shift));
  for (double& v : w) v = std::max(v / sum, min_weight);
  sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= sum;
  return w;
}

double elbo_estimate(const MixtureModel& m, const ActiveSampleSet& active) {
  if (active.empty()) throw std::invalid_argument("empty active sample set");
  const Vector log_q = m.log_density(active.X);
  Vector log_w = log_q - active.log_background;
  const double log_norm = log_sum_exp(log_w);
  Vector w = (log_w.array() - log_norm).exp();
  return (w.array() * (active.log_targets - log_q).array()).sum();
}

}  // namespace vips
