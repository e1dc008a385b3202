#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>

#include "vips/mixture.hpp"

namespace vips {

/// Unnormalized target density with an evaluation counter. Log densities
/// are pure functions of (x, seed); NaN values from the underlying model
/// are converted to -inf and counted.
class TargetDistribution {
 public:
  virtual ~TargetDistribution() = default;

  int dim() const { return dim_; }
  long long evaluations() const { return evaluations_.load(); }
  long long nan_warnings() const { return nan_warnings_.load(); }

  /// Batched log p~(x), one value per row; increments the counter by the
  /// batch size.
  Vector log_density(const Eigen::Ref<const Matrix>& X) const;

  virtual bool has_exact_sampler() const { return false; }
  virtual Matrix sample(int n, Rng& rng) const;

 protected:
  explicit TargetDistribution(int dim) : dim_(dim) {}
  virtual Vector log_density_impl(const Eigen::Ref<const Matrix>& X) const = 0;

 private:
  int dim_;
  mutable std::atomic<long long> evaluations_{0};
  mutable std::atomic<long long> nan_warnings_{0};
};

/// Random equal-weight GMM target: means uniform in [-50, 50]^D, covariances
/// A^T A + I with A entries N(0, (0.1 D)^2). Exact sampling available.
class GmmTarget : public TargetDistribution {
 public:
  GmmTarget(int dim, int num_components, Rng& rng);

  const MixtureModel& mixture() const { return mixture_; }
  bool has_exact_sampler() const override { return true; }
  Matrix sample(int n, Rng& rng) const override;

 protected:
  Vector log_density_impl(const Eigen::Ref<const Matrix>& X) const override;

 private:
  MixtureModel mixture_;
};

/// End-effector position of a 10-link planar arm with unit links.
std::pair<double, double> forward_kinematics(const Eigen::Ref<const Vector>& theta);

/// Posterior over joint angles of the planar arm: smoothness prior (first
/// joint variance 1, the rest 4e-2) times a Cartesian goal likelihood with
/// variance 1e-4 per axis. With four goals the likelihood is the maximum
/// over the per-goal Gaussians, taken in log space.
class PlanarRobotTarget : public TargetDistribution {
 public:
  explicit PlanarRobotTarget(int n_goals);

 protected:
  Vector log_density_impl(const Eigen::Ref<const Matrix>& X) const override;

 private:
  std::vector<std::pair<double, double>> goals_;
  Vector prior_variances_;
};

/// Bayesian logistic regression posterior over weights, on synthetic
/// standardized features with labels from a hidden weight vector
/// (norm 3, 5% label noise). Prior N(0, 100 I).
class LogisticRegressionTarget : public TargetDistribution {
 public:
  LogisticRegressionTarget(int n_data, int dim, Rng& rng);

  const Matrix& features() const { return features_; }
  const Eigen::VectorXi& labels() const { return labels_; }

 protected:
  Vector log_density_impl(const Eigen::Ref<const Matrix>& X) const override;

 private:
  Matrix features_;        // n_data x dim, standardized
  Eigen::VectorXi labels_; // 0/1
};

/// Target served by an external process over a line protocol: the client
/// writes "id v1 ... vD\n" per point and reads back "id value\n".
class ExternalProcessTarget : public TargetDistribution {
 public:
  ExternalProcessTarget(int dim, const std::string& command);
  ~ExternalProcessTarget() override;

  ExternalProcessTarget(const ExternalProcessTarget&) = delete;
  ExternalProcessTarget& operator=(const ExternalProcessTarget&) = delete;

 protected:
  Vector log_density_impl(const Eigen::Ref<const Matrix>& X) const override;

 private:
  struct Pipe;
  std::unique_ptr<Pipe> pipe_;
  mutable long long next_id_ = 0;
};

}  // namespace vips
