#pragma once

#include <random>

#include "vips/targets.hpp"

namespace vips::testing {

inline Matrix random_spd(int d, Rng& rng, double eig_lo = 0.5,
                         double eig_hi = 3.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) a(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  std::uniform_real_distribution<double> unif(eig_lo, eig_hi);
  Vector eig(d);
  for (int i = 0; i < d; ++i) eig(i) = unif(rng);
  return q * eig.asDiagonal() * q.transpose();
}

inline Vector random_vector(int d, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = normal(rng);
  return v;
}

/// Target whose unnormalized log density is a single Gaussian.
class GaussianTarget : public TargetDistribution {
 public:
  explicit GaussianTarget(Gaussian g)
      : TargetDistribution(g.dim()), g_(std::move(g)) {}
  const Gaussian& gaussian() const { return g_; }
  bool has_exact_sampler() const override { return true; }
  Matrix sample(int n, Rng& rng) const override { return g_.sample(n, rng); }

 protected:
  Vector log_density_impl(const Eigen::Ref<const Matrix>& X) const override {
    return g_.log_density(X);
  }

 private:
  Gaussian g_;
};

/// Target equal to a fixed mixture density (optionally shifted by log c).
class MixtureTarget : public TargetDistribution {
 public:
  explicit MixtureTarget(MixtureModel m, double log_offset = 0.0)
      : TargetDistribution(m.dim()), m_(std::move(m)), log_offset_(log_offset) {}
  const MixtureModel& mixture() const { return m_; }
  bool has_exact_sampler() const override { return true; }
  Matrix sample(int n, Rng& rng) const override { return m_.sample(n, rng); }

 protected:
  Vector log_density_impl(const Eigen::Ref<const Matrix>& X) const override {
    return m_.log_density(X).array() + log_offset_;
  }

 private:
  MixtureModel m_;
  double log_offset_;
};

}  // namespace vips::testing
