#pragma once

#include <string>
#include <vector>

#include "vips/mixture.hpp"

namespace vips {

/// Squared-exponential kernel k(x, y) = exp(-(1/alpha) (x-y)^T S (x-y))
/// with S diagonal, built from per-dimension medians of squared distances
/// within a ground-truth sample set.
struct MmdKernel {
  Vector scale;  // diagonal of S, all entries > 0
  double alpha = 1.0;
};

/// Per-dimension median of squared pairwise differences over the
/// ground-truth set (subsampled to at most 2000 rows); zero medians fall
/// back to 1.
MmdKernel compute_kernel(const Eigen::Ref<const Matrix>& ground_truth,
                         double alpha);

/// Biased V-statistic MMD between two sample sets, diagonal terms included.
double mmd(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Y,
           const MmdKernel& kernel);

/// Number of target components whose mean lies within Mahalanobis distance 3
/// (under the target covariance) of some learned component mean of weight
/// at least 1e-3.
int modes_discovered(const MixtureModel& m, const std::vector<Vector>& target_means,
                     const std::vector<Matrix>& target_covs);

/// Headerless CSV of samples, one row per sample.
void write_samples_csv(const std::string& path, const Eigen::Ref<const Matrix>& X);
Matrix read_samples_csv(const std::string& path);

}  // namespace vips
