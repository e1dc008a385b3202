#include "vips/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vips {

MmdKernel compute_kernel(const Eigen::Ref<const Matrix>& ground_truth,
                         double alpha) {
  const int n = std::min<int>(static_cast<int>(ground_truth.rows()), 2000);
  if (ground_truth.rows() < 2) {
    throw std::invalid_argument("compute_kernel needs at least 2 samples");
  }
  const int d = static_cast<int>(ground_truth.cols());
  MmdKernel kernel;
  kernel.alpha = alpha;
  kernel.scale.resize(d);
  std::vector<double> sq;
  sq.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (int j = 0; j < d; ++j) {
    sq.clear();
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        const double diff = ground_truth(a, j) - ground_truth(b, j);
        sq.push_back(diff * diff);
      }
    }
    auto mid = sq.begin() + sq.size() / 2;
    std::nth_element(sq.begin(), mid, sq.end());
    double median = *mid;
    if (sq.size() % 2 == 0) {
      median = 0.5 * (median + *std::max_element(sq.begin(), mid));
    }
    kernel.scale(j) = median > 0.0 ? median : 1.0;
  }
  return kernel;
}

namespace {
// Mean of k over all pairs of rows (including diagonal for A == B).
double gram_mean(const Eigen::Ref<const Matrix>& A,
                 const Eigen::Ref<const Matrix>& B, const MmdKernel& kernel) {
  const Vector s = kernel.scale / kernel.alpha;
  double total = 0.0;
  for (int i = 0; i < A.rows(); ++i) {
    Matrix diff = B.rowwise() - A.row(i);
    Vector quad = (diff.array().square().matrix() * s);
    total += (-quad.array()).exp().sum();
  }
  return total / (static_cast<double>(A.rows()) * B.rows());
}
}  // namespace

double mmd(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& Y,
           const MmdKernel& kernel) {
  if (X.rows() == 0 || Y.rows() == 0) {
    throw std::invalid_argument("mmd needs non-empty sample sets");
  }
  if (X.cols() != Y.cols() || X.cols() != kernel.scale.size()) {
    throw std::invalid_argument("mmd: dimension mismatch");
  }
  return gram_mean(X, X, kernel) + gram_mean(Y, Y, kernel) -
         2.0 * gram_mean(X, Y, kernel);
}

int modes_discovered(const MixtureModel& m, const std::vector<Vector>& target_means,
                     const std::vector<Matrix>& target_covs) {
  int found = 0;
  for (size_t k = 0; k < target_means.size(); ++k) {
    Eigen::LLT<Matrix> llt(target_covs[k]);
    bool hit = false;
    for (int o = 0; o < m.size() && !hit; ++o) {
      if (m.weight(o) < 1e-3) continue;
      Vector diff = m.component(o).mean() - target_means[k];
      Vector z = llt.matrixL().solve(diff);
      hit = z.squaredNorm() <= 9.0;
    }
    if (hit) ++found;
  }
  return found;
}

void write_samples_csv(const std::string& path,
                       const Eigen::Ref<const Matrix>& X) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  for (int i = 0; i < X.rows(); ++i) {
    for (int j = 0; j < X.cols(); ++j) {
      if (j) out << ',';
      out << X(i, j);
    }
    out << '\n';
  }
}

Matrix read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error("ragged CSV in " + path);
    }
    rows.push_back(std::move(row));
  }
  Matrix X(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) {
      X(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    }
  }
  return X;
}

}  // namespace vips
