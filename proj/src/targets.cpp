#include "vips/targets.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace vips {

Vector TargetDistribution::log_density(const Eigen::Ref<const Matrix>& X) const {
  if (X.cols() != dim_) {
    throw std::invalid_argument("target log_density: dimension mismatch");
  }
  Vector out = log_density_impl(X);
  for (int i = 0; i < out.size(); ++i) {
    if (std::isnan(out(i))) {
      out(i) = -std::numeric_limits<double>::infinity();
      ++nan_warnings_;
    }
  }
  evaluations_ += X.rows();
  return out;
}

Matrix TargetDistribution::sample(int, Rng&) const {
  throw std::logic_error("target has no exact sampler");
}

namespace {
MixtureModel make_random_gmm(int dim, int k, Rng& rng) {
  std::uniform_real_distribution<double> unif(-50.0, 50.0);
  std::normal_distribution<double> normal(0.0, 0.1 * dim);
  std::vector<Gaussian> comps;
  for (int c = 0; c < k; ++c) {
    Vector mean(dim);
    for (int i = 0; i < dim; ++i) mean(i) = unif(rng);
    Matrix a(dim, dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) a(i, j) = normal(rng);
    }
    Matrix cov = a.transpose() * a + Matrix::Identity(dim, dim);
    comps.emplace_back(std::move(mean), std::move(cov));
  }
  return MixtureModel(std::vector<double>(k, 1.0 / k), std::move(comps));
}
}  // namespace

GmmTarget::GmmTarget(int dim, int num_components, Rng& rng)
    : TargetDistribution(dim), mixture_(make_random_gmm(dim, num_components, rng)) {}

Vector GmmTarget::log_density_impl(const Eigen::Ref<const Matrix>& X) const {
  return mixture_.log_density(X);
}

Matrix GmmTarget::sample(int n, Rng& rng) const {
  return mixture_.sample(n, rng);
}

std::pair<double, double> forward_kinematics(
    const Eigen::Ref<const Vector>& theta) {
  if (theta.size() != 10) {
    throw std::invalid_argument("forward_kinematics expects 10 joint angles");
  }
  double x = 0.0, y = 0.0, angle = 0.0;
  for (int i = 0; i < 10; ++i) {
    angle += theta(i);
    x += std::cos(angle);
    y += std::sin(angle);
  }
  return {x, y};
}

PlanarRobotTarget::PlanarRobotTarget(int n_goals) : TargetDistribution(10) {
  if (n_goals == 1) {
    goals_ = {{7.0, 0.0}};
  } else if (n_goals == 4) {
    goals_ = {{7.0, 0.0}, {0.0, 7.0}, {-7.0, 0.0}, {0.0, -7.0}};
  } else {
    throw std::invalid_argument("planar robot target supports 1 or 4 goals");
  }
  prior_variances_ = Vector::Constant(10, 4e-2);
  prior_variances_(0) = 1.0;
}

Vector PlanarRobotTarget::log_density_impl(
    const Eigen::Ref<const Matrix>& X) const {
  constexpr double kLog2Pi = 1.8378770664093454836;
  const double goal_var = 1e-4;
  const double prior_log_norm =
      -0.5 * (10.0 * kLog2Pi + prior_variances_.array().log().sum());
  const double goal_log_norm = -0.5 * (2.0 * kLog2Pi + 2.0 * std::log(goal_var));

  Vector out(X.rows());
  for (int i = 0; i < X.rows(); ++i) {
    const Vector theta = X.row(i);
    const double log_prior =
        prior_log_norm -
        0.5 * (theta.array().square() / prior_variances_.array()).sum();
    auto [x, y] = forward_kinematics(theta);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [gx, gy] : goals_) {
      const double d2 = (x - gx) * (x - gx) + (y - gy) * (y - gy);
      best = std::max(best, goal_log_norm - 0.5 * d2 / goal_var);
    }
    out(i) = log_prior + best;
  }
  return out;
}

LogisticRegressionTarget::LogisticRegressionTarget(int n_data, int dim, Rng& rng)
    : TargetDistribution(dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  features_.resize(n_data, dim);
  for (int i = 0; i < n_data; ++i) {
    for (int j = 0; j < dim; ++j) features_(i, j) = normal(rng);
  }
  // Standardize columns.
  for (int j = 0; j < dim; ++j) {
    const double mean = features_.col(j).mean();
    features_.col(j).array() -= mean;
    const double sd = std::sqrt(features_.col(j).squaredNorm() / n_data);
    if (sd > 0) features_.col(j) /= sd;
  }
  // Hidden weight vector of norm 3 generates labels; 5% are flipped.
  Vector hidden(dim);
  for (int j = 0; j < dim; ++j) hidden(j) = normal(rng);
  hidden *= 3.0 / hidden.norm();
  labels_.resize(n_data);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < n_data; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-features_.row(i).dot(hidden)));
    int y = unif(rng) < p ? 1 : 0;
    if (unif(rng) < 0.05) y = 1 - y;
    labels_(i) = y;
  }
}

Vector LogisticRegressionTarget::log_density_impl(
    const Eigen::Ref<const Matrix>& X) const {
  constexpr double kLog2Pi = 1.8378770664093454836;
  const int d = dim();
  const double prior_log_norm = -0.5 * d * (kLog2Pi + std::log(100.0));
  Vector out(X.rows());
  for (int i = 0; i < X.rows(); ++i) {
    const Vector w = X.row(i);
    Vector z = features_ * w;
    double ll = 0.0;
    for (int n = 0; n < z.size(); ++n) {
      const double s = labels_(n) == 1 ? z(n) : -z(n);
      // log sigma(s) = -log(1 + exp(-s)), stable on both tails
      ll += s >= 0 ? -std::log1p(std::exp(-s)) : s - std::log1p(std::exp(s));
    }
    out(i) = ll + prior_log_norm - 0.5 * w.squaredNorm() / 100.0;
  }
  return out;
}

struct ExternalProcessTarget::Pipe {
  pid_t pid = -1;
  FILE* to_child = nullptr;
  FILE* from_child = nullptr;

  ~Pipe() {
    if (to_child) fclose(to_child);
    if (from_child) fclose(from_child);
    if (pid > 0) {
      int status = 0;
      waitpid(pid, &status, 0);
    }
  }
};

ExternalProcessTarget::ExternalProcessTarget(int dim, const std::string& command)
    : TargetDistribution(dim), pipe_(std::make_unique<Pipe>()) {
  int in_fd[2], out_fd[2];
  if (pipe(in_fd) != 0 || pipe(out_fd) != 0) {
    throw std::runtime_error("failed to create pipes for external target");
  }
  const pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("fork failed for external target");
  if (pid == 0) {
    dup2(in_fd[0], STDIN_FILENO);
    dup2(out_fd[1], STDOUT_FILENO);
    close(in_fd[0]);
    close(in_fd[1]);
    close(out_fd[0]);
    close(out_fd[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_fd[0]);
  close(out_fd[1]);
  pipe_->pid = pid;
  pipe_->to_child = fdopen(in_fd[1], "w");
  pipe_->from_child = fdopen(out_fd[0], "r");
  if (!pipe_->to_child || !pipe_->from_child) {
    throw std::runtime_error("failed to attach pipes for external target");
  }
}

ExternalProcessTarget::~ExternalProcessTarget() = default;

Vector ExternalProcessTarget::log_density_impl(
    const Eigen::Ref<const Matrix>& X) const {
  Vector out(X.rows());
  for (int i = 0; i < X.rows(); ++i) {
    const long long id = next_id_++;
    std::ostringstream line;
    line.precision(17);
    line << id;
    for (int j = 0; j < X.cols(); ++j) line << ' ' << X(i, j);
    line << '\n';
    const std::string payload = line.str();
    if (fputs(payload.c_str(), pipe_->to_child) == EOF ||
        fflush(pipe_->to_child) != 0) {
      throw std::runtime_error("external target: write failed");
    }
    char buf[256];
    if (!fgets(buf, sizeof buf, pipe_->from_child)) {
      throw std::runtime_error("external target: child closed the stream");
    }
    long long echoed = -1;
    double value = 0.0;
    if (sscanf(buf, "%lld %lf", &echoed, &value) != 2 || echoed != id) {
      throw std::runtime_error("external target: malformed response '" +
                               std::string(buf) + "'");
    }
    out(i) = value;
  }
  return out;
}

}  // namespace vips
