#include "vips/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace vips {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("config: " + what);
}

int worker_count() {
  const char* env = std::getenv("VIPS_THREADS");
  if (!env) return 1;
  const int v = std::atoi(env);
  return v <= 0 ? 1 : v;
}

}  // namespace

void VipsConfig::validate() const {
  require(epsilon_min > 0 && epsilon_min <= epsilon_max,
          "need 0 < epsilon_min <= epsilon_max");
  require(n_des_per_dim > 0, "n_des_per_dim must be positive");
  require(n_reuse_per_dim >= 0, "n_reuse_per_dim must be non-negative");
  require(n_add >= 1, "n_add must be at least 1");
  require(n_del >= 1, "n_del must be at least 1");
  require(min_weight > 0 && min_weight < 1, "min_weight must be in (0, 1)");
  require(initial_weight > 0 && initial_weight < 1,
          "initial_weight must be in (0, 1)");
  require(!delta_cycle.empty(), "delta_cycle must not be empty");
  for (double d : delta_cycle) require(d > 0, "delta values must be positive");
  require(kappa_min > 0 && kappa_min <= kappa_max,
          "need 0 < kappa_min <= kappa_max");
  require(max_fevals > 0, "max_fevals must be positive");
  require(max_iterations >= 0, "max_iterations must be non-negative");
  require(init_components >= 1, "init_components must be at least 1");
  require(init_mean_scale >= 0, "init_mean_scale must be non-negative");
  require(init_cov_scale > 0, "init_cov_scale must be positive");
}

Dissimilarity parse_dissimilarity(const std::string& name) {
  if (name == "mahalanobis") return Dissimilarity::kMahalanobis;
  if (name == "kl-fwd") return Dissimilarity::kForwardKl;
  if (name == "kl-rev") return Dissimilarity::kReverseKl;
  if (name == "uniform") return Dissimilarity::kUniform;
  throw std::invalid_argument("unknown dissimilarity '" + name + "'");
}

VipsConfig load_config(const std::string& path, VipsConfig base) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config " + path);
  nlohmann::json j;
  in >> j;
  require(j.is_object(), "top level must be an object");

  for (const auto& [key, value] : j.items()) {
    if (key == "epsilon_min") base.epsilon_min = value.get<double>();
    else if (key == "epsilon_max") base.epsilon_max = value.get<double>();
    else if (key == "n_des_per_dim") base.n_des_per_dim = value.get<int>();
    else if (key == "n_reuse_per_dim") base.n_reuse_per_dim = value.get<int>();
    else if (key == "n_add") base.n_add = value.get<int>();
    else if (key == "n_del") base.n_del = value.get<int>();
    else if (key == "min_weight") base.min_weight = value.get<double>();
    else if (key == "initial_weight") base.initial_weight = value.get<double>();
    else if (key == "delta_cycle")
      base.delta_cycle = value.get<std::vector<double>>();
    else if (key == "kappa_min") base.kappa_min = value.get<double>();
    else if (key == "kappa_max") base.kappa_max = value.get<double>();
    else if (key == "max_fevals") base.max_fevals = value.get<long long>();
    else if (key == "max_iterations") base.max_iterations = value.get<int>();
    else if (key == "seed") base.seed = value.get<std::uint64_t>();
    else if (key == "dissimilarity")
      base.dissimilarity = parse_dissimilarity(value.get<std::string>());
    else if (key == "reuse") base.reuse = value.get<bool>();
    else if (key == "adaptation") base.adaptation = value.get<bool>();
    else if (key == "init_components") base.init_components = value.get<int>();
    else if (key == "init_mean_scale")
      base.init_mean_scale = value.get<double>();
    else if (key == "init_cov_scale") base.init_cov_scale = value.get<double>();
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  base.validate();
  return base;
}

Rng substream(std::uint64_t seed, std::uint64_t iteration,
              std::uint64_t component, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration),
                    static_cast<std::uint32_t>(component),
                    static_cast<std::uint32_t>(purpose)};
  return Rng(seq);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ComponentUpdate {
  std::optional<Gaussian> updated;  // empty when the update was skipped
  double epsilon_after = 0.0;
  double kappa_after = 0.0;
};

/// Fit the quadratic surrogate to y = log target + log responsibility over
/// the active set, solve the trust-region step, and decide the bound
/// adaptation by re-estimating the component objective after the step. Pure
/// function of its inputs; safe to run for all components in parallel.
ComponentUpdate update_component(const MixtureModel& m, int o,
                                 const ActiveSampleSet& active,
                                 const Eigen::Ref<const Matrix>& log_resp,
                                 const VipsConfig& cfg) {
  const Gaussian& cur = m.component(o);
  const ComponentState& cs = m.state(o);
  ComponentUpdate out{std::nullopt, cs.epsilon, cs.kappa};
  if (active.empty() || !active.weight_valid[o]) return out;

  const Vector y_all = active.log_targets + log_resp.col(o);
  const Vector w_all = active.weights.row(o);
  std::vector<int> rows;
  for (int i = 0; i < y_all.size(); ++i) {
    if (std::isfinite(y_all(i))) rows.push_back(i);
  }
  if (static_cast<int>(rows.size()) < feature_count(m.dim())) return out;

  const int n = static_cast<int>(rows.size());
  Matrix X(n, m.dim());
  Vector y(n), w(n), bg(n);
  for (int k = 0; k < n; ++k) {
    X.row(k) = active.X.row(rows[k]);
    y(k) = y_all(rows[k]);
    w(k) = w_all(rows[k]);
    bg(k) = active.log_background(rows[k]);
  }
  const double w_sum = w.sum();
  if (!(w_sum > 0)) return out;
  w /= w_sum;

  RidgeState rs{cs.kappa};
  std::optional<QuadraticSurrogate> sur;
  for (int attempt = 0; attempt < 6; ++attempt) {
    sur = fit_weighted_quadratic(X, y, w, rs.kappa, cur);
    rs = adapt_ridge(rs, sur.has_value(), cfg.kappa_min, cfg.kappa_max);
    if (sur) break;
  }
  out.kappa_after = rs.kappa;
  if (!sur) return out;  // skipped update leaves epsilon untouched

  std::optional<Gaussian> updated;
  try {
    updated.emplace(gva_update(cur, *sur, cs.epsilon));
  } catch (const std::runtime_error&) {
    return out;  // infeasible step: skip, keep epsilon
  }

  // Importance-sampled component objective on the shared active set, before
  // and after the step; the bound grows only when the step helped.
  const double before = w.dot(y) + cur.entropy();
  Vector log_w2 = updated->log_density(X) - bg;
  const double norm2 = log_sum_exp(log_w2);
  bool improved = false;
  if (std::isfinite(norm2)) {
    const Vector w2 = (log_w2.array() - norm2).exp();
    improved = w2.dot(y) + updated->entropy() >= before;
  }
  out.epsilon_after =
      adapt_kl_bound(cs.epsilon, improved, cfg.epsilon_min, cfg.epsilon_max);
  out.updated = std::move(updated);
  return out;
}

void update_all_components(MixtureModel& m, const ActiveSampleSet& active,
                           const Eigen::Ref<const Matrix>& log_resp,
                           const VipsConfig& cfg) {
  const int k = m.size();
  std::vector<ComponentUpdate> results(k);
  const int workers = std::min(worker_count(), k);
  if (workers > 1) {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (int o = t; o < k; o += workers) {
          results[o] = update_component(m, o, active, log_resp, cfg);
        }
      });
    }
    for (auto& th : pool) th.join();
  } else {
    for (int o = 0; o < k; ++o) {
      results[o] = update_component(m, o, active, log_resp, cfg);
    }
  }
  // All updates were computed against the same snapshot; commit together.
  for (int o = 0; o < k; ++o) {
    m.state(o).epsilon = results[o].epsilon_after;
    m.state(o).kappa = results[o].kappa_after;
    if (results[o].updated) m.set_component(o, std::move(*results[o].updated));
  }
}

TargetFn wrap(const TargetDistribution& target) {
  return [&target](const Eigen::Ref<const Matrix>& X) {
    return target.log_density(X);
  };
}

IterationStats collect_stats(const MixtureModel& m,
                             const ActiveSampleSet& active,
                             const std::vector<int>& n_new, int iteration,
                             long long fevals, double seconds) {
  IterationStats stats;
  stats.iteration = iteration;
  stats.fevals = fevals;
  stats.num_components = m.size();
  stats.elbo = active.empty() ? kNaN : elbo_estimate(m, active);
  stats.seconds = seconds;
  for (int o = 0; o < m.size(); ++o) {
    ComponentStats c;
    c.weight = m.weight(o);
    c.entropy = m.component(o).entropy();
    c.epsilon = m.state(o).epsilon;
    c.n_eff = active.empty() ? 0.0 : active.n_eff(o);
    c.n_new = o < static_cast<int>(n_new.size()) ? n_new[o] : 0;
    stats.components.push_back(c);
  }
  return stats;
}

}  // namespace

IterationStats run_iteration(OptimizerState& state, const VipsConfig& cfg,
                             const TargetDistribution& target) {
  const auto t0 = std::chrono::steady_clock::now();
  const int it = state.iteration;
  const int d = target.dim();
  MixtureModel& m = state.mixture;
  const TargetFn tf = wrap(target);

  if (cfg.adaptation) {
    Rng add_rng = substream(cfg.seed, it, 0, kPurposeAdd);
    maybe_add_component(m, state.adaptation, state.db, tf, it, add_rng);
    delete_components(m, state.adaptation);
  }

  ActiveSampleSet active;
  if (cfg.reuse) {
    Rng select_rng = substream(cfg.seed, it, 0, kPurposeSelect);
    active = select_samples(state.db, m, cfg.n_reuse_per_dim * d,
                            cfg.dissimilarity, select_rng);
    if (!active.empty()) compute_weights(active, state.db, m);
  } else {
    active.X = Matrix(0, d);
    active.log_targets = Vector(0);
  }

  std::vector<Rng> draw_rngs;
  draw_rngs.reserve(m.size());
  for (int o = 0; o < m.size(); ++o) {
    draw_rngs.push_back(substream(cfg.seed, it, o, kPurposeDraw));
  }
  const std::vector<int> n_new = sample_where_needed(
      state.db, active, m, cfg.n_des_per_dim * d, tf,
      [&draw_rngs](int o) -> Rng& { return draw_rngs[o]; });

  if (!active.empty()) {
    // Weight update from the iteration-start responsibility snapshot.
    const Matrix log_resp = m.log_responsibilities(active.X);
    const std::vector<double> rewards = component_rewards(m, active, log_resp);
    for (int o = 0; o < m.size(); ++o) m.state(o).last_reward = rewards[o];
    m.set_weights(update_weights(rewards, cfg.min_weight));

    // Interleaved E-step: the new weights feed one shared responsibility
    // snapshot that every component update of this iteration uses.
    const Matrix log_resp_post = m.log_responsibilities(active.X);
    update_all_components(m, active, log_resp_post, cfg);
    update_deletion_trackers(m, cfg.min_weight);
  }

  ++state.iteration;
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return collect_stats(m, active, n_new, it, target.evaluations(), seconds);
}

MixtureModel make_initial_mixture(const VipsConfig& cfg, int dim) {
  Rng rng = substream(cfg.seed, 0, 0, kPurposeInit);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Gaussian> comps;
  const Matrix cov = cfg.init_cov_scale * Matrix::Identity(dim, dim);
  for (int o = 0; o < cfg.init_components; ++o) {
    Vector mean = Vector::Zero(dim);
    if (cfg.init_mean_scale > 0) {
      for (int i = 0; i < dim; ++i) mean(i) = cfg.init_mean_scale * normal(rng);
    }
    comps.emplace_back(std::move(mean), cov);
  }
  MixtureModel m(std::vector<double>(cfg.init_components,
                                     1.0 / cfg.init_components),
                 std::move(comps));
  for (int o = 0; o < m.size(); ++o) {
    m.state(o).epsilon =
        std::clamp(1.0, cfg.epsilon_min, cfg.epsilon_max);
    m.state(o).kappa = std::clamp(1e-10, cfg.kappa_min, cfg.kappa_max);
  }
  return m;
}

RunResult run(const VipsConfig& cfg, const TargetDistribution& target) {
  cfg.validate();
  OptimizerState state{make_initial_mixture(cfg, target.dim()),
                       SampleDatabase(target.dim()),
                       AdaptationState{cfg.delta_cycle, 0, cfg.n_add,
                                       cfg.n_del, cfg.initial_weight,
                                       cfg.min_weight}};
  RunResult result{state.mixture, {}, ""};
  for (int it = 0; it < cfg.max_iterations; ++it) {
    if (target.evaluations() >= cfg.max_fevals) break;
    try {
      result.log.push_back(run_iteration(state, cfg, target));
    } catch (const std::exception& e) {
      result.error = e.what();
      break;
    }
  }
  result.model = state.mixture;
  return result;
}

RunResult run_basic(const VipsConfig& cfg, const TargetDistribution& target) {
  cfg.validate();
  const int d = target.dim();
  MixtureModel m = make_initial_mixture(cfg, d);
  const TargetFn tf = wrap(target);
  RunResult result{m, {}, ""};

  for (int it = 0; it < cfg.max_iterations; ++it) {
    if (target.evaluations() >= cfg.max_fevals) break;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      // Fresh samples only; the database does not outlive the iteration.
      SampleDatabase db(d);
      ActiveSampleSet active;
      active.X = Matrix(0, d);
      active.log_targets = Vector(0);
      std::vector<Rng> draw_rngs;
      for (int o = 0; o < m.size(); ++o) {
        draw_rngs.push_back(substream(cfg.seed, it, o, kPurposeDraw));
      }
      const std::vector<int> n_new = sample_where_needed(
          db, active, m, cfg.n_des_per_dim * d, tf,
          [&draw_rngs](int o) -> Rng& { return draw_rngs[o]; });

      const Matrix log_resp = m.log_responsibilities(active.X);
      update_all_components(m, active, log_resp, cfg);

      // Weight update after the component M-step, on re-weighted samples.
      compute_weights(active, db, m);
      const Matrix log_resp2 = m.log_responsibilities(active.X);
      const std::vector<double> rewards =
          component_rewards(m, active, log_resp2);
      for (int o = 0; o < m.size(); ++o) m.state(o).last_reward = rewards[o];
      m.set_weights(update_weights(rewards, cfg.min_weight));

      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      result.log.push_back(
          collect_stats(m, active, n_new, it, target.evaluations(), seconds));
    } catch (const std::exception& e) {
      result.error = e.what();
      break;
    }
  }
  result.model = m;
  return result;
}

void write_model_json(const std::string& path, const MixtureModel& m) {
  nlohmann::json j;
  j["version"] = 1;
  j["dimension"] = m.dim();
  j["weights"] = m.weights();
  j["components"] = nlohmann::json::array();
  for (int o = 0; o < m.size(); ++o) {
    const Gaussian& g = m.component(o);
    nlohmann::json c;
    c["mean"] = std::vector<double>(g.mean().data(),
                                    g.mean().data() + g.mean().size());
    auto rows = nlohmann::json::array();
    for (int i = 0; i < m.dim(); ++i) {
      const Vector row = g.covariance().row(i);
      rows.push_back(std::vector<double>(row.data(), row.data() + m.dim()));
    }
    c["covariance"] = rows;
    j["components"].push_back(std::move(c));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

MixtureModel read_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  in >> j;
  const int d = j.at("dimension").get<int>();
  const auto weights = j.at("weights").get<std::vector<double>>();
  std::vector<Gaussian> comps;
  for (const auto& c : j.at("components")) {
    const auto mean = c.at("mean").get<std::vector<double>>();
    Vector mu = Eigen::Map<const Vector>(mean.data(), d);
    Matrix cov(d, d);
    const auto& rows = c.at("covariance");
    for (int i = 0; i < d; ++i) {
      const auto row = rows.at(i).get<std::vector<double>>();
      cov.row(i) = Eigen::Map<const Vector>(row.data(), d);
    }
    comps.emplace_back(std::move(mu), std::move(cov));
  }
  return MixtureModel(weights, std::move(comps));
}

void write_log_csv(const std::string& path,
                   const std::vector<IterationStats>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "iter,fevals,elbo,num_components,seconds\n";
  for (const auto& s : log) {
    out << s.iteration << ',' << s.fevals << ',' << s.elbo << ','
        << s.num_components << ',' << s.seconds << '\n';
  }
}

}  // namespace vips
