// Command-line front end: `run` learns a Gaussian mixture approximation of
// a chosen target density, `sample` draws from a saved model, `eval-mmd`
// scores a saved model against ground-truth samples.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "vips/evaluation.hpp"
#include "vips/runner.hpp"

namespace {

std::unique_ptr<vips::TargetDistribution> make_target(
    const std::string& name, int dim, int target_components, int num_data,
    std::uint64_t target_seed, const std::string& command) {
  vips::Rng rng = vips::substream(target_seed, 0, 0, vips::kPurposeTarget);
  if (name == "gmm") {
    return std::make_unique<vips::GmmTarget>(dim, target_components, rng);
  }
  if (name == "planar1") return std::make_unique<vips::PlanarRobotTarget>(1);
  if (name == "planar4") return std::make_unique<vips::PlanarRobotTarget>(4);
  if (name == "logreg") {
    return std::make_unique<vips::LogisticRegressionTarget>(num_data, dim, rng);
  }
  if (name == "external") {
    if (command.empty()) {
      throw CLI::ValidationError("--command is required for --target external");
    }
    return std::make_unique<vips::ExternalProcessTarget>(dim, command);
  }
  throw CLI::ValidationError("unknown target '" + name + "'");
}

double default_cov_scale(const std::string& target) {
  if (target == "gmm") return 1000.0;
  if (target == "logreg") return 100.0;
  return 1.0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian mixture model variational inference"};
  app.require_subcommand(1);

  // --- run ---
  auto* run_cmd = app.add_subcommand("run", "optimize a mixture for a target");
  std::string target_name, config_path, out_dir, command, dissim;
  int dim = 2, target_components = 10, num_data = 100;
  std::uint64_t seed = 0;
  bool has_target_seed = false;
  std::uint64_t target_seed = 0;
  long long max_fevals = 0;
  int max_iterations = 0;
  bool no_adapt = false, no_reuse = false, basic = false;
  run_cmd->add_option("--target", target_name, "target density")
      ->required()
      ->check(CLI::IsMember({"gmm", "planar1", "planar4", "logreg", "external"}));
  run_cmd->add_option("--dim", dim, "problem dimension");
  run_cmd->add_option("--seed", seed, "run seed");
  run_cmd->add_option("--target-seed", target_seed,
                      "seed of the synthetic target (defaults to --seed)")
      ->each([&](const std::string&) { has_target_seed = true; });
  run_cmd->add_option("--config", config_path, "JSON config file");
  auto* fevals_opt =
      run_cmd->add_option("--max-fevals", max_fevals, "evaluation budget");
  auto* iters_opt = run_cmd->add_option("--max-iterations", max_iterations,
                                        "iteration budget");
  run_cmd->add_option("--out", out_dir, "output directory")->required();
  run_cmd->add_flag("--no-adapt", no_adapt, "fix the number of components");
  run_cmd->add_flag("--no-reuse", no_reuse, "disable sample reuse");
  auto* dissim_opt =
      run_cmd->add_option("--dissimilarity", dissim, "sample selection mode")
          ->check(CLI::IsMember({"mahalanobis", "kl-fwd", "kl-rev", "uniform"}));
  run_cmd->add_flag("--basic", basic, "run the reference single-loop variant");
  run_cmd->add_option("--target-components", target_components,
                      "components of the synthetic mixture target");
  run_cmd->add_option("--num-data", num_data,
                      "observations of the synthetic regression target");
  run_cmd->add_option("--command", command,
                      "shell command serving an external target");

  // --- eval-mmd ---
  auto* mmd_cmd = app.add_subcommand("eval-mmd",
                                     "discrepancy to ground-truth samples");
  std::string model_path, gt_path;
  double alpha = 1.0;
  int n_samples = 2000;
  std::uint64_t sample_seed = 0;
  mmd_cmd->add_option("--model", model_path, "model.json")->required();
  mmd_cmd->add_option("--ground-truth", gt_path, "ground-truth CSV")->required();
  mmd_cmd->add_option("--alpha", alpha, "kernel bandwidth divisor")->required();
  mmd_cmd->add_option("-n,--num-samples", n_samples, "draws from the model");
  mmd_cmd->add_option("--seed", sample_seed, "sampling seed");

  // --- sample ---
  auto* sample_cmd = app.add_subcommand("sample", "draw from a saved model");
  std::string sample_model_path;
  int sample_n = 1;
  std::uint64_t sample_cmd_seed = 0;
  sample_cmd->add_option("--model", sample_model_path, "model.json")->required();
  sample_cmd->add_option("-n", sample_n, "number of draws")->required();
  sample_cmd->add_option("--seed", sample_cmd_seed, "sampling seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      if (target_name == "planar1" || target_name == "planar4") dim = 10;
      vips::VipsConfig cfg;
      cfg.init_cov_scale = default_cov_scale(target_name);
      if (!config_path.empty()) cfg = vips::load_config(config_path, cfg);
      cfg.seed = seed;
      if (*fevals_opt) cfg.max_fevals = max_fevals;
      if (*iters_opt) cfg.max_iterations = max_iterations;
      if (no_adapt) cfg.adaptation = false;
      if (no_reuse) cfg.reuse = false;
      if (*dissim_opt) cfg.dissimilarity = vips::parse_dissimilarity(dissim);
      cfg.validate();

      auto target =
          make_target(target_name, dim, target_components, num_data,
                      has_target_seed ? target_seed : seed, command);

      vips::RunResult result =
          basic ? vips::run_basic(cfg, *target) : vips::run(cfg, *target);

      std::filesystem::create_directories(out_dir);
      const std::filesystem::path dir(out_dir);
      vips::write_model_json((dir / "model.json").string(), result.model);
      vips::write_log_csv((dir / "log.csv").string(), result.log);
      vips::Rng sample_rng =
          vips::substream(cfg.seed, 0, 0, vips::kPurposeFinalSamples);
      vips::write_samples_csv((dir / "samples.csv").string(),
                              result.model.sample(2000, sample_rng));
      if (!result.error.empty()) {
        std::cerr << "run aborted: " << result.error << '\n';
        return 1;
      }
      return 0;
    }

    if (*mmd_cmd) {
      const vips::MixtureModel m = vips::read_model_json(model_path);
      const vips::Matrix gt = vips::read_samples_csv(gt_path);
      const vips::MmdKernel kernel = vips::compute_kernel(gt, alpha);
      vips::Rng rng =
          vips::substream(sample_seed, 0, 0, vips::kPurposeFinalSamples);
      const vips::Matrix X = m.sample(n_samples, rng);
      std::cout.precision(17);
      std::cout << vips::mmd(X, gt, kernel) << '\n';
      return 0;
    }

    if (*sample_cmd) {
      const vips::MixtureModel m = vips::read_model_json(sample_model_path);
      vips::Rng rng =
          vips::substream(sample_cmd_seed, 0, 0, vips::kPurposeFinalSamples);
      const vips::Matrix X = m.sample(sample_n, rng);
      std::cout.precision(17);
      for (int i = 0; i < X.rows(); ++i) {
        for (int j = 0; j < X.cols(); ++j) {
          if (j) std::cout << ',';
          std::cout << X(i, j);
        }
        std::cout << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
