#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dcd/experiment.hpp"
#include "dcd/verification.hpp"

using namespace dcd;
namespace fs = std::filesystem;

namespace {

ExperimentConfig load_experiment(const std::string& config_path, long long seed, const std::string& out_dir) {
  Config cfg = config_path.empty() ? Config{} : Config::parse_file(config_path);
  if (seed >= 0) cfg.set("run.seed", std::to_string(seed));
  if (!out_dir.empty()) cfg.set("run.out_dir", out_dir);
  return ExperimentConfig::from(cfg);
}

int report(const std::vector<PropertyResult>& results) {
  int failures = 0;
  for (const PropertyResult& r : results) {
    std::printf("%s,%.10g,%.10g,%s\n", r.name.c_str(), r.value, r.tolerance, r.pass ? "PASS" : "FAIL");
    if (!r.pass) ++failures;
  }
  return failures;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-based model training with diffusion contrastive divergence"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint, out_base;
  long long seed = -1;

  auto* train = app.add_subcommand("train", "train a model per the config");
  train->add_option("--config", config_path, "experiment config file")->required();
  train->add_option("--seed", seed, "override run.seed");
  train->add_option("--out-dir", out_dir, "override run.out_dir");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint (SM loss and optional RMSE sweep)");
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  eval->add_option("--config", config_path, "experiment config file")->required();
  eval->add_option("--seed", seed, "override run.seed");

  std::vector<double> sigmas;
  auto* den = app.add_subcommand("denoise", "denoising RMSE sweep on the config's dataset");
  den->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  den->add_option("--config", config_path, "experiment config file")->required();
  den->add_option("--sigma", sigmas, "noise levels (default 0.3 0.6 0.9)");
  den->add_option("--seed", seed, "override run.seed");

  double lo = -4.0, hi = 4.0;
  Index resolution = 100;
  auto* grid = app.add_subcommand("grid", "export exp(f) on a uniform grid (csv + pgm)");
  grid->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  grid->add_option("--out", out_base, "output base path")->required();
  grid->add_option("--lo", lo, "lower bound of the square window");
  grid->add_option("--hi", hi, "upper bound of the square window");
  grid->add_option("--resolution", resolution, "cells per side");

  bool quick = false;
  long long vseed = 0;
  auto* verify = app.add_subcommand("verify", "run the divergence-theory verification suite");
  verify->add_flag("--quick", quick, "smaller sample sizes");
  verify->add_option("--seed", vseed, "rng seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      ExperimentConfig e = load_experiment(config_path, seed, out_dir);
      RunRecord rec = run_train(e);
      nlohmann::json j;
      j["diverged"] = rec.diverged;
      if (std::isfinite(rec.final_sm))
        j["final_sm_loss"] = rec.final_sm;
      else
        j["final_sm_loss"] = "+inf";
      j["total_wall_s"] = rec.total_wall_s;
      if (!rec.checkpoint_path.empty()) j["checkpoint"] = rec.checkpoint_path;
      std::cout << j.dump(2) << '\n';
      return rec.diverged ? 2 : 0;
    }
    if (*eval || *den) {
      ExperimentConfig e = load_experiment(config_path, seed, "");
      if (*den) e.eval.denoise_sigmas = sigmas.empty() ? std::vector<double>{0.3, 0.6, 0.9} : sigmas;
      EvalMetrics m = run_eval(checkpoint, e);
      nlohmann::json j;
      if (std::isfinite(m.sm_loss))
        j["sm_loss"] = m.sm_loss;
      else
        j["sm_loss"] = "+inf";
      for (const auto& [s, rmse] : m.denoise_rmse) j["denoise_rmse"][std::to_string(s)] = rmse;
      std::cout << j.dump(2) << '\n';
      return 0;
    }
    if (*grid) {
      export_grid(checkpoint, lo, hi, resolution, out_base);
      std::cout << "wrote " << out_base << ".csv and " << out_base << ".pgm\n";
      return 0;
    }
    if (*verify) {
      Rng rng(static_cast<std::uint64_t>(vseed));
      std::vector<PropertyResult> all;
      auto absorb = [&](std::vector<PropertyResult> v) {
        for (auto& r : v) all.push_back(std::move(r));
      };
      absorb(verify_theorem1(quick ? 30 : 100, rng));
      absorb(verify_gradients(quick ? 4 : 10, 1e-5, rng));
      absorb(verify_identities(rng));
      absorb(verify_langevin(quick ? 20000 : 100000, quick ? 200 : 1000, rng));
      std::printf("property,value,tolerance,status\n");
      int failures = report(all);
      std::fprintf(stderr, "%d/%zu properties passed\n", static_cast<int>(all.size()) - failures, all.size());
      return failures == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
