#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dcd/config.hpp"
#include "dcd/datasets.hpp"
#include "dcd/objectives.hpp"
#include "dcd/oracles.hpp"

namespace dcd {

enum class LossKind : std::uint8_t { kDcdVe, kCd, kPcd, kDcdVeTime };

LossKind loss_kind_from_name(const std::string& name);
const char* loss_kind_name(LossKind k);

struct OptimizerSpec {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  Index batch = 1000;
  int iters = 5000;
};

/// Adam moment state over a parameter list.
struct AdamState {
  std::vector<Tensor> m, v;
  int t = 0;

  explicit AdamState(const std::vector<Tensor>& params);
  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, const OptimizerSpec& spec);
};

struct EvalSpec {
  int interval = 500;
  Index n_eval = 2000;
  LaplacianSpec lap;
  std::vector<double> denoise_sigmas;
  LangevinConfig denoise_cfg{0.018, 50, false};
};

/// Everything a single run needs, resolved from the key=value config.
struct ExperimentConfig {
  // dataset
  std::string dataset;        // 2d name, "gauss1d"/"gauss2d", or "idx"
  std::string idx_path;
  Index n_train = 10000;
  double sigma_pre = 0.0;
  // model
  std::vector<Index> hidden{300, 300, 300};
  Activation activation = Activation::kGelu;
  std::uint64_t model_seed = 0;
  TimeFeature time_feature = TimeFeature::kScalarT;
  Index time_feature_dim = 1;
  // loss
  LossKind loss = LossKind::kDcdVe;
  double t = 5e-4;
  LaplacianSpec lap;
  // diffusion
  VeSchedule sched = VeSchedule::constant(1.0, 4.0);
  // sampler
  LangevinConfig langevin{1e-3, 10, true};
  Index buffer_capacity = 10000;
  double reinit_fraction = 0.05;
  // time grid
  int grid_k = 18;
  double sigma_min = 0.01, sigma_max = 80.0;
  // optimizer / eval / run
  OptimizerSpec optim;
  EvalSpec eval;
  std::uint64_t seed = 0;
  std::string out_dir;

  static ExperimentConfig from(const Config& cfg);
};

struct RunRecord {
  struct Row {
    int iter = 0;
    double loss = 0.0;
    std::optional<double> sm_loss;
    double wall_ms = 0.0;
    Index n_score_evals = 0;
  };
  std::vector<Row> rows;
  double final_sm = std::numeric_limits<double>::infinity();
  bool diverged = false;
  int diverged_at = -1;
  std::string checkpoint_path;
  double total_wall_s = 0.0;

  void write_csv(const std::string& path) const;
  void write_json(const std::string& path, const ExperimentConfig& cfg) const;
};

/// Trains per the config, enforcing the per-iteration score-evaluation
/// bookkeeping, and persists checkpoint + CSV metrics + JSON summary when
/// out_dir is set. Divergence is recorded (final_sm = +inf), not thrown.
RunRecord run_train(const ExperimentConfig& cfg);

struct EvalMetrics {
  double sm_loss = 0.0;
  std::map<double, double> denoise_rmse;  // sigma -> rmse
};

/// Re-evaluates a checkpoint on the config's dataset: SM loss plus an
/// optional denoising RMSE sweep.
EvalMetrics run_eval(const std::string& checkpoint_path, const ExperimentConfig& cfg);

/// exp(f) on a uniform grid over [lo,hi]^2, normalized by the grid maximum;
/// writes <out_base>.csv and <out_base>.pgm.
void export_grid(const std::string& checkpoint_path, double lo, double hi, Index resolution,
                 const std::string& out_base);

/// The training data tensor a config resolves to (used by eval and tests).
Tensor resolve_dataset(const ExperimentConfig& cfg, Rng& rng);

}  // namespace dcd
