#include "dcd/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dcd {

namespace fs = std::filesystem;
using json = nlohmann::json;

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "dcd_ve") return LossKind::kDcdVe;
  if (name == "cd") return LossKind::kCd;
  if (name == "pcd") return LossKind::kPcd;
  if (name == "dcd_ve_time") return LossKind::kDcdVeTime;
  throw std::invalid_argument("unknown loss kind: " + name);
}

const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::kDcdVe: return "dcd_ve";
    case LossKind::kCd: return "cd";
    case LossKind::kPcd: return "pcd";
    case LossKind::kDcdVeTime: return "dcd_ve_time";
  }
  return "?";
}

AdamState::AdamState(const std::vector<Tensor>& params) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Tensor& p : params) {
    m.push_back(Tensor::zeros(p.shape()));
    v.push_back(Tensor::zeros(p.shape()));
  }
}

void AdamState::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, const OptimizerSpec& spec) {
  if (params.size() != m.size() || grads.size() != m.size()) throw std::invalid_argument("AdamState: size mismatch");
  ++t;
  const double bc1 = 1.0 - std::pow(spec.beta1, t);
  const double bc2 = 1.0 - std::pow(spec.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    m[i].flat() = spec.beta1 * m[i].flat() + (1.0 - spec.beta1) * grads[i].flat();
    v[i].flat() = spec.beta2 * v[i].flat() + (1.0 - spec.beta2) * grads[i].flat().square();
    params[i].flat() -= spec.lr * (m[i].flat() / bc1) / ((v[i].flat() / bc2).sqrt() + spec.eps);
  }
}

ExperimentConfig ExperimentConfig::from(const Config& c) {
  ExperimentConfig e;
  e.dataset = c.get_str("dataset.name", "moons");
  e.idx_path = c.get_str("dataset.path", "");
  e.n_train = c.get_index("dataset.n", 10000);
  e.sigma_pre = c.get_double("dataset.noise_sigma", 0.0);

  e.hidden.clear();
  {
    std::istringstream hs(c.get_str("model.hidden", "300 300 300"));
    Index h;
    while (hs >> h) e.hidden.push_back(h);
  }
  e.activation = c.get_str("model.activation", "gelu") == "silu" ? Activation::kSilu : Activation::kGelu;
  e.model_seed = static_cast<std::uint64_t>(c.get_index("model.seed", 0));
  e.time_feature =
      c.get_str("model.time_feature", "scalar") == "sinusoidal" ? TimeFeature::kSinusoidal : TimeFeature::kScalarT;
  e.time_feature_dim = c.get_index("model.time_feature_dim", e.time_feature == TimeFeature::kScalarT ? 1 : 8);

  e.loss = loss_kind_from_name(c.get_str("loss.kind", "dcd_ve"));
  e.t = c.get_double("loss.t", 5e-4);
  e.lap.mode = c.get_str("loss.laplacian", "exact") == "hutchinson" ? LaplacianMode::kHutchinson
                                                                    : LaplacianMode::kExact;
  e.lap.n_probes = c.get_int("loss.n_probes", 1);
  e.lap.gaussian_probes = c.get_str("loss.probe", "rademacher") == "gaussian";

  const std::string kind = c.get_str("diffusion.kind", "const");
  const double t_max = c.get_double("diffusion.t_max", 4.0);
  if (kind == "const") {
    double g0 = c.get_double("diffusion.g0", std::sqrt(c.get_double("loss.g0_sq", 1.0)));
    e.sched = VeSchedule::constant(g0, t_max);
  } else if (kind == "linear") {
    e.sched = VeSchedule::linear(t_max);
  } else {
    throw std::invalid_argument("diffusion.kind must be const or linear");
  }

  e.langevin.step_size = c.get_double("sampler.step_size", 1e-3);
  e.langevin.n_steps = c.get_int("sampler.n_steps", e.loss == LossKind::kPcd ? 20 : 10);
  e.buffer_capacity = c.get_index("sampler.buffer_capacity", 10000);
  e.reinit_fraction = c.get_double("sampler.reinit_fraction", 0.05);

  e.grid_k = c.get_int("time_grid.k", 18);
  e.sigma_min = c.get_double("time_grid.sigma_min", 0.01);
  e.sigma_max = c.get_double("time_grid.sigma_max", 80.0);

  e.optim.lr = c.get_double("optim.lr", 1e-3);
  e.optim.beta1 = c.get_double("optim.beta1", 0.9);
  e.optim.beta2 = c.get_double("optim.beta2", 0.99);
  e.optim.batch = c.get_index("optim.batch", 1000);
  e.optim.iters = c.get_int("optim.iters", 5000);

  e.eval.interval = c.get_int("eval.interval", 500);
  e.eval.n_eval = c.get_index("eval.n", 2000);
  e.eval.lap.mode =
      c.get_str("eval.laplacian", "exact") == "hutchinson" ? LaplacianMode::kHutchinson : LaplacianMode::kExact;
  e.eval.lap.n_probes = c.get_int("eval.n_probes", 16);
  {
    std::istringstream ss(c.get_str("eval.denoise_sigmas", ""));
    double s;
    while (ss >> s) e.eval.denoise_sigmas.push_back(s);
  }
  e.eval.denoise_cfg.step_size = c.get_double("eval.denoise_step_size", 0.018);
  e.eval.denoise_cfg.n_steps = c.get_int("eval.denoise_steps", 50);
  e.eval.denoise_cfg.noise_on = false;

  e.seed = static_cast<std::uint64_t>(c.get_index("run.seed", 0));
  e.out_dir = c.get_str("run.out_dir", "");
  return e;
}

Tensor resolve_dataset(const ExperimentConfig& cfg, Rng& rng) {
  if (cfg.dataset == "gauss1d") return randn(rng, Shape{cfg.n_train, 1});
  if (cfg.dataset == "gauss2d") return randn(rng, Shape{cfg.n_train, 2});
  if (cfg.dataset == "idx") {
    if (cfg.idx_path.empty()) throw std::invalid_argument("dataset.path required for idx datasets");
    ImageSet set = load_idx(cfg.idx_path, cfg.sigma_pre, &rng);
    if (cfg.n_train > 0 && cfg.n_train < set.images.rows()) {
      Tensor sub = Tensor::zeros(Shape{cfg.n_train, set.images.cols()});
      sub.mat() = set.images.mat().topRows(cfg.n_train);
      return sub;
    }
    return set.images;
  }
  return sample_2d(cfg.dataset, cfg.n_train, rng);
}

namespace {

Tensor take_rows(const Tensor& data, const std::vector<Index>& idx) {
  Tensor out = Tensor::zeros(Shape{static_cast<Index>(idx.size()), data.cols()});
  for (size_t r = 0; r < idx.size(); ++r) out.mat().row(static_cast<Index>(r)) = data.mat().row(idx[r]);
  return out;
}



/// SM metric over `x`, +inf if the evaluation overflows.
template <class Model>
double safe_sm(const Model& m, const Tensor& x, const LaplacianSpec& lap, Rng& rng) {
  try {
    return sm_eval_loss(m, x, lap, rng).evaluate().value;
  } catch (const NonFiniteError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

RunRecord run_train(const ExperimentConfig& cfg) {
  Rng master(cfg.seed);
  Rng data_rng(master());
  Rng train_rng(master());
  Rng eval_rng(master());

  Tensor data = resolve_dataset(cfg, data_rng);
  const Index dim = data.cols();
  const Index n_eval = std::min<Index>(cfg.eval.n_eval, data.rows());
  Tensor eval_set = Tensor::zeros(Shape{n_eval, dim});
  eval_set.mat() = data.mat().topRows(n_eval);

  std::vector<Index> dims{dim};
  for (Index h : cfg.hidden) dims.push_back(h);
  dims.push_back(1);

  const bool time_model = cfg.loss == LossKind::kDcdVeTime;
  MlpEbm mlp;
  TimeEbm tebm;
  std::vector<Tensor>* params = nullptr;
  TimeGrid grid;
  if (time_model) {
    tebm = init_time_ebm(dim, cfg.hidden, cfg.model_seed, cfg.sched.t_max, cfg.time_feature,
                         cfg.time_feature_dim, cfg.activation);
    grid = TimeGrid::geometric_sigma(cfg.sched, cfg.sigma_min, cfg.sigma_max, cfg.grid_k);
    params = &tebm.net.params;
  } else {
    mlp = init_params(dims, cfg.model_seed, cfg.activation);
    params = &mlp.params;
  }

  std::optional<ReplayBuffer> buffer;
  if (cfg.loss == LossKind::kPcd) {
    auto [lo, hi] = bounding_box(data, 0.1);
    buffer.emplace(cfg.buffer_capacity, lo, hi, cfg.reinit_fraction);
  }

  AdamState adam(*params);
  RunRecord rec;
  rec.rows.reserve(static_cast<size_t>(cfg.optim.iters));

  // eval on the time model reads the sharpest slice (smallest level)
  auto eval_sm = [&]() -> double {
    if (time_model) return safe_sm(TimeSlice{&tebm, grid.times.front()}, eval_set, cfg.eval.lap, eval_rng);
    return safe_sm(mlp, eval_set, cfg.eval.lap, eval_rng);
  };

  const auto run_start = std::chrono::steady_clock::now();
  for (int iter = 0; iter < cfg.optim.iters; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    std::uniform_int_distribution<Index> pick(0, data.rows() - 1);
    std::vector<Index> idx(static_cast<size_t>(std::min(cfg.optim.batch, data.rows())));
    for (Index& i : idx) i = pick(train_rng);
    Tensor batch = take_rows(data, idx);

    RunRecord::Row row;
    row.iter = iter;
    try {
      LossGraph L = [&] {
        switch (cfg.loss) {
          case LossKind::kDcdVe:
            return dcd_ve_loss(mlp, batch, cfg.t, cfg.sched, cfg.lap, train_rng);
          case LossKind::kCd:
            return cd_loss(mlp, batch, cfg.langevin, train_rng);
          case LossKind::kPcd:
            return pcd_loss(mlp, batch, *buffer, cfg.langevin, train_rng);
          case LossKind::kDcdVeTime:
            return dcd_ve_time_loss(tebm, batch, cfg.sched, grid, cfg.lap, train_rng);
        }
        throw std::logic_error("unreachable");
      }();
      auto grads = L.evaluate_with_grads();
      row.loss = L.value;
      row.n_score_evals = L.score_evals;
      adam.step(*params, grads, cfg.optim);
    } catch (const ChainDivergedError& e) {
      rec.diverged = true;
      rec.diverged_at = iter;
      row.loss = std::numeric_limits<double>::infinity();
      rec.rows.push_back(row);
      break;
    } catch (const NonFiniteError&) {
      rec.diverged = true;
      rec.diverged_at = iter;
      row.loss = std::numeric_limits<double>::infinity();
      rec.rows.push_back(row);
      break;
    }
    if (!std::isfinite(row.loss)) {
      rec.diverged = true;
      rec.diverged_at = iter;
      rec.rows.push_back(row);
      break;
    }
    if (cfg.eval.interval > 0 && (iter + 1) % cfg.eval.interval == 0) row.sm_loss = eval_sm();
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    rec.rows.push_back(row);
  }
  rec.total_wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();

  rec.final_sm = rec.diverged ? std::numeric_limits<double>::infinity() : eval_sm();
  if (!std::isfinite(rec.final_sm)) rec.diverged = true;

  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    rec.checkpoint_path = (fs::path(cfg.out_dir) / "model.ckpt").string();
    if (time_model)
      save_checkpoint(rec.checkpoint_path, tebm);
    else
      save_checkpoint(rec.checkpoint_path, mlp);
    rec.write_csv((fs::path(cfg.out_dir) / "metrics.csv").string());
    rec.write_json((fs::path(cfg.out_dir) / "summary.json").string(), cfg);
    if (dim == 2) write_samples_csv((fs::path(cfg.out_dir) / "data.csv").string(), eval_set);
  }
  return rec;
}

void RunRecord::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "iter,loss,sm_loss,wall_ms,n_score_evals\n";
  out.precision(12);
  for (const Row& r : rows) {
    out << r.iter << ',' << r.loss << ',';
    if (r.sm_loss) out << *r.sm_loss;
    out << ',' << r.wall_ms << ',' << r.n_score_evals << '\n';
  }
}

void RunRecord::write_json(const std::string& path, const ExperimentConfig& cfg) const {
  json j;
  j["dataset"] = cfg.dataset;
  j["loss_kind"] = loss_kind_name(cfg.loss);
  j["seed"] = cfg.seed;
  j["iters_run"] = rows.size();
  j["diverged"] = diverged;
  if (diverged) j["diverged_at"] = diverged_at;
  if (std::isfinite(final_sm))
    j["final_sm_loss"] = final_sm;
  else
    j["final_sm_loss"] = "+inf";
  j["total_wall_s"] = total_wall_s;
  double mean_ms = 0.0;
  Index evals = 0;
  for (const Row& r : rows) {
    mean_ms += r.wall_ms;
    evals += r.n_score_evals;
  }
  if (!rows.empty()) {
    j["mean_iter_ms"] = mean_ms / static_cast<double>(rows.size());
    j["score_evals_per_iter"] = static_cast<double>(evals) / static_cast<double>(rows.size());
  }
  if (!checkpoint_path.empty()) j["checkpoint"] = checkpoint_path;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

EvalMetrics run_eval(const std::string& checkpoint_path, const ExperimentConfig& cfg) {
  LoadedModel loaded = load_checkpoint(checkpoint_path);
  Rng master(cfg.seed);
  Rng data_rng(master());
  (void)master();  // train stream, unused here
  Rng eval_rng(master());

  Tensor data = resolve_dataset(cfg, data_rng);
  const Index n_eval = std::min<Index>(cfg.eval.n_eval, data.rows());
  Tensor eval_set = Tensor::zeros(Shape{n_eval, data.cols()});
  eval_set.mat() = data.mat().topRows(n_eval);

  EvalMetrics metrics;
  LaplacianSpec lap = cfg.eval.lap;
  if (data.cols() > kMaxExactLaplacianDim) lap.mode = LaplacianMode::kHutchinson;

  auto sm_of = [&](const auto& model) { return safe_sm(model, eval_set, lap, eval_rng); };
  if (loaded.is_time) {
    TimeGrid grid = TimeGrid::geometric_sigma(cfg.sched, cfg.sigma_min, cfg.sigma_max, cfg.grid_k);
    metrics.sm_loss = sm_of(TimeSlice{&loaded.time, grid.times.front()});
  } else {
    metrics.sm_loss = sm_of(loaded.mlp);
  }

  for (double sigma : cfg.eval.denoise_sigmas) {
    Tensor noisy = eval_set;
    noisy.flat() += sigma * randn(eval_rng, eval_set.shape()).flat();
    Tensor rec;
    if (loaded.is_time) {
      TimeGrid grid = TimeGrid::geometric_sigma(cfg.sched, cfg.sigma_min, cfg.sigma_max, cfg.grid_k);
      rec = denoise(TimeSlice{&loaded.time, grid.times.front()}, noisy, cfg.eval.denoise_cfg);
    } else {
      rec = denoise(loaded.mlp, noisy, cfg.eval.denoise_cfg);
    }
    metrics.denoise_rmse[sigma] = std::sqrt((rec.flat() - eval_set.flat()).square().mean());
  }
  return metrics;
}

void export_grid(const std::string& checkpoint_path, double lo, double hi, Index resolution,
                 const std::string& out_base) {
  if (resolution < 2) throw std::invalid_argument("export_grid: resolution must be >= 2");
  LoadedModel loaded = load_checkpoint(checkpoint_path);
  if (loaded.is_time || loaded.mlp.dim() != 2)
    throw std::invalid_argument("export_grid: needs a 2-D plain EBM checkpoint");

  Tensor pts = Tensor::zeros(Shape{resolution * resolution, 2});
  const double step = (hi - lo) / static_cast<double>(resolution - 1);
  for (Index i = 0; i < resolution; ++i) {    // rows: x2 descending so the image is upright
    for (Index j = 0; j < resolution; ++j) {
      pts(i * resolution + j, 0) = lo + step * static_cast<double>(j);
      pts(i * resolution + j, 1) = hi - step * static_cast<double>(i);
    }
  }
  Tensor e = energy(loaded.mlp, pts);  // NonFiniteError propagates
  const double emax = e.flat().maxCoeff();

  std::ofstream csv(out_base + ".csv");
  std::ofstream pgm(out_base + ".pgm");
  if (!csv || !pgm) throw std::runtime_error("cannot write grid outputs at " + out_base);
  csv.precision(9);
  pgm << "P2\n" << resolution << ' ' << resolution << "\n255\n";
  for (Index i = 0; i < resolution; ++i) {
    for (Index j = 0; j < resolution; ++j) {
      const double v = std::exp(e[i * resolution + j] - emax);  // in (0, 1]
      csv << v << (j + 1 < resolution ? ',' : '\n');
      pgm << static_cast<int>(std::lround(v * 255.0)) << (j + 1 < resolution ? ' ' : '\n');
    }
  }
}

}  // namespace dcd
