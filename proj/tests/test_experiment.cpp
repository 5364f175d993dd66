#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dcd/experiment.hpp"

using namespace dcd;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* leaf) {
  fs::path p = fs::temp_directory_path() / "dcd_exp" / leaf;
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("config parsing") {
  Config c = Config::parse_string(R"(
# a comment
[dataset]
name = moons
n = 500

[loss]
kind = dcd_ve
t = 0.0005   # inline comment
[optim]
iters = 12
)");
  CHECK(c.get_str("dataset.name") == "moons");
  CHECK(c.get_index("dataset.n", 0) == 500);
  CHECK(c.get_double("loss.t", 0) == doctest::Approx(0.0005));
  CHECK(c.get_int("optim.iters", 0) == 12);
  CHECK(c.get_str("missing.key", "fallback") == "fallback");
  CHECK_THROWS(c.get_str("missing.key"));
  CHECK_THROWS(Config::parse_string("key_without_value\n"));
  CHECK_THROWS(Config::parse_string("[unclosed\n"));
  CHECK(c.get_bool("flags.x", true));

  ExperimentConfig e = ExperimentConfig::from(c);
  CHECK(e.dataset == "moons");
  CHECK(e.optim.iters == 12);
  CHECK(e.t == doctest::Approx(5e-4));
}

TEST_CASE("run_train: zero iterations reports the initial SM loss only") {
  Config c = Config::parse_string(R"(
[dataset]
name = gauss2d
n = 256
[model]
hidden = 16 16
[optim]
iters = 0
batch = 64
[eval]
n = 128
)");
  RunRecord rec = run_train(ExperimentConfig::from(c));
  CHECK(rec.rows.empty());
  CHECK(std::isfinite(rec.final_sm));
  CHECK_FALSE(rec.diverged);
}

TEST_CASE("run_train: DCD-VE on 1-D Gaussian approaches the analytic optimum -1/2") {
  Config c = Config::parse_string(R"(
[dataset]
name = gauss1d
n = 4000
[model]
hidden = 64 64
seed = 3
[loss]
kind = dcd_ve
t = 0.0005
[optim]
iters = 2000
batch = 128
lr = 0.001
[eval]
interval = 0
n = 4000
[run]
seed = 11
)");
  RunRecord rec = run_train(ExperimentConfig::from(c));
  REQUIRE_FALSE(rec.diverged);
  // optimum of the SM metric for N(0,1) data is -D/2 = -0.5
  CHECK(rec.final_sm == doctest::Approx(-0.5).epsilon(0.10));
}

TEST_CASE("run_train: reproducibility and budget bookkeeping") {
  const char* text = R"(
[dataset]
name = moons
n = 512
[model]
hidden = 24 24
seed = 5
[loss]
kind = cd
[sampler]
n_steps = 10
step_size = 0.001
[optim]
iters = 6
batch = 64
[eval]
interval = 3
n = 128
[run]
seed = 21
)";
  Config c = Config::parse_string(text);
  RunRecord a = run_train(ExperimentConfig::from(c));
  RunRecord b = run_train(ExperimentConfig::from(c));
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].loss == b.rows[i].loss);
    CHECK(a.rows[i].sm_loss.has_value() == b.rows[i].sm_loss.has_value());
    if (a.rows[i].sm_loss) CHECK(*a.rows[i].sm_loss == *b.rows[i].sm_loss);
    CHECK(a.rows[i].n_score_evals == 10);  // the CD budget
  }
  CHECK(a.final_sm == b.final_sm);

  SUBCASE("dcd_ve exact-Laplacian budget is 1 + D") {
    Config c2 = Config::parse_string(text);
    c2.set("loss.kind", "dcd_ve");
    RunRecord r = run_train(ExperimentConfig::from(c2));
    for (const auto& row : r.rows) CHECK(row.n_score_evals == 3);
  }
  SUBCASE("pcd runs and records its configured steps") {
    Config c2 = Config::parse_string(text);
    c2.set("loss.kind", "pcd");
    c2.set("sampler.n_steps", "20");
    c2.set("sampler.buffer_capacity", "640");
    RunRecord r = run_train(ExperimentConfig::from(c2));
    for (const auto& row : r.rows) CHECK(row.n_score_evals == 20);
    CHECK_FALSE(r.diverged);
  }
}

TEST_CASE("run_train persists artifacts and run_eval reproduces the final SM loss") {
  fs::path dir = temp_dir("train_eval");
  std::string text = R"(
[dataset]
name = circles
n = 600
[model]
hidden = 16 16
seed = 2
[loss]
kind = dcd_ve
[optim]
iters = 40
batch = 100
[eval]
interval = 20
n = 200
[run]
seed = 33
out_dir = )" + dir.string() + "\n";
  Config c = Config::parse_string(text);
  ExperimentConfig e = ExperimentConfig::from(c);
  RunRecord rec = run_train(e);
  REQUIRE(fs::exists(rec.checkpoint_path));
  CHECK(fs::exists(dir / "metrics.csv"));
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "data.csv"));

  EvalMetrics m = run_eval(rec.checkpoint_path, e);
  CHECK(std::abs(m.sm_loss - rec.final_sm) < 1e-9);

  SUBCASE("metrics csv has the expected header and row count") {
    std::ifstream in(dir / "metrics.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "iter,loss,sm_loss,wall_ms,n_score_evals");
    int lines = 0;
    std::string line;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 40);
  }
}

TEST_CASE("run_eval: identity denoiser RMSE equals the noise level") {
  fs::path dir = temp_dir("identity_denoise");
  // constant-energy model: zero score, denoise returns its input
  MlpEbm flat = init_params({2, 8, 1}, 0);
  for (Tensor& p : flat.params) p.flat() = 0.0;
  std::string ckpt = (dir / "flat.ckpt").string();
  save_checkpoint(ckpt, flat);

  Config c = Config::parse_string(R"(
[dataset]
name = gauss2d
n = 40000
[eval]
n = 40000
denoise_sigmas = 0.3
denoise_steps = 25
[run]
seed = 9
)");
  EvalMetrics m = run_eval(ckpt, ExperimentConfig::from(c));
  REQUIRE(m.denoise_rmse.count(0.3));
  // RMSE of untouched noise: sigma, with sampling error ~ sigma/sqrt(2N)
  CHECK(m.denoise_rmse.at(0.3) == doctest::Approx(0.3).epsilon(0.02));
}

TEST_CASE("export_grid") {
  fs::path dir = temp_dir("grid");

  SUBCASE("constant-energy model: uniform 1.0 after normalization") {
    MlpEbm flat = init_params({2, 6, 1}, 0);
    for (Tensor& p : flat.params) p.flat() = 0.0;
    std::string ckpt = (dir / "flat.ckpt").string();
    save_checkpoint(ckpt, flat);
    export_grid(ckpt, -2.0, 2.0, 8, (dir / "flat").string());

    std::ifstream csv(dir / "flat.csv");
    std::string line;
    int values = 0;
    while (std::getline(csv, line)) {
      std::istringstream row(line);
      std::string cell;
      while (std::getline(row, cell, ',')) {
        CHECK(std::stod(cell) == doctest::Approx(1.0).epsilon(1e-12));
        ++values;
      }
    }
    CHECK(values == 64);  // resolution^2 values exactly

    std::ifstream pgm(dir / "flat.pgm");
    std::string magic;
    int w = 0, h = 0, depth = 0;
    pgm >> magic >> w >> h >> depth;
    CHECK(magic == "P2");
    CHECK(w == 8);
    CHECK(h == 8);
    CHECK(depth == 255);
    int v = 0, count = 0;
    while (pgm >> v) {
      CHECK(v == 255);
      ++count;
    }
    CHECK(count == 64);
  }
  SUBCASE("peaked model: maximum cell lands at the center") {
    // f(x) = -sum_i [gelu(x_i) + gelu(-x_i)], a cone peaked at the origin
    MlpEbm peak;
    peak.dims = {2, 4, 1};
    peak.activation = Activation::kGelu;
    peak.seed = 0;
    Tensor w1 = Tensor::zeros(Shape{2, 4});
    w1(0, 0) = 1.0;
    w1(0, 1) = -1.0;
    w1(1, 2) = 1.0;
    w1(1, 3) = -1.0;
    Tensor w2 = Tensor::full(Shape{4, 1}, -1.0);
    peak.params = {w1, Tensor::zeros(Shape{4}), w2, Tensor::zeros(Shape{1})};
    std::string ckpt = (dir / "peak.ckpt").string();
    save_checkpoint(ckpt, peak);
    const Index r = 11;  // odd: grid cell centers include the origin
    export_grid(ckpt, -2.0, 2.0, r, (dir / "peak").string());

    std::ifstream csv(dir / "peak.csv");
    std::string line;
    double best = -1;
    Index best_i = -1, best_j = -1, i = 0;
    while (std::getline(csv, line)) {
      std::istringstream row(line);
      std::string cell;
      Index j = 0;
      while (std::getline(row, cell, ',')) {
        double v = std::stod(cell);
        if (v > best) {
          best = v;
          best_i = i;
          best_j = j;
        }
        ++j;
      }
      ++i;
    }
    CHECK(best == doctest::Approx(1.0));
    CHECK(best_i == r / 2);
    CHECK(best_j == r / 2);
  }
}

TEST_CASE("run_train records divergence instead of aborting") {
  // A pathological step size overflows the chain iterates immediately; the
  // run must record the +inf outcome rather than abort.
  Config c = Config::parse_string(R"(
[dataset]
name = moons
n = 256
[model]
hidden = 16
seed = 1
[loss]
kind = cd
[sampler]
n_steps = 10
step_size = 1e305
[optim]
iters = 200
batch = 64
[eval]
interval = 0
n = 64
[run]
seed = 3
)");
  RunRecord rec = run_train(ExperimentConfig::from(c));
  CHECK(rec.diverged);
  CHECK(std::isinf(rec.final_sm));
  CHECK(rec.final_sm > 0);
  CHECK(rec.diverged_at >= 0);
}
