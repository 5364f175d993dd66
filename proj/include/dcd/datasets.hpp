#pragma once

#include <string>
#include <vector>

#include "dcd/rng.hpp"
#include "dcd/tensor.hpp"

namespace dcd {

// The seven synthetic 2-D densities. Generator constants are pinned here:
//   swissroll    phi ~ U(1.5pi, 4.5pi), (phi cos phi, phi sin phi)/5 + 0.05 N
//   circles      radii {1, 2} equally likely, uniform angle, 0.08 N
//   rings        radii {0.5, 1, 1.5, 2}, 0.05 N
//   moons        upper (cos t, sin t), lower (1 - cos t, 0.5 - sin t), t ~ U(0,pi), 0.08 N
//   8gaussians   centers at angles 2 pi k/8 on the radius-2 circle, 0.2 N
//   2spirals     r = theta/(3 pi), theta ~ U(0, 3 pi), mirrored pair, 0.05 N
//   checkerboard x1 ~ U(-4,4), x2 uniform over unit cells of matching parity
enum class Dataset2D : std::uint8_t {
  kSwissroll,
  kCircles,
  kRings,
  kMoons,
  kEightGaussians,
  kTwoSpirals,
  kCheckerboard,
};

Dataset2D dataset2d_from_name(const std::string& name);
const char* dataset2d_name(Dataset2D d);

/// n iid samples from the named density; deterministic under the rng seed.
Tensor sample_2d(Dataset2D dataset, Index n, Rng& rng);
Tensor sample_2d(const std::string& name, Index n, Rng& rng);

/// Comma-separated export with header "x1,x2".
void write_samples_csv(const std::string& path, const Tensor& xy);

/// Images scaled to [-1,1], optionally noised for denoising training.
struct ImageSet {
  Tensor images;  // (n, rows*cols)
  Index img_rows = 0;
  Index img_cols = 0;
  double sigma_pre = 0.0;
  std::vector<int> labels;  // optional
};

/// Parses an IDX container (big-endian dims, ubyte payload). When
/// sigma_pre > 0 the pixels are noised and clamped to [-1-5s, 1+5s].
ImageSet load_idx(const std::string& path, double sigma_pre = 0.0, Rng* rng = nullptr);

std::vector<int> load_idx_labels(const std::string& path);

/// Writes images (rows in [-1,1]) back to an IDX ubyte file; the inverse of
/// load_idx's scaling, used for fixtures and synthetic sets.
void save_idx(const std::string& path, const Tensor& images, Index img_rows, Index img_cols);

}  // namespace dcd
