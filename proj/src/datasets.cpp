#include "dcd/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace dcd {

Dataset2D dataset2d_from_name(const std::string& name) {
  if (name == "swissroll") return Dataset2D::kSwissroll;
  if (name == "circles") return Dataset2D::kCircles;
  if (name == "rings") return Dataset2D::kRings;
  if (name == "moons") return Dataset2D::kMoons;
  if (name == "8gaussians") return Dataset2D::kEightGaussians;
  if (name == "2spirals") return Dataset2D::kTwoSpirals;
  if (name == "checkerboard") return Dataset2D::kCheckerboard;
  throw std::invalid_argument("unknown 2d dataset: " + name);
}

const char* dataset2d_name(Dataset2D d) {
  switch (d) {
    case Dataset2D::kSwissroll: return "swissroll";
    case Dataset2D::kCircles: return "circles";
    case Dataset2D::kRings: return "rings";
    case Dataset2D::kMoons: return "moons";
    case Dataset2D::kEightGaussians: return "8gaussians";
    case Dataset2D::kTwoSpirals: return "2spirals";
    case Dataset2D::kCheckerboard: return "checkerboard";
  }
  return "?";
}

namespace {

void add_noise(Tensor& xy, double sigma, Rng& rng) {
  std::normal_distribution<double> n(0.0, sigma);
  for (Index i = 0; i < xy.size(); ++i) xy[i] += n(rng);
}

Tensor ring_mixture(const std::vector<double>& radii, double sigma, Index n, Rng& rng) {
  Tensor out = Tensor::zeros(Shape{n, 2});
  std::uniform_int_distribution<size_t> pick(0, radii.size() - 1);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  for (Index r = 0; r < n; ++r) {
    double rad = radii[pick(rng)];
    double th = angle(rng);
    out(r, 0) = rad * std::cos(th);
    out(r, 1) = rad * std::sin(th);
  }
  add_noise(out, sigma, rng);
  return out;
}

}  // namespace

Tensor sample_2d(Dataset2D dataset, Index n, Rng& rng) {
  if (n < 0) throw std::invalid_argument("sample_2d: negative n");
  Tensor out = Tensor::zeros(Shape{n, 2});
  switch (dataset) {
    case Dataset2D::kSwissroll: {
      std::uniform_real_distribution<double> u(1.5 * M_PI, 4.5 * M_PI);
      for (Index r = 0; r < n; ++r) {
        double phi = u(rng);
        out(r, 0) = phi * std::cos(phi) / 5.0;
        out(r, 1) = phi * std::sin(phi) / 5.0;
      }
      add_noise(out, 0.05, rng);
      return out;
    }
    case Dataset2D::kCircles:
      return ring_mixture({1.0, 2.0}, 0.08, n, rng);
    case Dataset2D::kRings:
      return ring_mixture({0.5, 1.0, 1.5, 2.0}, 0.05, n, rng);
    case Dataset2D::kMoons: {
      std::uniform_real_distribution<double> u(0.0, M_PI);
      for (Index r = 0; r < n; ++r) {
        double t = u(rng);
        if (rng() & 1u) {
          out(r, 0) = std::cos(t);
          out(r, 1) = std::sin(t);
        } else {
          out(r, 0) = 1.0 - std::cos(t);
          out(r, 1) = 0.5 - std::sin(t);
        }
      }
      add_noise(out, 0.08, rng);
      return out;
    }
    case Dataset2D::kEightGaussians: {
      std::uniform_int_distribution<int> pick(0, 7);
      std::normal_distribution<double> comp(0.0, 0.2);
      for (Index r = 0; r < n; ++r) {
        double a = 2.0 * M_PI * pick(rng) / 8.0;
        out(r, 0) = 2.0 * std::cos(a) + comp(rng);
        out(r, 1) = 2.0 * std::sin(a) + comp(rng);
      }
      return out;
    }
    case Dataset2D::kTwoSpirals: {
      std::uniform_real_distribution<double> u(0.0, 3.0 * M_PI);
      for (Index r = 0; r < n; ++r) {
        double th = u(rng);
        double rad = th / (3.0 * M_PI);
        double sgn = (rng() & 1u) ? 1.0 : -1.0;
        out(r, 0) = sgn * rad * std::cos(th);
        out(r, 1) = sgn * rad * std::sin(th);
      }
      add_noise(out, 0.05, rng);
      return out;
    }
    case Dataset2D::kCheckerboard: {
      std::uniform_real_distribution<double> ux(-4.0, 4.0);
      std::uniform_real_distribution<double> cell(0.0, 1.0);
      std::uniform_int_distribution<int> pick(0, 3);
      for (Index r = 0; r < n; ++r) {
        double x1 = ux(rng);
        int i = static_cast<int>(std::floor(x1 + 4.0));
        int parity = i & 1;
        int j = 2 * pick(rng) + parity;  // cells {parity, parity+2, ...} share (i+j) even
        out(r, 0) = x1;
        out(r, 1) = -4.0 + j + cell(rng);
      }
      return out;
    }
  }
  throw std::invalid_argument("sample_2d: unhandled dataset");
}

Tensor sample_2d(const std::string& name, Index n, Rng& rng) {
  return sample_2d(dataset2d_from_name(name), n, rng);
}

void write_samples_csv(const std::string& path, const Tensor& xy) {
  if (xy.rank() != 2 || xy.cols() != 2) throw std::invalid_argument("write_samples_csv: need (n,2)");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "x1,x2\n";
  out.precision(17);
  for (Index r = 0; r < xy.rows(); ++r) out << xy(r, 0) << ',' << xy(r, 1) << '\n';
}

// ---------------------------------------------------------------------------
// IDX container

namespace {

std::uint32_t read_be32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("idx: truncated header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;
constexpr std::uint64_t kMaxElems = std::uint64_t(1) << 31;

}  // namespace

ImageSet load_idx(const std::string& path, double sigma_pre, Rng* rng) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("idx: cannot open " + path);
  std::uint32_t magic = read_be32(in);
  if (magic != kImagesMagic) throw std::runtime_error("idx: bad magic in " + path);
  std::uint32_t n = read_be32(in), rows = read_be32(in), cols = read_be32(in);
  std::uint64_t total = std::uint64_t(n) * rows * cols;
  if (rows == 0 || cols == 0 || total > kMaxElems) throw std::runtime_error("idx: dimension overflow");

  ImageSet set;
  set.img_rows = rows;
  set.img_cols = cols;
  set.sigma_pre = sigma_pre;
  set.images = Tensor::zeros(Shape{static_cast<Index>(n), static_cast<Index>(rows * cols)});
  std::vector<unsigned char> buf(rows * cols);
  for (std::uint32_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw std::runtime_error("idx: truncated payload in " + path);
    for (size_t j = 0; j < buf.size(); ++j)
      set.images(static_cast<Index>(i), static_cast<Index>(j)) = buf[j] * (2.0 / 255.0) - 1.0;
  }
  if (sigma_pre > 0.0) {
    if (rng == nullptr) throw std::invalid_argument("load_idx: preprocessing noise needs an rng");
    std::normal_distribution<double> noise(0.0, sigma_pre);
    const double lim = 1.0 + 5.0 * sigma_pre;
    for (Index i = 0; i < set.images.size(); ++i)
      set.images[i] = std::clamp(set.images[i] + noise(*rng), -lim, lim);
  }
  return set;
}

std::vector<int> load_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("idx: cannot open " + path);
  if (read_be32(in) != kLabelsMagic) throw std::runtime_error("idx: bad label magic in " + path);
  std::uint32_t n = read_be32(in);
  if (n > kMaxElems) throw std::runtime_error("idx: dimension overflow");
  std::vector<unsigned char> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("idx: truncated labels in " + path);
  return {buf.begin(), buf.end()};
}

void save_idx(const std::string& path, const Tensor& images, Index img_rows, Index img_cols) {
  if (images.rank() != 2 || images.cols() != img_rows * img_cols)
    throw std::invalid_argument("save_idx: image width does not match rows*cols");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("idx: cannot write " + path);
  write_be32(out, kImagesMagic);
  write_be32(out, static_cast<std::uint32_t>(images.rows()));
  write_be32(out, static_cast<std::uint32_t>(img_rows));
  write_be32(out, static_cast<std::uint32_t>(img_cols));
  std::vector<unsigned char> buf(static_cast<size_t>(images.cols()));
  for (Index i = 0; i < images.rows(); ++i) {
    for (Index j = 0; j < images.cols(); ++j) {
      double v = std::clamp((images(i, j) + 1.0) * 127.5, 0.0, 255.0);
      buf[static_cast<size_t>(j)] = static_cast<unsigned char>(std::lround(v));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
}

}  // namespace dcd
