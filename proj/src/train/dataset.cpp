#include "mbbn/train/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>

#include "mbbn/core/serialize.hpp"

namespace mbbn::train {

namespace {

constexpr std::string_view kGridMagic = "MBBN-GRID 1";

}  // namespace

Shape Dataset::sample_shape() const {
  Shape s = x.shape();
  s.erase(s.begin());
  return s;
}

Dataset Dataset::subset(std::span<const std::size_t> index) const {
  Shape shape = x.shape();
  shape[0] = index.size();
  const std::size_t stride = size() ? x.size() / size() : 0;
  Dataset out{Tensor(shape), {}, classes};
  out.y.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= size()) throw ShapeError("subset index out of range");
    std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(index[i] * stride), stride,
                out.x.values().begin() + static_cast<std::ptrdiff_t>(i * stride));
    out.y.push_back(y[index[i]]);
  }
  return out;
}

void normalize_features(Tensor& x) {
  auto m = x.flat_rows();
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double lo = m.col(c).minCoeff();
    const double hi = m.col(c).maxCoeff();
    if (hi > lo) m.col(c) = ((m.col(c).array() - lo) * (2.0 / (hi - lo)) - 1.0).matrix();
    else m.col(c).setZero();
  }
}

Dataset make_moons(std::size_t n, double noise, Rng& rng) {
  Dataset d{Tensor({n, 2}), std::vector<int>(n), 2};
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    double px = std::cos(angle);
    double py = std::sin(angle);
    if (label == 1) {
      px = 1.0 - px;
      py = 0.5 - py;
    }
    d.x(i, 0) = px + noise * rng.normal();
    d.x(i, 1) = py + noise * rng.normal();
    d.y[i] = label;
  }
  normalize_features(d.x);
  return d;
}

Dataset make_spirals(std::size_t n, std::size_t classes, double noise, Rng& rng) {
  if (classes < 2) throw ConfigError("spirals need at least 2 classes");
  Dataset d{Tensor({n, 2}), std::vector<int>(n), classes};
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = i % classes;
    const double t = rng.uniform(0.05, 1.0);
    const double angle = 1.75 * 2.0 * std::numbers::pi * t + 2.0 * std::numbers::pi * static_cast<double>(label) / static_cast<double>(classes);
    d.x(i, 0) = t * std::cos(angle) + noise * rng.normal();
    d.x(i, 1) = t * std::sin(angle) + noise * rng.normal();
    d.y[i] = static_cast<int>(label);
  }
  normalize_features(d.x);
  return d;
}

Dataset make_blobs(std::size_t n, std::size_t classes, double spread, Rng& rng) {
  if (classes < 2) throw ConfigError("blobs need at least 2 classes");
  std::vector<std::pair<double, double>> centres(classes);
  for (auto& c : centres) c = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  Dataset d{Tensor({n, 2}), std::vector<int>(n), classes};
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = i % classes;
    d.x(i, 0) = centres[label].first + spread * rng.normal();
    d.x(i, 1) = centres[label].second + spread * rng.normal();
    d.y[i] = static_cast<int>(label);
  }
  normalize_features(d.x);
  return d;
}

Dataset make_dataset(std::string_view name, std::size_t n, Rng& rng) {
  if (name == "moons") return make_moons(n, 0.1, rng);
  if (name == "spirals") return make_spirals(n, 3, 0.02, rng);
  if (name == "blobs") return make_blobs(n, 3, 0.15, rng);
  throw ConfigError("unknown dataset '" + std::string(name) + "' (expected moons, spirals, blobs or a grid file)");
}

Split split(const Dataset& data, double val_fraction, Rng& rng) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("validation fraction must be in [0, 1)");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span(order));
  const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(data.size())));
  const std::span<const std::size_t> all(order);
  return {data.subset(all.first(data.size() - n_val)), data.subset(all.last(n_val))};
}

void save_image_grid(const std::filesystem::path& path, const Dataset& data) {
  if (data.x.rank() != 4) throw ShapeError("image grid needs an N x C x H x W tensor");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << kGridMagic << "\n";
  for (auto d : data.x.shape()) io::write_u64(os, d);
  io::write_u64(os, data.classes);
  const std::size_t stride = data.x.size() / std::max<std::size_t>(data.size(), 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    io::write_u64(os, static_cast<std::uint64_t>(data.y[i]));
    for (std::size_t j = 0; j < stride; ++j) {
      const double v = std::clamp(data.x[i * stride + j], -1.0, 1.0);
      os.put(static_cast<char>(static_cast<unsigned char>(std::lround((v + 1.0) * 127.5))));
    }
  }
  if (!os) throw IoError("failed writing " + path.string());
}

Dataset load_image_grid(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::string magic;
  if (!std::getline(is, magic) || magic != kGridMagic) throw IoError(path.string() + ": not an image grid file");
  Shape shape(4);
  for (auto& d : shape) d = io::read_u64(is);
  const auto classes = io::read_u64(is);
  const std::size_t stride = shape[1] * shape[2] * shape[3];
  if (classes < 2 || classes > 1u << 16 || stride == 0 || stride > 1u << 24 || shape[0] > (std::uint64_t{1} << 32) / stride) {
    throw IoError(path.string() + ": implausible image grid header");
  }
  Dataset d{Tensor(shape), std::vector<int>(shape[0]), classes};
  std::vector<unsigned char> pixels(stride);
  for (std::size_t i = 0; i < shape[0]; ++i) {
    const auto label = io::read_u64(is);
    if (label >= classes) throw IoError(path.string() + ": label out of range");
    d.y[i] = static_cast<int>(label);
    if (!is.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(stride))) {
      throw IoError(path.string() + ": truncated image grid");
    }
    for (std::size_t j = 0; j < stride; ++j) d.x[i * stride + j] = pixels[j] / 127.5 - 1.0;
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError(path.string() + ": trailing bytes");
  return d;
}

}  // namespace mbbn::train
