#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "mbbn/core/rng.hpp"
#include "mbbn/core/tensor.hpp"

namespace mbbn::train {

/// Labelled samples. x is [n, features] or [n, C, H, W].
struct Dataset {
  Tensor x;
  std::vector<int> y;
  std::size_t classes = 0;

  std::size_t size() const { return y.size(); }
  Shape sample_shape() const;
  /// Rows of x picked by index, in the given order.
  Dataset subset(std::span<const std::size_t> index) const;
};

struct Split {
  Dataset train;
  Dataset val;
};

/// Two interleaved half circles with Gaussian noise, features scaled to [-1, 1].
Dataset make_moons(std::size_t n, double noise, Rng& rng);
/// Interleaved arms of an Archimedean spiral, one per class.
Dataset make_spirals(std::size_t n, std::size_t classes, double noise, Rng& rng);
/// Isotropic Gaussian clusters around centres drawn uniformly in [-1, 1]^2.
Dataset make_blobs(std::size_t n, std::size_t classes, double spread, Rng& rng);

/// Builds one of the built-in sets by name: moons, spirals, blobs.
Dataset make_dataset(std::string_view name, std::size_t n, Rng& rng);

/// Min-max rescales every feature column to [-1, 1].
void normalize_features(Tensor& x);

/// Shuffles, then holds out the last val_fraction of the samples.
Split split(const Dataset& data, double val_fraction, Rng& rng);

// Image-grid file:
//
//   MBBN-GRID 1\n
//   u64 n, u64 channels, u64 height, u64 width, u64 classes
//   n records of: u64 label, channels*height*width u8 pixels (row-major CHW)
//
// Pixels map to [-1, 1] as p / 127.5 - 1.
void save_image_grid(const std::filesystem::path& path, const Dataset& data);
Dataset load_image_grid(const std::filesystem::path& path);

}  // namespace mbbn::train
