#pragma once

#include <string_view>

#include "mbbn/nn/model.hpp"
#include "mbbn/train/trainer.hpp"

namespace mbbn::train {

struct ArchOptions {
  int act_bits = 2;
  int weight_bits = 2;
  TrainAlgorithm algorithm = TrainAlgorithm::qnn;
  /// Precision of the first weight layer's input (the data); 0 means act_bits.
  int input_bits = 0;
  GridKind grid = GridKind::odd;
  /// Keep the first / last weight layer in float.
  bool float_first = false;
  bool float_last = false;
};

/// Builds an uninitialized float-stage model from an architecture string:
///
///   mlp:2-16-16-2                  dense layers with htanh between them
///   cnn:1x8x8:c8k3s2p1,c16k3s2p1:4 conv layers (out channels, kernel,
///                                  stride, padding) with htanh after each,
///                                  then a dense classifier
///
/// Weight layers get the options' precision; mbbn models get plane weights.
nn::ModelState build_arch(std::string_view arch, const ArchOptions& options);

}  // namespace mbbn::train
