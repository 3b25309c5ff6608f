#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "mbbn/nn/model.hpp"

namespace mbbn::nn {

// Model file layout:
//
//   MBBN-MODEL 1\n
//   stage=<full|quantized|decomposed>\n
//   algorithm=<none|qnn|mbbn>\n
//   layers=<n>\n
//   layer kind=<...> key=value ...\n      (one line per layer)
//   end\n
//   <binary payload per layer, in order>
//
// Binary payloads reuse the tensor and bit-plane encodings. A weight layer
// writes f64 act_t, f64 weight_t, the weight, then a u64 bias flag and the
// bias tensor. Quantized weights are u64 bits, u64 grid, f64 t, f64 d, u64
// rank, u64 dims, then one i16 per code. Decomposed weights are u64 rows,
// u64 cols, u64 bits, then one bit plane per digit over the row-major
// elements. Batch norm writes gamma, beta, mean, var.

inline constexpr std::string_view kModelMagic = "MBBN-MODEL 1";

void write_model(std::ostream& os, const ModelState& model);
ModelState read_model(std::istream& is);

void save_model(const std::filesystem::path& path, const ModelState& model);
ModelState load_model(const std::filesystem::path& path);

/// Bytes of weight payload only (no headers, no biases): f32 values for float
/// weights, i16 codes for quantized weights, plane words for decomposed ones.
std::size_t weight_payload_bytes(const ModelState& model);

/// The text header lines, as written to the file.
std::string describe_layers(const ModelState& model);

}  // namespace mbbn::nn
