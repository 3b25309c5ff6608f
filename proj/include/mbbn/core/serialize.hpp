#pragma once

#include <cstdint>
#include <iosfwd>

#include "mbbn/core/tensor.hpp"

namespace mbbn::io {

// Little-endian primitives. All multi-byte fields in every file this project
// writes go through these, independent of host byte order.
void write_u64(std::ostream& os, std::uint64_t v);
std::uint64_t read_u64(std::istream& is);
void write_f32(std::ostream& os, float v);
float read_f32(std::istream& is);
void write_f64(std::ostream& os, double v);
double read_f64(std::istream& is);
void write_i16(std::ostream& os, std::int16_t v);
std::int16_t read_i16(std::istream& is);

/// Tensor layout: u64 rank, rank x u64 dims, then product(dims) f32 values.
/// Values are narrowed to float on write, so a tensor read back from disk
/// re-serializes to identical bytes.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

/// Size of the f32 payload of write_tensor, excluding the header.
std::size_t tensor_payload_bytes(const Tensor& t);

}  // namespace mbbn::io
