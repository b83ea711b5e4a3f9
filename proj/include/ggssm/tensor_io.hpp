#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ggssm/common.hpp"

namespace ggssm {

// "GGT1" tensor container.
//
// Single tensor file:
//   magic "GGT1" | u8 dtype (0 = f32, 1 = f64) | u32 rank | u32 dims[rank] |
//   raw row-major payload, little-endian.
//
// Multi-tensor container (named tensors, e.g. layer weights):
//   magic "GGT1" | u8 0xFF | u32 count |
//   manifest: count x { u16 name_len | name | u8 dtype | u32 rank |
//                       u32 dims[rank] | u64 payload_offset } |
//   payload blob (offsets are relative to the blob start).
enum class Dtype : uint8_t { f32 = 0, f64 = 1 };

struct Tensor {
  std::vector<uint32_t> dims;
  std::vector<double> values;  // held as f64 in memory regardless of file dtype

  size_t element_count() const {
    size_t n = 1;
    for (uint32_t d : dims) n *= d;
    return dims.empty() ? 0 : n;
  }
};

using TensorMap = std::map<std::string, Tensor>;

Tensor tensor_from_matrix(const Matrixd& m);
Matrixd matrix_from_tensor(const Tensor& t);  // rank must be 1 (row vector) or 2

void write_tensor(const std::string& path, const Tensor& t, Dtype dtype = Dtype::f64);
Tensor read_tensor(const std::string& path);

void write_tensor_map(const std::string& path, const TensorMap& tensors,
                      Dtype dtype = Dtype::f64);
TensorMap read_tensor_map(const std::string& path);

// Headered CSV, one node per row. Only numeric cells below the header.
Matrixd read_csv_matrix(const std::string& path);

// Dispatches on the magic bytes: GGT1 files go through read_tensor, anything
// else is parsed as headered CSV.
Matrixd read_matrix_auto(const std::string& path);

}  // namespace ggssm
