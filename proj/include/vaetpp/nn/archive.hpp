#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "vaetpp/nn/autodiff.hpp"

namespace vaetpp::nn {

enum class TensorPrecision : std::uint8_t { f32 = 1, f64 = 2 };

/// Flat named-tensor archive, little-endian:
///   "VTPA" | u32 version=1 | u64 count |
///   count x { u32 name_len | name bytes | u32 ndim=2 | u64 rows | u64 cols |
///             u8 dtype (1=f32, 2=f64) | rows*cols values, row-major }
/// Entries are written in name order.
void write_archive(std::ostream& out, const std::map<std::string, Matrix>& tensors,
                   TensorPrecision precision = TensorPrecision::f64);
void save_archive(const std::string& path, const std::map<std::string, Matrix>& tensors,
                  TensorPrecision precision = TensorPrecision::f64);

std::map<std::string, Matrix> read_archive(std::istream& in);
std::map<std::string, Matrix> load_archive(const std::string& path);

} // namespace vaetpp::nn
