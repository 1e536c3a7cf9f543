#pragma once

// On-disk containers. All integers are little-endian.
//
// DTF1 (dense tensor):
//   "DTF1" | dtype u8 (0 = float32, 1 = float64) | ndim u8 | dims u64[ndim]
//   | row-major scalars
//
// PVQT (quantized tensor):
//   "PVQT" | version u16 | flags u16 (bit0 coherence, bit1 hessian used,
//   bit2 amplitudes quantized) | N u64 | G u64 | D u32 | K u32
//   | bits_per_group u32 | amplitude_bits u8 | seed u64
//   | direction codes, LSB-first, ceil(N*G*bits_per_group/8) bytes
//   | amplitudes: per row ceil(G*b/8) bytes of b-bit levels + float32 norm^2,
//     or N*G float32 when not quantized

#include "pvq/pipeline.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pvq {

class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class DType : std::uint8_t { float32 = 0, float64 = 1 };

struct DenseTensor {
  DType dtype = DType::float32;
  std::vector<std::uint64_t> dims;
  std::vector<double> values; // row-major

  std::uint64_t element_count() const;
  /// Rows x cols view: 2-D as is, 1-D as a single row. Other ranks throw.
  Eigen::MatrixXd to_matrix() const;
  static DenseTensor from_matrix(const Eigen::MatrixXd &m,
                                 DType dtype = DType::float32);
};

inline constexpr std::uint16_t kPvqtVersion = 1;
inline constexpr std::size_t kPvqtHeaderBytes = 45;

std::vector<std::uint8_t> serialize_dense(const DenseTensor &tensor);
DenseTensor parse_dense(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_quantized(const QuantizedTensor &qt);
QuantizedTensor parse_quantized(std::span<const std::uint8_t> bytes);

/// Byte count a PVQT file with this header must have.
std::uint64_t expected_quantized_size(const QuantizedTensor &header);

std::vector<std::uint8_t> read_file(const std::filesystem::path &path);
/// Writes to a sibling temporary and renames it into place.
void write_file_atomic(const std::filesystem::path &path,
                       std::span<const std::uint8_t> bytes);

DenseTensor read_dense(const std::filesystem::path &path);
void write_dense(const std::filesystem::path &path, const DenseTensor &tensor);
QuantizedTensor read_quantized(const std::filesystem::path &path);
void write_quantized(const std::filesystem::path &path,
                     const QuantizedTensor &qt);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

} // namespace pvq
