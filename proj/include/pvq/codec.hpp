#pragma once

// Core PVQ subroutines: projection onto the pyramid, enumeration encode and
// decode, and LSB-first bit packing of codes.

#include "pvq/bignum.hpp"
#include "pvq/lattice.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pvq {

/// Integer point with sum |coords_i| = K.
struct PyramidPoint {
  Eigen::VectorXi coords;

  Eigen::Index dims() const { return coords.size(); }
  std::int64_t l1_norm() const {
    std::int64_t total = 0;
    for (Eigen::Index i = 0; i < coords.size(); ++i)
      total += std::abs(static_cast<std::int64_t>(coords[i]));
    return total;
  }
  friend bool operator==(const PyramidPoint &a, const PyramidPoint &b) {
    return a.coords.size() == b.coords.size() && a.coords == b.coords;
  }
};

/// Round half away from zero; used wherever a scalar round appears.
template <typename Scalar> Scalar round_half_away(Scalar x) {
  return x < Scalar(0) ? -std::floor(-x + Scalar(0.5))
                       : std::floor(x + Scalar(0.5));
}

namespace detail {

// Hill climb over single-pulse moves (take one pulse from coordinate i, give
// it to j) on the cosine between |v| and the pulse magnitudes. Each accepted
// move strictly increases the cosine, so the walk terminates.
void refine_pulses(std::span<const double> magnitudes,
                   std::span<std::int64_t> pulses);

} // namespace detail

/// Maps v to a point of P(D,K).
///
/// The vector is scaled onto the L1 ball of radius K and rounded; the pulse
/// total is then corrected one unit at a time, picking the coordinate whose
/// change adds the least squared error against the scaled target (ties go to
/// the lowest index). A final hill climb over single-pulse moves maximizes
/// the cosine to v. The zero vector maps to (K,0,...,0).
template <typename Derived>
PyramidPoint quantize_direction(const Eigen::MatrixBase<Derived> &v,
                                const SizeTable &table) {
  const auto dims = static_cast<Eigen::Index>(table.dims());
  const auto pulses = static_cast<std::int64_t>(table.pulses());
  if (v.size() != dims)
    throw std::invalid_argument("quantize_direction: expected " +
                                std::to_string(dims) + " coordinates, got " +
                                std::to_string(v.size()));
  if (pulses < 1)
    throw std::invalid_argument("quantize_direction: K must be >= 1");

  Eigen::VectorXd target = v.template cast<double>();
  if (!target.allFinite())
    throw std::domain_error("quantize_direction: non-finite input");

  PyramidPoint out{Eigen::VectorXi::Zero(dims)};
  const double l1 = target.template lpNorm<1>();
  if (l1 == 0.0) {
    out.coords[0] = static_cast<int>(pulses);
    return out;
  }
  target *= static_cast<double>(pulses) / l1;

  std::vector<std::int64_t> p(static_cast<std::size_t>(dims));
  std::int64_t total = 0;
  for (Eigen::Index i = 0; i < dims; ++i) {
    p[i] = static_cast<std::int64_t>(round_half_away(target[i]));
    total += std::abs(p[i]);
  }

  const std::int64_t cap = 4 * dims;
  for (std::int64_t iter = 0; total != pulses; ++iter) {
    if (iter >= cap)
      throw std::runtime_error("quantize_direction: pulse correction did not "
                               "converge");
    const bool grow = total < pulses;
    Eigen::Index best = -1;
    double best_cost = 0.0;
    std::int64_t best_step = 0;
    for (Eigen::Index i = 0; i < dims; ++i) {
      std::int64_t step;
      if (grow) {
        step = p[i] != 0 ? (p[i] > 0 ? 1 : -1) : (target[i] >= 0.0 ? 1 : -1);
      } else {
        if (p[i] == 0)
          continue;
        step = p[i] > 0 ? -1 : 1;
      }
      const double before = static_cast<double>(p[i]) - target[i];
      const double after = static_cast<double>(p[i] + step) - target[i];
      const double cost = after * after - before * before;
      if (best < 0 || cost < best_cost) {
        best = i;
        best_cost = cost;
        best_step = step;
      }
    }
    p[best] += best_step;
    total += grow ? 1 : -1;
  }

  std::vector<double> magnitudes(static_cast<std::size_t>(dims));
  std::vector<std::int64_t> counts(static_cast<std::size_t>(dims));
  for (Eigen::Index i = 0; i < dims; ++i) {
    magnitudes[i] = std::abs(target[i]);
    counts[i] = std::abs(p[i]);
  }
  detail::refine_pulses(magnitudes, counts);
  for (Eigen::Index i = 0; i < dims; ++i)
    out.coords[i] = static_cast<int>(target[i] < 0.0 ? -counts[i] : counts[i]);
  return out;
}

/// Index of p in [0, N(D,K)).
CodeInteger encode(const PyramidPoint &p, const SizeTable &table);

/// Inverse of encode. Throws std::out_of_range when code >= N(D,K).
PyramidPoint decode(const CodeInteger &code, const SizeTable &table);

/// p / ||p||_2.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> to_sphere(const PyramidPoint &p) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out = p.coords.cast<Scalar>();
  const Scalar norm = out.norm();
  if (norm == Scalar(0))
    throw std::invalid_argument("to_sphere: zero point");
  return out / norm;
}

struct PackedCodes {
  std::size_t bits_per_group = 0;
  std::size_t group_count = 0;
  std::vector<std::uint8_t> bytes;
};

inline std::size_t packed_byte_count(std::size_t bits_per_value,
                                     std::size_t count) {
  return (bits_per_value * count + 7) / 8;
}

/// Appends fixed-width values LSB-first; bit position p lands in byte p>>3,
/// bit p&7.
class BitWriter {
public:
  void write(const CodeInteger &value, std::size_t width);
  void write(std::uint64_t value, std::size_t width);
  std::size_t bit_count() const { return bits_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
  void push_bit(bool bit);

  std::vector<std::uint8_t> bytes_;
  std::size_t bits_ = 0;
};

class BitReader {
public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  CodeInteger read(std::size_t width);
  std::uint64_t read_word(std::size_t width);
  std::size_t position() const { return bits_; }

private:
  bool next_bit();

  std::span<const std::uint8_t> bytes_;
  std::size_t bits_ = 0;
};

/// Throws std::invalid_argument when a code does not fit in bits_per_group.
PackedCodes pack_codes(std::span<const CodeInteger> codes,
                       std::size_t bits_per_group);

/// Throws std::invalid_argument on a size mismatch or nonzero padding bits.
std::vector<CodeInteger> unpack_codes(const PackedCodes &packed);

} // namespace pvq
