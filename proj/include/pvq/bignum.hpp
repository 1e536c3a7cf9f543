#pragma once

// Arbitrary-precision unsigned integers for PVQ codes and codebook sizes.
//
// Values are stored as 64-bit limbs, least-significant first, with no
// trailing zero limbs (zero is the empty limb vector). Only the operations
// needed by the enumeration codec are provided: add, sub, compare, shifts,
// and bit access.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pvq {

class CodeInteger {
public:
  using Limb = std::uint64_t;
  static constexpr std::size_t kLimbBits = 64;

  CodeInteger() = default;
  CodeInteger(Limb value) {  // NOLINT: implicit from word is intended
    if (value != 0)
      limbs_.push_back(value);
  }

  /// Builds a value from least-significant-first limbs; trailing zeros are
  /// stripped.
  static CodeInteger from_limbs(std::span<const Limb> limbs);
  static CodeInteger from_limbs(std::initializer_list<Limb> limbs) {
    return from_limbs(std::span<const Limb>(limbs.begin(), limbs.size()));
  }
  /// 2^bits.
  static CodeInteger power_of_two(std::size_t bits);
  /// Parses a non-negative decimal string.
  static CodeInteger from_decimal(std::string_view text);

  std::span<const Limb> limbs() const { return limbs_; }
  bool is_zero() const { return limbs_.empty(); }

  /// 0 for zero, otherwise floor(log2(value)) + 1.
  std::size_t bit_length() const;
  bool bit(std::size_t index) const;
  void set_bit(std::size_t index);

  /// Low 64 bits.
  Limb low_word() const { return limbs_.empty() ? 0 : limbs_.front(); }
  bool fits_in_word() const { return limbs_.size() <= 1; }

  std::string to_decimal() const;
  std::string to_hex() const;

  CodeInteger &operator+=(const CodeInteger &rhs);
  /// Throws std::underflow_error when rhs > *this.
  CodeInteger &operator-=(const CodeInteger &rhs);
  CodeInteger &operator<<=(std::size_t bits);
  CodeInteger &operator>>=(std::size_t bits);

  friend CodeInteger operator+(CodeInteger a, const CodeInteger &b) {
    return a += b;
  }
  friend CodeInteger operator-(CodeInteger a, const CodeInteger &b) {
    return a -= b;
  }
  friend CodeInteger operator<<(CodeInteger a, std::size_t bits) {
    return a <<= bits;
  }
  friend CodeInteger operator>>(CodeInteger a, std::size_t bits) {
    return a >>= bits;
  }

  friend std::strong_ordering operator<=>(const CodeInteger &a,
                                          const CodeInteger &b);
  friend bool operator==(const CodeInteger &a, const CodeInteger &b) = default;

private:
  void trim();

  std::vector<Limb> limbs_;
};

inline CodeInteger add(const CodeInteger &a, const CodeInteger &b) { return a + b; }
inline CodeInteger sub(const CodeInteger &a, const CodeInteger &b) { return a - b; }
inline std::strong_ordering cmp(const CodeInteger &a, const CodeInteger &b) {
  return a <=> b;
}
inline CodeInteger shift_left(const CodeInteger &a, std::size_t bits) {
  return a << bits;
}
inline CodeInteger shift_right(const CodeInteger &a, std::size_t bits) {
  return a >> bits;
}
inline std::size_t bit_length(const CodeInteger &a) { return a.bit_length(); }

} // namespace pvq
