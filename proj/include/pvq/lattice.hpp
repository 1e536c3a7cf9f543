#pragma once

// Combinatorics of the integer pyramid P(D,K) = { p in Z^D : sum |p_i| = K }.

#include "pvq/bignum.hpp"

#include <cstddef>
#include <memory>
#include <vector>

namespace pvq {

/// Size counts N(d,k) = |P(d,k)| and their running sums
/// V(d,k) = N(d,1) + ... + N(d,k) for 0 <= d <= D, 0 <= k <= K.
///
/// Immutable once built; safe to share between threads.
class SizeTable {
public:
  SizeTable(std::size_t dims, std::size_t pulses);

  std::size_t dims() const { return dims_; }
  std::size_t pulses() const { return pulses_; }

  const CodeInteger &count(std::size_t d, std::size_t k) const {
    return counts_.at(index(d, k));
  }
  const CodeInteger &cumulative(std::size_t d, std::size_t k) const {
    return cumulative_.at(index(d, k));
  }
  /// N(D,K), the number of codewords of the full configuration.
  const CodeInteger &codebook_size() const { return count(dims_, pulses_); }

private:
  std::size_t index(std::size_t d, std::size_t k) const {
    return d * (pulses_ + 1) + k;
  }

  std::size_t dims_;
  std::size_t pulses_;
  std::vector<CodeInteger> counts_;
  std::vector<CodeInteger> cumulative_;
};

SizeTable build_size_table(std::size_t dims, std::size_t pulses);

/// Process-wide cache keyed by (D,K).
std::shared_ptr<const SizeTable> cached_size_table(std::size_t dims,
                                                   std::size_t pulses);

/// N(D,K).
CodeInteger count_codes(std::size_t dims, std::size_t pulses);

/// Upper limit on K accepted by choose_pulses.
inline constexpr std::size_t kMaxPulses = std::size_t{1} << 20;

/// Largest K with N(D,K) <= 2^bits_per_group, i.e. every code fits in
/// bits_per_group bits. Returns 0 when not even a single pulse fits; throws
/// std::invalid_argument when K would exceed kMaxPulses.
std::size_t choose_pulses(std::size_t dims, std::size_t bits_per_group);

} // namespace pvq
