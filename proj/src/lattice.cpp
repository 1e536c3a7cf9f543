#include "pvq/lattice.hpp"

#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

namespace pvq {

SizeTable::SizeTable(std::size_t dims, std::size_t pulses)
    : dims_(dims), pulses_(pulses), counts_((dims + 1) * (pulses + 1)),
      cumulative_((dims + 1) * (pulses + 1)) {
  // Row 0: N(0,0) = 1, N(0,k) = 0 for k >= 1.
  counts_[index(0, 0)] = CodeInteger(1);

  // Row d is a prefix scan over the pairwise sums of row d-1:
  //   N(d,k) = N(d,k-1) + N(d-1,k) + N(d-1,k-1),   N(d,0) = 1.
  for (std::size_t d = 1; d <= dims; ++d) {
    counts_[index(d, 0)] = CodeInteger(1);
    for (std::size_t k = 1; k <= pulses; ++k) {
      CodeInteger n = counts_[index(d, k - 1)];
      n += counts_[index(d - 1, k)];
      n += counts_[index(d - 1, k - 1)];
      counts_[index(d, k)] = std::move(n);
    }
  }

  for (std::size_t d = 0; d <= dims; ++d) {
    for (std::size_t k = 1; k <= pulses; ++k)
      cumulative_[index(d, k)] =
          cumulative_[index(d, k - 1)] + counts_[index(d, k)];
  }
}

SizeTable build_size_table(std::size_t dims, std::size_t pulses) {
  if (dims < 1)
    throw std::invalid_argument("size table needs at least one dimension");
  return SizeTable(dims, pulses);
}

std::shared_ptr<const SizeTable> cached_size_table(std::size_t dims,
                                                   std::size_t pulses) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, std::size_t>,
                  std::shared_ptr<const SizeTable>>
      cache;
  std::lock_guard lock(mutex);
  auto &slot = cache[{dims, pulses}];
  if (!slot)
    slot = std::make_shared<const SizeTable>(build_size_table(dims, pulses));
  return slot;
}

CodeInteger count_codes(std::size_t dims, std::size_t pulses) {
  return build_size_table(dims, pulses).codebook_size();
}

std::size_t choose_pulses(std::size_t dims, std::size_t bits_per_group) {
  if (dims < 1)
    throw std::invalid_argument("choose_pulses: dims must be >= 1");
  if (bits_per_group < 1)
    throw std::invalid_argument("choose_pulses: bits_per_group must be >= 1");

  // Grow one column of N(., k) at a time; N(D,k) grows at least linearly in
  // k so the loop terminates.
  const CodeInteger budget = CodeInteger::power_of_two(bits_per_group);
  std::vector<CodeInteger> prev(dims + 1, CodeInteger(1)); // N(d,0)
  std::size_t best = 0;
  for (std::size_t k = 1;; ++k) {
    std::vector<CodeInteger> cur(dims + 1);
    cur[0] = CodeInteger(0);
    for (std::size_t d = 1; d <= dims; ++d)
      cur[d] = prev[d] + cur[d - 1] + prev[d - 1];
    if (cur[dims] > budget)
      return best;
    if (k > kMaxPulses)
      throw std::invalid_argument(
          "choose_pulses: " + std::to_string(bits_per_group) +
          " bits per group of " + std::to_string(dims) +
          " allow more than " + std::to_string(kMaxPulses) + " pulses");
    best = k;
    prev = std::move(cur);
  }
}

} // namespace pvq
