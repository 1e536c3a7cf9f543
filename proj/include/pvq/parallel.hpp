#pragma once

#include <cstddef>
#include <functional>

namespace pvq {

/// Worker count: PVQ_THREADS if set to a positive integer, else the hardware
/// concurrency (at least 1).
std::size_t worker_count();

/// Calls fn(i) for i in [begin, end), split into contiguous chunks over up to
/// worker_count() threads. Results must not depend on the split.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)> &fn);

} // namespace pvq
