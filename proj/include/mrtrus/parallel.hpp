#pragma once

#include <cstddef>
#include <functional>

namespace mrtrus {

/// Worker count used by internally parallel loops. 0 selects the hardware
/// concurrency. Results never depend on this value: work is split into
/// index ranges whose outputs are written to fixed slots.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(begin, end) over disjoint chunks of [0, n).
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace mrtrus
