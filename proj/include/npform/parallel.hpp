// SPDX-License-Identifier: Apache-2.0
#ifndef NPFORM_PARALLEL_HPP
#define NPFORM_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace npf {

/// Worker count for fan-out helpers; 0 selects the hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs fn(i) for i in [0, n). Each index is independent and writes only its
/// own output slot, so results do not depend on the worker count. The first
/// exception (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace npf

#endif  // NPFORM_PARALLEL_HPP
