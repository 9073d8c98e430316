#pragma once

#include <cstddef>
#include <functional>

namespace sephr {

// Worker cap used by batch-parallel kernels. 1 means run inline.
void set_num_threads(int n);
int num_threads();

// Runs fn(i) for i in [0, n), splitting the range into contiguous chunks.
// Kernels only write per-index outputs here and reduce afterwards in index
// order, so results do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sephr
