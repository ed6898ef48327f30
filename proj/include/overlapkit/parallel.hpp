#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace overlapkit {

// requested > 0 wins; otherwise OVERLAPKIT_THREADS, otherwise the hardware count.
int resolve_threads(int requested);

// Runs fn(i) for i in [0, n) on `threads` workers. If any call throws, the exception from the
// lowest index is rethrown once all workers have stopped.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// Pairwise summation; the result depends only on the order of `v`.
double pairwise_sum(const double* v, std::size_t n);
inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

}  // namespace overlapkit
