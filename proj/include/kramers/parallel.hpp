#ifndef KRAMERS_PARALLEL_HPP_
#define KRAMERS_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace kramers {

// Worker count used by parallel_for when none is given. Defaults to the
// hardware parallelism; the CLI overrides it from --threads.
int default_threads();
void set_default_threads(int n);

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
// processed exactly once; callers write results into per-index slots and
// reduce in index order afterwards, so results never depend on scheduling.
// The first exception thrown by any body is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  int threads = 0);

}  // namespace kramers

#endif  // KRAMERS_PARALLEL_HPP_
