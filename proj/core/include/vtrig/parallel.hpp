#pragma once

#include <cstddef>
#include <functional>

namespace vtrig {

// Worker cap shared by all parallel loops; the CLI wires --jobs here.
// 0 means hardware concurrency.
void set_default_jobs(int jobs);
int default_jobs();

// Runs fn(i) for i in [0, n) on up to `jobs` threads with a static block
// partition. Callers own the output slots, so results are deterministic
// regardless of scheduling. Exceptions from workers are rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  int jobs = 0);

}  // namespace vtrig
