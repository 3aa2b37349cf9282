#pragma once

#include <functional>

namespace ietidg {

/// Worker count for patch-parallel loops; 1 runs everything inline.
void set_num_jobs(int jobs);
int num_jobs();

/// Calls body(i) for i in [0, n). Iterations must write disjoint data.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace ietidg
