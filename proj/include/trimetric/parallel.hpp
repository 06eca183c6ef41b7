#ifndef TRIMETRIC_PARALLEL_HPP_
#define TRIMETRIC_PARALLEL_HPP_

#include <cstdint>
#include <functional>

namespace trimetric {

// Process-wide worker cap for data-parallel loops. Defaults to 1; every
// result is bitwise identical for any setting because workers only fill
// disjoint slots and reductions stay serial.
int max_threads();
void set_max_threads(int n);

// fn(i) for i in [0, n). fn must touch only state owned by index i.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace trimetric

#endif  // TRIMETRIC_PARALLEL_HPP_
