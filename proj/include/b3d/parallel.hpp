#pragma once

#include <cstdint>

namespace b3d {

// Worker count used by parallel loops. 0 restores the runtime default.
// Every parallel loop in the library writes disjoint outputs and performs
// reductions in a fixed order, so results do not depend on this value.
void set_thread_count(int threads);
int thread_count();

}  // namespace b3d
