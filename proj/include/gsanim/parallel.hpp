#pragma once

#include <cstdint>

namespace gsanim {

/// Caps the number of worker threads used by parallel loops. Values < 1 reset
/// to the number of logical cores.
void set_thread_count(int threads);
int thread_count();

} // namespace gsanim
