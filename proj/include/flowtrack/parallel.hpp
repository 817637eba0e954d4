#pragma once

namespace flowtrack {

// Worker cap from FLOWTRACK_THREADS (0 or unset = auto).
int thread_cap();

// Applies the cap to the OpenMP runtime. Call once at program start.
void apply_thread_cap();

}  // namespace flowtrack
