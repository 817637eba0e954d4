#include "flowtrack/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace flowtrack {

int thread_cap() {
    const char* env = std::getenv("FLOWTRACK_THREADS");
    if (!env)
        return 0;
    try {
        int v = std::stoi(env);
        return v > 0 ? v : 0;
    } catch (...) {
        return 0;
    }
}

void apply_thread_cap() {
#ifdef _OPENMP
    int cap = thread_cap();
    if (cap > 0)
        omp_set_num_threads(cap);
#endif
}

}  // namespace flowtrack
