#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace specstat {

// Execution policy for the data-parallel kernels. Every kernel that accepts a
// policy must produce bitwise-identical results under Serial and Parallel: a
// parallel body may only write to slots owned by its own index, and reductions
// happen after the loop in index order.
enum class Exec { Serial, Parallel };

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

template <typename F>
void parallel_for(std::int64_t n, F&& body, Exec exec = Exec::Parallel) {
    if (exec == Exec::Serial || n < 2) {
        for (std::int64_t i = 0; i < n; ++i)
            body(i);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i)
        body(i);
}

// Dynamic schedule for bodies with very uneven cost (per-patch MLE, per-tree
// growth). Same determinism contract as parallel_for.
template <typename F>
void parallel_for_dynamic(std::int64_t n, F&& body, Exec exec = Exec::Parallel) {
    if (exec == Exec::Serial || n < 2) {
        for (std::int64_t i = 0; i < n; ++i)
            body(i);
        return;
    }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
    for (std::int64_t i = 0; i < n; ++i)
        body(i);
}

} // namespace specstat
