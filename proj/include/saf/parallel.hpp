#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace saf {

// Parallelism lives at the granularity of independent work items
// (samples in a batch, trials in a suite). Each item writes its own slot
// and results are merged serially in index order afterwards, so the
// parallel path is bitwise identical to the serial reference path.
// threads == 1 forces the serial reference; threads == 0 uses the OpenMP
// default.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& body) {
#ifdef _OPENMP
    if (threads != 1) {
        if (threads > 0) {
#pragma omp parallel for schedule(dynamic) num_threads(threads)
            for (long long i = 0; i < static_cast<long long>(n); ++i)
                body(static_cast<std::size_t>(i));
        } else {
#pragma omp parallel for schedule(dynamic)
            for (long long i = 0; i < static_cast<long long>(n); ++i)
                body(static_cast<std::size_t>(i));
        }
        return;
    }
#else
    (void)threads;
#endif
    for (std::size_t i = 0; i < n; ++i) body(i);
}

inline int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace saf
