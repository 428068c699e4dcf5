#pragma once

#include <exception>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace isgd {

/**
 * Runs fn(r) for r = 0..reps-1. jobs <= 1 uses the serial reference
 * loop; otherwise the replications are fanned out with OpenMP. Each
 * replication owns its PRNG substream, so parallel and serial runs
 * produce identical results; tests and the benchmark target hold the
 * two paths against each other.
 */
template <class Fn>
void run_replications(int reps, int jobs, Fn&& fn) {
    if (jobs <= 1) {
        for (int r = 0; r < reps; ++r) fn(r);
        return;
    }
#ifdef _OPENMP
    std::exception_ptr first_error = nullptr;
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
    for (int r = 0; r < reps; ++r) {
        try {
            fn(r);
        } catch (...) {
#pragma omp critical
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
#else
    for (int r = 0; r < reps; ++r) fn(r);
#endif
}

inline int hardware_jobs() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace isgd
