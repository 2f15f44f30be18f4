#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nn3d {

/// Thread count for a parallel region: `requested` if positive, else the OpenMP default.
inline int resolve_threads(int requested) noexcept {
    if (requested > 0) return requested;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace nn3d
