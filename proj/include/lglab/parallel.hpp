#pragma once

#include <omp.h>

namespace lglab {

// Parallel loop over independent indices. Inside an enclosing parallel
// region the body runs inline: nested teams would serialize anyway, and
// entering them costs more than the loop body at our sizes. Results are
// identical either way because every index writes its own outputs.
template <typename F>
inline void par_for(int n, F&& f) {
  if (omp_in_parallel()) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) f(i);
}

}  // namespace lglab
