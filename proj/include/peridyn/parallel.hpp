#pragma once

namespace peridyn {

/// Thread count for operator application; n <= 0 leaves the runtime default.
void set_threads(int n);
int max_threads();

/// Applies PERIDYN_THREADS if set. Returns the value applied, or 0.
int threads_from_env();

} // namespace peridyn
