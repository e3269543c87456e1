#include "peridyn/parallel.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

namespace peridyn {

void set_threads(int n)
{
    if (n > 0)
        omp_set_num_threads(n);
}

int max_threads() { return omp_get_max_threads(); }

int threads_from_env()
{
    const char* v = std::getenv("PERIDYN_THREADS");
    if (!v || !*v)
        return 0;
    try {
        const int n = std::stoi(v);
        set_threads(n);
        return n > 0 ? n : 0;
    } catch (const std::exception&) {
        return 0;
    }
}

} // namespace peridyn
