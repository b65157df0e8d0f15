#include "ermtree/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ermtree {

namespace {
int g_workers = 0;
}

int resolve_workers(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("ERMTREE_WORKERS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? int(hw) : 1;
}

void set_worker_count(int workers) {
    g_workers = workers > 0 ? workers : resolve_workers(0);
#ifdef _OPENMP
    omp_set_num_threads(g_workers);
#endif
}

int worker_count() {
    if (g_workers == 0) set_worker_count(0);
    return g_workers;
}

void parallel_for(size_t n, const std::function<void(size_t)>& fn, Exec exec) {
#ifdef _OPENMP
    if (exec == Exec::openmp && worker_count() > 1) {
#pragma omp parallel for schedule(dynamic, 1)
        for (long long i = 0; i < (long long)n; ++i) fn(size_t(i));
        return;
    }
#else
    (void)exec;
#endif
    for (size_t i = 0; i < n; ++i) fn(i);
}

double parallel_sum(size_t n, const std::function<double(size_t)>& fn, Exec exec) {
    constexpr size_t kChunks = 64; // fixed, so grouping never depends on workers
    size_t chunks = std::min(kChunks, std::max<size_t>(n, 1));
    std::vector<double> partial(chunks, 0.0);
    parallel_for(chunks, [&](size_t c) {
        size_t lo = n * c / chunks, hi = n * (c + 1) / chunks;
        double s = 0.0;
        for (size_t i = lo; i < hi; ++i) s += fn(i);
        partial[c] = s;
    }, exec);
    double total = 0.0;
    for (double s : partial) total += s;
    return total;
}

} // namespace ermtree
