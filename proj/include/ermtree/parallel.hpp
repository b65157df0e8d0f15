#pragma once
#include <cstddef>
#include <functional>

namespace ermtree {

enum class Exec { serial, openmp };

// Worker cap: --workers flag beats ERMTREE_WORKERS env, which beats hardware
// count. 0 means "use hardware".
int resolve_workers(int flag_value);
void set_worker_count(int workers);
int worker_count();

// Runs fn(i) for i in [0, n). Each index writes only its own output slot, so
// results are identical between the serial reference and the OpenMP kernel
// regardless of worker count; tests assert that bit-for-bit.
void parallel_for(size_t n, const std::function<void(size_t)>& fn,
                  Exec exec = Exec::openmp);

// Deterministic sum reduction: accumulates fn(i) into a fixed number of
// chunk-local sums (independent of worker count), then adds chunks in index
// order. Parallel and serial paths give the same bits.
double parallel_sum(size_t n, const std::function<double(size_t)>& fn,
                    Exec exec = Exec::openmp);

} // namespace ermtree
