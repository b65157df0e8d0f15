// Times the serial reference kernels against the OpenMP ones on the three
// parallel surfaces: raw sum reductions (the Monte Carlo evaluator's inner
// loop), the frontier solver's layer loop, and the replication engine of a
// rate sweep. Every pair must also agree bit for bit; a mismatch fails the
// run, since worker-count independence is what makes reruns reproducible.

#include "ermtree/parallel.hpp"
#include "ermtree/ratelab.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

using namespace ermtree;

namespace {

double run_ms(const std::function<void()>& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

bool g_all_same = true;

void row(const char* name, double serial_ms, double openmp_ms, bool same) {
    std::printf("%-32s %11.1f %11.1f %8.2fx %10s\n", name, serial_ms, openmp_ms,
                serial_ms / std::max(openmp_ms, 1e-9), same ? "yes" : "NO");
    g_all_same = g_all_same && same;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial reference vs OpenMP kernels"};
    int workers = 0;
    double scale = 1.0;
    app.add_option("--workers", workers, "worker cap for the OpenMP side, 0 = hardware");
    app.add_option("--scale", scale, "multiplies every problem size");
    CLI11_PARSE(app, argc, argv);
    int hw = resolve_workers(workers);

    std::printf("%-32s %11s %11s %9s %10s\n", "kernel", "serial_ms", "openmp_ms",
                "speedup", "identical");

    // shared world: one smooth piece, two bumps, mild noise
    PshabConfig pc;
    pc.bumps_per_piece = 2;
    PshabSpec spec = make_pshab(pc, 42);
    Marginal marg = Marginal::uniform(1);
    NoiseModel noise = NoiseModel::gaussian(0.25);
    Truth truth = pshab_truth(spec);

    { // raw reduction, the shape of the Monte Carlo integrand
        size_t n = size_t(8e6 * scale);
        auto term = [](size_t i) {
            double x = double(i) * 1e-6;
            return std::sqrt(x + 0.5) + std::sin(x);
        };
        double a = 0.0, b = 0.0;
        double s_ms = run_ms([&] { a = parallel_sum(n, term, Exec::serial); });
        set_worker_count(hw);
        double p_ms = run_ms([&] { b = parallel_sum(n, term, Exec::openmp); });
        row("sum reduction (8M terms)", s_ms, p_ms, a == b);
    }

    { // Monte Carlo excess risk of a fitted tree
        Dataset data = sample_regression(spec, noise, 2048, 7, marg);
        FitConfig fc;
        fc.max_leaves = 32;
        TreeModel tree = fit_constrained(data, fc);
        size_t n_test = size_t(2e6 * scale);
        double a = 0.0, b = 0.0;
        set_worker_count(1);
        double s_ms = run_ms([&] {
            a = excess_risk_regression(tree, truth, marg, n_test, 99,
                                       EvalMethod::monte_carlo)
                    .value;
        });
        set_worker_count(hw);
        double p_ms = run_ms([&] {
            b = excess_risk_regression(tree, truth, marg, n_test, 99,
                                       EvalMethod::monte_carlo)
                    .value;
        });
        row("mc excess risk (2M points)", s_ms, p_ms, a == b);
    }

    { // frontier solve, the layer loop of the segment DP
        size_t n = size_t(4096 * scale);
        Dataset data = sample_regression(spec, noise, std::max<size_t>(n, 64), 11, marg);
        FitConfig fc;
        RiskFrontier f1, f2;
        set_worker_count(1);
        double s_ms = run_ms([&] { f1 = risk_frontier(data, fc, 64); });
        set_worker_count(hw);
        double p_ms = run_ms([&] { f2 = risk_frontier(data, fc, 64); });
        bool same = f1.total == f2.total &&
                    tree_to_json(f1.trees.back()) == tree_to_json(f2.trees.back());
        row("frontier (n=4096, L=64)", s_ms, p_ms, same);
    }

    { // replication engine: a small end-to-end rate sweep
        RegressionWorld world{spec, marg, noise};
        SweepConfig sc;
        sc.n_grid = {64, 128, 256};
        sc.reps = size_t(8 * scale) + 1;
        sc.n_test = 20000;
        sc.seed = 5;
        sc.target = -2.0 / 3.0;
        sc.tolerance = 10.0;
        sc.schedule = Schedule::regression(1.0, noise.sd());
        std::string a, b;
        set_worker_count(1);
        double s_ms = run_ms([&] { a = run_rate_sweep(world, sc).json_summary(); });
        set_worker_count(hw);
        double p_ms = run_ms([&] { b = run_rate_sweep(world, sc).json_summary(); });
        row("rate sweep (3 sizes x reps)", s_ms, p_ms, a == b);
    }

    if (!g_all_same) {
        std::fprintf(stderr, "kernel outputs diverged between serial and OpenMP\n");
        return 1;
    }
    return 0;
}
