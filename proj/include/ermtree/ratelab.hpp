#pragma once
#include "ermtree/eval.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ermtree {

// ---- rate targets ----------------------------------------------------------

enum class RateKind {
    regression,             // -2a / (s + 2a)
    classification,         // -(1+rho) a / (s + (2+rho) a)
    approx_regression,      // -2a / s
    approx_classification,  // -(1+rho) a / s
    heavy_tail              // -2 (1 - 2/m) a / (s + 2a)
};

double target_exponent(RateKind kind, double s, double abar, double rho = 0.0,
                       double m = kInf);

// ---- slope fitting ---------------------------------------------------------

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double std_err = 0.0; // OLS slope standard error; 0 with two points
};

// least squares on (log x, log y); inputs must be positive
LineFit fit_power_law(std::span<const double> x, std::span<const double> y);

// ---- penalization schedules -------------------------------------------------

// The penalty constant c multiplies the theory-scale lambda; c itself is
// picked by held-out validation over a log grid.
struct Schedule {
    std::vector<double> c_grid;
    double u = 1.0;                    // confidence parameter in the scale
    double validation_fraction = 0.25; // trailing share of the sample held out
    size_t leaf_cap = 64;              // frontier depth; bounds the argmin scan
    double theta = 1.0;                // leaf-count exponent of the penalty
    double K = 0.0;                    // noise level entering the scale
    double M = 1.0;                    // sup bound (clipping level)
    LossKind loss = LossKind::squared;

    static std::vector<double> default_c_grid(); // 7 points, log [1e-2, 1e1]
    static Schedule regression(double M, double K);
    static Schedule classification(double rho);

    // lambda at c = 1: (M+K)^2 (log(nd)+u)/n for squared loss,
    // ((log(nd)+u)/n)^theta for zero-one
    double lambda_scale(size_t n, size_t d) const;
    void validate() const;
};

// frontier argmin of total(l)/n + lambda l^theta, strict ascending scan so
// ties resolve to the smaller tree
size_t penalized_argmin(const RiskFrontier& frontier, size_t n, double lambda,
                        double theta);

// ---- experiment worlds -------------------------------------------------------

struct RegressionWorld {
    PshabSpec spec;
    Marginal marginal;
    NoiseModel noise;
};

// classification truths are re-drawn per replication (fresh bump signs) and
// may scale their geometry with n, so the world is a config family
struct ClassificationWorld {
    std::function<HypercubeConfig(size_t n)> family;
    double rho = 0.0;
};

// ---- sweep reports -----------------------------------------------------------

struct RatePoint {
    double x = 0.0;      // n or L
    double median = 0.0; // across replications
    double iqr = 0.0;
    size_t reps = 0;   // successful replications
    size_t failed = 0; // guard-rail / config failures, skipped from medians
};

struct RateReport {
    std::string sweep_var = "n";
    std::vector<RatePoint> points;
    double slope = 0.0;
    double slope_stderr = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool within_tolerance = false;
    bool slope_skipped_flat = false; // all medians ~ 0: realizable world
    bool nonmonotone_prefix = false; // small-n medians not yet decreasing

    std::string csv() const; // sweep_var,value,median_excess,iqr,reps
    std::string json_summary() const;
};

struct SweepConfig {
    std::vector<size_t> n_grid;
    size_t reps = 20;
    Schedule schedule;
    size_t n_test = 200000; // Monte Carlo size for the excess risk
    uint64_t seed = 1;
    double target = 0.0;
    double tolerance = 0.15;
};

// Two-pass protocol per sweep point: every replication samples data, fits the
// risk frontier on the leading (1 - validation_fraction) share and on the
// full sample, and scores each c on the held-out tail; c* minimizes the
// across-replication median validation risk (ties to the larger c, stronger
// regularization); final trees come from the full-sample frontier at c* and
// are scored against the population truth.
RateReport run_rate_sweep(const RegressionWorld& world, const SweepConfig& cfg);
RateReport run_rate_sweep(const ClassificationWorld& world, const SweepConfig& cfg);

// approximation-error slopes: proxy(L) over a leaf grid, no data involved
RateReport run_approx_sweep(const Truth& truth, const Marginal& marginal,
                            std::span<const size_t> L_grid, size_t grid_n,
                            double target, double tolerance,
                            size_t n_test = 200000, uint64_t seed = 104729);
RateReport run_approx_sweep(const EtaOracle& eta, const Marginal& marginal,
                            std::span<const size_t> L_grid, size_t grid_n,
                            double target, double tolerance,
                            size_t n_test = 200000, uint64_t seed = 104729);

// fraction of replications whose per-replication validation choice of c
// moves by at most one grid step when the validation share is doubled; a
// soft stability diagnostic, logged rather than asserted
double c_selection_agreement(const RegressionWorld& world, size_t n,
                             const Schedule& schedule, size_t reps,
                             uint64_t seed);

// ---- oracle-inequality constants ---------------------------------------------

// Implied constant of the optimized oracle inequality, per (L, n) cell:
//   regression:      max(0, E^(1/2) - proxy^(1/2)) / ((M+K)^2 (L log(nd) + u)/n)^(1/2)
//   classification:  max(0, E^p - proxy^p) / ((L log(nd) + u)/n)^(1/2),
//                    p = (2+rho)/(2+2rho)
// with E the excess risk of the constrained L-leaf fit, medians over reps.
struct OracleCheckReport {
    std::vector<size_t> Ls, ns;
    std::vector<std::vector<double>> chat; // [L-index][n-index]
    std::vector<double> proxy;             // per L
    double max_chat = 0.0;
    double worst_row_ratio = 1.0; // max over L of max/min over n, zero cells skipped

    std::string csv() const;
};

OracleCheckReport oracle_inequality_check(const RegressionWorld& world,
                                          std::span<const size_t> ns,
                                          std::span<const size_t> Ls, double u,
                                          size_t reps, uint64_t seed,
                                          size_t grid_n = 4096,
                                          size_t n_test = 200000);
OracleCheckReport oracle_inequality_check(const HypercubeSpec& spec, double rho,
                                          std::span<const size_t> ns,
                                          std::span<const size_t> Ls, double u,
                                          size_t reps, uint64_t seed,
                                          size_t grid_n = 4096,
                                          size_t n_test = 200000);

// ---- leaf allocation ----------------------------------------------------------

enum class AllocMode {
    sum, // minimize sum_b v_b L_b^{-theta}: weights  v^{1/(theta+1)}
    max  // minimize max_b v_b L_b^{-theta}: weights  v^{1/theta}
};

struct AllocationResult {
    std::vector<double> weights;    // normalized, sum 1
    std::vector<size_t> leaves;     // integers, sum L, each >= 1
    std::vector<double> continuous; // unconstrained optimum L * w_b
};

// integer rounding: L_b = floor((L-B) w_b) + 1, then the first
// L - sum increments; satisfies (L-B) w_b < L_b <= (L-B) w_b + 2
AllocationResult allocate_leaves(std::span<const double> v, size_t L,
                                 AllocMode mode, double theta);

// ---- heavy-tail comparison ------------------------------------------------------

struct HeavyTailArm {
    std::string label; // "gaussian" | "t3" | ...
    NoiseModel noise;
    RateReport report;
};

struct HeavyTailReport {
    std::vector<HeavyTailArm> arms; // gaussian first, then each t(m)

    std::string csv() const;
    std::string json_summary() const;
};

// same world, same seeds, unit-variance noise: the covariate stream is noise-
// independent, so every arm sees literally identical X per replication.
// cfg.target is the gaussian arm's exponent; each t(m) arm is judged against
// target * (1 - 2/m)
HeavyTailReport heavy_tail_comparison(const RegressionWorld& world,
                                      const SweepConfig& cfg,
                                      std::span<const double> m_values);

} // namespace ermtree
