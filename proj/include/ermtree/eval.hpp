#pragma once
#include "ermtree/solver.hpp"
#include "ermtree/synth.hpp"

#include <string>

namespace ermtree {

struct ExcessRiskEstimate {
    double value = 0.0;   // >= 0
    double std_err = 0.0; // Monte Carlo standard error; 0 on the exact path
    std::string method;   // "monte-carlo" | "exact-overlay"
};

enum class EvalMethod { automatic, monte_carlo, overlay };

// geometric leaf regions of a tree restricted to a domain box; children whose
// region has no measure inside the domain are dropped
PiecewiseConstant tree_regions(const TreeModel& model, const Box& domain);

// population excess squared risk E[(f_hat(X) - f*(X))^2]. The automatic
// method takes the exact overlay integral when the truth is piecewise
// constant and the marginal piecewise uniform, and Monte Carlo otherwise;
// forcing the overlay on an incompatible pair is a config error.
ExcessRiskEstimate excess_risk_regression(const TreeModel& model,
                                          const Truth& truth,
                                          const Marginal& marginal,
                                          size_t n_test, uint64_t seed,
                                          EvalMethod method = EvalMethod::automatic);

// excess zero-one risk E[2 |eta(X) - 1/2| 1{f_hat(X) != bayes(X)}] by Monte
// Carlo over X alone (eta is known, labels are never drawn). Model leaves
// must be 0/1.
ExcessRiskEstimate excess_risk_classification(const TreeModel& model,
                                              const EtaOracle& eta,
                                              const Marginal& marginal,
                                              size_t n_test, uint64_t seed);

// Monte Carlo margin law. mass[k] estimates P(0 < |eta(X)-1/2| <= t[k])
// restricted to the strict band |eta-1/2| < 1/2 (deterministic labels are
// noise-free and fall outside the margin assumption); the mass of
// eta(X) == 1/2 exactly is reported separately. When the oracle carries a
// closed-form step the exact values are filled in for comparison.
struct MarginProfile {
    std::vector<double> t;
    std::vector<double> mass;
    double zero_mass = 0.0;
    std::vector<double> exact; // empty when no closed form is attached
};

MarginProfile margin_profile(const EtaOracle& eta, const Marginal& marginal,
                             std::span<const double> t_grid, size_t n_mc,
                             uint64_t seed);

// deterministic stratified sample of a piecewise-uniform marginal:
// box k receives a largest-remainder share of grid_n, laid out as midpoints
// of an even 1D partition (d = 1) or of a round(share^{1/d})-per-side lattice
// (d >= 2, so the realized count can deviate slightly). Row-major points.
std::vector<double> stratified_points(const Marginal& marginal, size_t grid_n);

// upper proxy for the best-in-class tree approximation error at leaf budget
// L: fit an exact noiseless tree on a stratified grid of f* values, then
// return its population excess risk (exact overlay when available). The
// proxy sits above the true infimum up to grid quantization; it is used for
// approximation-rate slopes and oracle-constant estimates, not as a bound
// certificate.
double approximation_error_proxy(const Truth& truth, const Marginal& marginal,
                                 size_t L, size_t grid_n,
                                 size_t n_test = 200000,
                                 uint64_t seed = 104729);

// classification flavour: labels are the Bayes classes 1{eta >= 1/2}, the
// fit minimizes zero-one loss, and the excess risk is the margin-weighted
// disagreement with Bayes
double approximation_error_proxy(const EtaOracle& eta, const Marginal& marginal,
                                 size_t L, size_t grid_n,
                                 size_t n_test = 200000,
                                 uint64_t seed = 104729);

} // namespace ermtree
