#pragma once
#include "ermtree/core.hpp"
#include "ermtree/rng.hpp"

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace ermtree {

// geometric axis-aligned box (in contrast to core's rank-space Cell)
struct Box {
    std::vector<double> lo, hi;

    size_t d() const { return lo.size(); }
    double side(size_t j) const { return hi[j] - lo[j]; }
    double volume() const;
    bool contains(std::span<const double> x) const; // closed on all faces

    bool operator==(const Box&) const = default;
};

// ---- data marginals and truth oracles ----------------------------------
//
// Generators hand these to the evaluators. When a marginal is piecewise
// uniform over boxes (weights sum to 1, uniform density inside each box) the
// evaluator can integrate piecewise-constant models exactly; otherwise only
// the sampler is available and everything runs Monte Carlo.

struct WeightedBox {
    Box box;
    double weight = 1.0;
};

struct Marginal {
    size_t dim = 1;
    std::vector<WeightedBox> boxes; // empty for sampler-only marginals
    std::function<void(Rng&, std::span<double>)> draw;

    bool piecewise_uniform() const { return !boxes.empty(); }

    static Marginal uniform(size_t d);
    static Marginal piecewise(std::vector<WeightedBox> parts);
};

struct PiecewiseConstant {
    std::vector<Box> boxes;
    std::vector<double> values;
};

// regression target f*
struct Truth {
    std::function<double(std::span<const double>)> f;
    double sup_bound = kInf;
    // set when f* is piecewise constant on axis-aligned boxes (enables the
    // exact overlay integral in eval)
    std::optional<PiecewiseConstant> piecewise;
};

// exact margin law P(0 < |eta - 1/2| <= t) = mass * 1{t >= at}, plus the
// probability of eta = 1/2 exactly; known in closed form for margin-step
// distributions
struct MarginStep {
    double mass = 0.0;
    double at = 0.0;
    double zero_mass = 0.0;
};

// classification regression function eta(x) = P(Y=1 | X=x)
struct EtaOracle {
    std::function<double(std::span<const double>)> eta;
    std::optional<MarginStep> step;
};

// ---- piecewise sparse anisotropic bump targets --------------------------

struct BumpAtom {
    std::vector<double> center; // full d coordinates; only active dims matter
    double sign = 1.0;          // +-1
};

struct PshabPiece {
    Box box;
    std::vector<size_t> active;  // S_b, ascending
    std::vector<double> alpha;   // per active dim, in (0,1]
    double abar = 1.0;           // harmonic mean of alpha
    double lambda = 1.0;         // Hoelder budget of the piece
    size_t grid_r = 1;           // bump grid resolution along each active dim
    double base_scale = 1.0;     // rho_b
    std::vector<double> radii;   // per active dim: rho_b^{abar/alpha_j}
    double amp = 0.0;            // lambda * rho_b^{abar} / kBumpCal
    std::vector<BumpAtom> atoms;
};

struct PshabConfig {
    size_t d = 1;
    size_t B = 1;
    size_t s = 1;
    std::pair<double, double> alpha_range{1.0, 1.0};
    std::pair<double, double> lambda_range{1.0, 1.0};
    size_t bumps_per_piece = 1;
    // force the harmonic mean of every piece's alpha to this value
    std::optional<double> target_abar;
    // override the half-spacing base scale rho_b (must not exceed it)
    std::optional<double> base_scale;
};

struct PshabSpec {
    PshabConfig cfg;
    uint64_t seed = 0;
    std::vector<PshabPiece> pieces;
};

PshabSpec make_pshab(const PshabConfig& cfg, uint64_t seed);
double eval_pshab(const PshabSpec& spec, std::span<const double> x);
double pshab_sup_bound(const PshabSpec& spec); // max_b amp_b
Truth pshab_truth(const PshabSpec& spec);

double harmonic_mean(std::span<const double> alpha);

// max over sampled pairs in the piece of |f(x1)-f(x2)| / sum_j |x1j-x2j|^aj;
// a lower estimate of the anisotropic Hoelder seminorm
double holder_seminorm_estimate(
    const std::function<double(std::span<const double>)>& f, const Box& piece,
    const std::vector<size_t>& active, const std::vector<double>& alpha,
    size_t n_pairs, uint64_t seed);

// ---- margin-step classification worlds ----------------------------------
//
// B congruent pieces, an r^s grid of cells over the active dims of each
// piece, the lexicographically first m = ceil(r^s / 2) cells carrying signed
// eta-bumps and a sampling ball of mass w each; the leftover mass sits
// uniformly on a residual box of inactive cells. eta = 1/2 everywhere except
// on the bumps, and all sampled ball mass has |eta - 1/2| = b'/2 exactly.

struct HypercubeConfig {
    size_t d = 1;
    size_t B = 1; // must be a power of two (congruent midpoint splits)
    size_t s = 1;
    double rho = 0.0;   // Tsybakov margin exponent the world realizes
    size_t r = 2;       // cells per active dim
    double lambda_inf = 1.0;
    double abar = 1.0;
    double c_phi = 1.0;
    double w_fraction = 0.9; // rho = 0: total ball mass B*m*w = w_fraction
    double margin_cap = 1.0; // rho > 0: B*m*w <= margin_cap * (b'/2)^rho
};

struct HypercubeSpec {
    HypercubeConfig cfg;
    uint64_t seed = 0;
    std::vector<Box> pieces;    // B congruent boxes, level order
    size_t m = 0;               // active cells per piece
    double w = 0.0;             // sampling mass per ball
    double b_small = 0.0;       // b = b' = c_phi * lambda_inf * (r/ell)^{-abar}
    double ell = 1.0;           // min piece side over all dims
    std::vector<int8_t> sigma;  // B*m signs in {-1, +1}
    std::optional<Box> residual; // A0; absent when the grid has no slack
};

HypercubeSpec make_hypercube(const HypercubeConfig& cfg, uint64_t seed);
double hypercube_eta_at(const HypercubeSpec& spec, std::span<const double> x);
EtaOracle hypercube_eta(const HypercubeSpec& spec);
Marginal hypercube_marginal(const HypercubeSpec& spec);

// X from the ball/residual mixture, Y ~ Bernoulli(eta(X))
Dataset sample_hypercube(const HypercubeSpec& spec, size_t n, uint64_t seed);

// ---- noise ---------------------------------------------------------------

struct NoiseModel {
    enum class Kind { none, gaussian, orlicz, student_t };
    Kind kind = Kind::none;
    double scale = 1.0; // K for gaussian; sd multiplier elsewhere
    double beta = 2.0;  // orlicz exponent, >= 1
    double dof = 3.0;   // student-t degrees of freedom, > 2

    static NoiseModel none() { return {}; }
    static NoiseModel gaussian(double K);
    static NoiseModel orlicz(double scale, double beta);
    static NoiseModel student_t(double dof, double scale = 1.0);

    double draw(Rng& rng) const;
    double sd() const; // standard deviation (the K entering lambda rules)
};

// X i.i.d. from the marginal, Y = f*(X) + xi. Covariates use a noise-model
// independent stream, so two calls with the same seed and different noise
// see literally identical X.
Dataset sample_regression(const PshabSpec& spec, const NoiseModel& noise,
                          size_t n, uint64_t seed, const Marginal& marginal);
Dataset sample_regression(const Truth& truth, const NoiseModel& noise,
                          size_t n, uint64_t seed, const Marginal& marginal);

// ---- spec serialization --------------------------------------------------

std::string pshab_to_json(const PshabSpec& spec);
PshabSpec pshab_from_json(const std::string& text);
std::string hypercube_to_json(const HypercubeSpec& spec);
HypercubeSpec hypercube_from_json(const std::string& text);

} // namespace ermtree
