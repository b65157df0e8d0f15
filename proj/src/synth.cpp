#include "ermtree/synth.hpp"
#include "ermtree/bump.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

using json = nlohmann::json;

namespace ermtree {

double Box::volume() const {
    double v = 1.0;
    for (size_t j = 0; j < d(); ++j) v *= side(j);
    return v;
}

bool Box::contains(std::span<const double> x) const {
    for (size_t j = 0; j < d(); ++j)
        if (x[j] < lo[j] || x[j] > hi[j]) return false;
    return true;
}

Marginal Marginal::uniform(size_t d) {
    if (d == 0) throw ConfigError("marginal needs dimension >= 1");
    Box unit{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    Marginal m;
    m.dim = d;
    m.boxes = {{unit, 1.0}};
    m.draw = [d](Rng& rng, std::span<double> out) {
        for (size_t j = 0; j < d; ++j) out[j] = rng.uniform();
    };
    return m;
}

Marginal Marginal::piecewise(std::vector<WeightedBox> parts) {
    if (parts.empty()) throw ConfigError("piecewise marginal needs boxes");
    double total = 0.0;
    for (const auto& p : parts) {
        if (p.weight <= 0.0) throw ConfigError("marginal weights must be positive");
        if (p.box.volume() <= 0.0) throw ConfigError("marginal boxes must have volume");
        total += p.weight;
    }
    for (auto& p : parts) p.weight /= total;
    Marginal m;
    m.dim = parts.front().box.d();
    m.boxes = parts;
    m.draw = [parts = m.boxes](Rng& rng, std::span<double> out) {
        double u = rng.uniform(), acc = 0.0;
        const Box* pick = &parts.back().box;
        for (const auto& p : parts) {
            acc += p.weight;
            if (u < acc) {
                pick = &p.box;
                break;
            }
        }
        for (size_t j = 0; j < out.size(); ++j)
            out[j] = rng.uniform(pick->lo[j], pick->hi[j]);
    };
    return m;
}

double harmonic_mean(std::span<const double> alpha) {
    if (alpha.empty()) throw ConfigError("harmonic mean of an empty vector");
    double inv = 0.0;
    for (double a : alpha) {
        if (a <= 0.0) throw ConfigError("harmonic mean needs positive entries");
        inv += 1.0 / a;
    }
    return double(alpha.size()) / inv;
}

namespace {

// scale the drawn exponents so their harmonic mean hits the target exactly,
// water-filling against the range ends: clamped components stay put and the
// free ones absorb the remaining inverse-sum budget
std::vector<double> fit_harmonic(std::vector<double> a, double target,
                                 double lo, double hi) {
    const size_t s = a.size();
    const double want_inv = double(s) / target; // required sum of 1/alpha
    std::vector<bool> fixed(s, false);
    for (;;) {
        double have = 0.0, free_inv = 0.0;
        size_t nfree = 0;
        for (size_t k = 0; k < s; ++k) {
            if (fixed[k]) have += 1.0 / a[k];
            else {
                free_inv += 1.0 / a[k];
                ++nfree;
            }
        }
        if (nfree == 0) break;
        double rest = want_inv - have;
        if (rest <= 0.0) throw ConfigError("infeasible smoothness target");
        double scale = free_inv / rest; // multiply free alphas by this
        bool clamped = false;
        for (size_t k = 0; k < s; ++k) {
            if (fixed[k]) continue;
            double v = a[k] * scale;
            if (v > hi) {
                a[k] = hi;
                fixed[k] = clamped = true;
            } else if (v < lo) {
                a[k] = lo;
                fixed[k] = clamped = true;
            }
        }
        if (!clamped) {
            for (size_t k = 0; k < s; ++k)
                if (!fixed[k]) a[k] *= scale;
            break;
        }
    }
    double got = harmonic_mean(a);
    if (std::abs(got - target) > 1e-9 * target)
        throw ConfigError("infeasible smoothness target");
    return a;
}

std::vector<Box> split_largest(size_t d, size_t B, Rng& rng) {
    std::vector<Box> boxes{
        Box{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)}};
    for (size_t step = 1; step < B; ++step) {
        size_t pick = 0;
        for (size_t i = 1; i < boxes.size(); ++i)
            if (boxes[i].volume() > boxes[pick].volume()) pick = i;
        size_t dim = rng.below(d);
        Box left = boxes[pick], right = boxes[pick];
        double mid = 0.5 * (left.lo[dim] + left.hi[dim]);
        left.hi[dim] = mid;
        right.lo[dim] = mid;
        boxes.erase(boxes.begin() + long(pick));
        boxes.push_back(left);
        boxes.push_back(right);
    }
    return boxes;
}

std::vector<size_t> draw_subset(size_t d, size_t s, Rng& rng) {
    std::vector<size_t> idx(d);
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (size_t k = 0; k < s; ++k)
        std::swap(idx[k], idx[k + rng.below(d - k)]);
    idx.resize(s);
    std::sort(idx.begin(), idx.end());
    return idx;
}

size_t grid_for(size_t bumps, size_t s) {
    size_t r = 1;
    auto cells = [&](size_t rr) {
        size_t c = 1;
        for (size_t k = 0; k < s; ++k) {
            if (c > (size_t(1) << 40) / rr) return size_t(1) << 40;
            c *= rr;
        }
        return c;
    };
    while (cells(r) < bumps) ++r;
    return r;
}

} // namespace

PshabSpec make_pshab(const PshabConfig& cfg, uint64_t seed) {
    if (cfg.d == 0) throw ConfigError("pshab: d must be >= 1");
    if (cfg.s == 0 || cfg.s > cfg.d) throw ConfigError("pshab: need 1 <= s <= d");
    if (cfg.B == 0) throw ConfigError("pshab: B must be >= 1");
    auto [alo, ahi] = cfg.alpha_range;
    if (!(alo > 0.0 && alo <= ahi && ahi <= 1.0))
        throw ConfigError("pshab: alpha_range must sit inside (0, 1]");
    auto [llo, lhi] = cfg.lambda_range;
    if (!(llo > 0.0 && llo <= lhi))
        throw ConfigError("pshab: lambda_range must be positive");
    if (cfg.target_abar && (*cfg.target_abar < alo || *cfg.target_abar > ahi))
        throw ConfigError("infeasible smoothness target");
    if (cfg.base_scale && *cfg.base_scale <= 0.0)
        throw ConfigError("pshab: base_scale must be positive");

    Rng rng(seed, 1);
    PshabSpec spec;
    spec.cfg = cfg;
    spec.seed = seed;

    for (Box& box : split_largest(cfg.d, cfg.B, rng)) {
        PshabPiece piece;
        piece.box = std::move(box);
        piece.active = draw_subset(cfg.d, cfg.s, rng);
        piece.alpha.resize(cfg.s);
        for (double& a : piece.alpha) a = rng.uniform(alo, ahi);
        if (cfg.target_abar)
            piece.alpha = fit_harmonic(piece.alpha, *cfg.target_abar, alo, ahi);
        piece.abar = harmonic_mean(piece.alpha);
        piece.lambda = rng.uniform(llo, lhi);
        piece.grid_r = grid_for(cfg.bumps_per_piece, cfg.s);

        // half-spacing rule: the widest scale whose supports still fit the
        // grid cells; an explicit override may only shrink it
        double rho_max = kInf;
        for (size_t k = 0; k < cfg.s; ++k) {
            double spacing = piece.box.side(piece.active[k]) / double(piece.grid_r);
            rho_max = std::min(rho_max, std::pow(spacing, piece.alpha[k] / piece.abar));
        }
        piece.base_scale = cfg.base_scale.value_or(rho_max);
        if (piece.base_scale > rho_max * (1.0 + 1e-12))
            throw ConfigError("pshab: base_scale overlaps neighbouring bumps");
        piece.radii.resize(cfg.s);
        for (size_t k = 0; k < cfg.s; ++k)
            piece.radii[k] = std::pow(piece.base_scale, piece.abar / piece.alpha[k]);
        piece.amp = piece.lambda * std::pow(piece.base_scale, piece.abar) / kBumpCal;

        piece.atoms.resize(cfg.bumps_per_piece);
        for (size_t a = 0; a < cfg.bumps_per_piece; ++a) {
            BumpAtom& atom = piece.atoms[a];
            atom.center.resize(cfg.d);
            for (size_t j = 0; j < cfg.d; ++j)
                atom.center[j] = 0.5 * (piece.box.lo[j] + piece.box.hi[j]);
            size_t rem = a;
            for (size_t k = cfg.s; k-- > 0;) { // least significant = last active dim
                size_t t = rem % piece.grid_r;
                rem /= piece.grid_r;
                size_t j = piece.active[k];
                atom.center[j] = piece.box.lo[j] +
                                 (2.0 * double(t) + 1.0) /
                                     (2.0 * double(piece.grid_r)) *
                                     piece.box.side(j);
            }
            atom.sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
        }
        spec.pieces.push_back(std::move(piece));
    }
    return spec;
}

double eval_pshab(const PshabSpec& spec, std::span<const double> x) {
    for (const PshabPiece& piece : spec.pieces) {
        if (!piece.box.contains(x)) continue;
        double v = 0.0;
        for (const BumpAtom& atom : piece.atoms) {
            double dist2 = 0.0;
            for (size_t k = 0; k < piece.active.size(); ++k) {
                double dz = (x[piece.active[k]] - atom.center[piece.active[k]]) /
                            piece.radii[k];
                dist2 += dz * dz;
            }
            if (dist2 >= 0.25) continue; // outside the support
            v += atom.sign * piece.amp * bump_u(std::sqrt(dist2));
        }
        return v;
    }
    return 0.0; // outside the domain
}

double pshab_sup_bound(const PshabSpec& spec) {
    double m = 0.0;
    for (const PshabPiece& piece : spec.pieces)
        if (!piece.atoms.empty()) m = std::max(m, piece.amp);
    return m;
}

Truth pshab_truth(const PshabSpec& spec) {
    auto held = std::make_shared<const PshabSpec>(spec);
    Truth t;
    t.f = [held](std::span<const double> x) { return eval_pshab(*held, x); };
    t.sup_bound = pshab_sup_bound(spec);
    return t;
}

double holder_seminorm_estimate(
    const std::function<double(std::span<const double>)>& f, const Box& piece,
    const std::vector<size_t>& active, const std::vector<double>& alpha,
    size_t n_pairs, uint64_t seed) {
    if (n_pairs == 0) throw ConfigError("seminorm estimate needs n_pairs >= 1");
    if (active.size() != alpha.size())
        throw ConfigError("seminorm estimate: active/alpha size mismatch");
    Rng rng(seed, 5);
    size_t d = piece.d();
    std::vector<double> x1(d), x2(d);
    double best = 0.0;
    for (size_t p = 0; p < n_pairs; ++p) {
        for (size_t j = 0; j < d; ++j) {
            x1[j] = rng.uniform(piece.lo[j], piece.hi[j]);
            x2[j] = rng.uniform(piece.lo[j], piece.hi[j]);
        }
        double denom = 0.0;
        for (size_t k = 0; k < active.size(); ++k)
            denom += std::pow(std::abs(x1[active[k]] - x2[active[k]]), alpha[k]);
        if (denom == 0.0) continue;
        best = std::max(best, std::abs(f(x1) - f(x2)) / denom);
    }
    return best;
}

// ---- hypercube ------------------------------------------------------------

namespace {

size_t cells_per_piece(size_t r, size_t s) {
    size_t c = 1;
    for (size_t k = 0; k < s; ++k) {
        if (c > (size_t(1) << 40) / r)
            throw ConfigError("hypercube: r^s is out of range");
        c *= r;
    }
    return c;
}

// lexicographic cell index of x inside the piece, plus its rescaled offset
// from the cell center (active dims only)
size_t locate_cell(const HypercubeSpec& spec, const Box& piece,
                   std::span<const double> x, std::span<double> offset) {
    size_t r = spec.cfg.r, s = spec.cfg.s;
    size_t idx = 0;
    for (size_t k = 0; k < s; ++k) {
        double span = piece.side(k);
        double rel = (x[k] - piece.lo[k]) / span * double(r);
        auto t = size_t(std::clamp(rel, 0.0, double(r) - 1.0));
        idx = idx * r + t;
        offset[k] = rel - (double(t) + 0.5); // in cell units, [-1/2, 1/2]
    }
    return idx;
}

} // namespace

HypercubeSpec make_hypercube(const HypercubeConfig& cfg, uint64_t seed) {
    if (cfg.d == 0) throw ConfigError("hypercube: d must be >= 1");
    if (cfg.s == 0 || cfg.s > cfg.d)
        throw ConfigError("hypercube: need 1 <= s <= d");
    if (cfg.B == 0 || (cfg.B & (cfg.B - 1)) != 0)
        throw ConfigError("hypercube: B must be a power of two for congruent pieces");
    if (cfg.r == 0) throw ConfigError("hypercube: r must be >= 1");
    if (cfg.rho < 0.0) throw ConfigError("hypercube: rho must be >= 0");
    if (cfg.lambda_inf <= 0.0 || cfg.c_phi <= 0.0)
        throw ConfigError("hypercube: amplitudes must be positive");
    if (!(cfg.abar > 0.0 && cfg.abar <= 1.0))
        throw ConfigError("hypercube: abar must lie in (0, 1]");
    if (!(cfg.w_fraction > 0.0 && cfg.w_fraction <= 1.0))
        throw ConfigError("hypercube: w_fraction must lie in (0, 1]");
    if (cfg.margin_cap <= 0.0)
        throw ConfigError("hypercube: margin_cap must be positive");

    HypercubeSpec spec;
    spec.cfg = cfg;
    spec.seed = seed;

    // congruent pieces: midpoint splits cycling through the dimensions
    spec.pieces = {
        Box{std::vector<double>(cfg.d, 0.0), std::vector<double>(cfg.d, 1.0)}};
    for (size_t level = 0; (size_t(1) << level) < cfg.B; ++level) {
        size_t dim = level % cfg.d;
        std::vector<Box> next;
        next.reserve(spec.pieces.size() * 2);
        for (const Box& b : spec.pieces) {
            Box left = b, right = b;
            double mid = 0.5 * (b.lo[dim] + b.hi[dim]);
            left.hi[dim] = mid;
            right.lo[dim] = mid;
            next.push_back(std::move(left));
            next.push_back(std::move(right));
        }
        spec.pieces = std::move(next);
    }

    spec.ell = 1.0;
    for (size_t j = 0; j < cfg.d; ++j)
        spec.ell = std::min(spec.ell, spec.pieces.front().side(j));

    spec.b_small =
        cfg.c_phi * cfg.lambda_inf * std::pow(double(cfg.r) / spec.ell, -cfg.abar);
    if (spec.b_small > 1.0)
        throw ConfigError("hypercube: amplitude pushes eta outside [0, 1]; "
                          "shrink c_phi * lambda_inf or grow r");

    size_t cells = cells_per_piece(cfg.r, cfg.s);
    spec.m = (cells + 1) / 2;
    double bm = double(cfg.B) * double(spec.m);
    if (cfg.rho == 0.0) {
        spec.w = cfg.w_fraction / bm;
    } else {
        double tsybakov = cfg.margin_cap * std::pow(spec.b_small / 2.0, cfg.rho);
        spec.w = std::min(1.0, tsybakov) / bm;
    }

    if (cells == spec.m) {
        // every cell carries a ball; only a full-mass configuration is valid
        double leftover = 1.0 - bm * spec.w;
        if (std::abs(leftover) > 1e-9)
            throw ConfigError("hypercube: no residual region exists but the "
                              "ball masses do not sum to 1");
        spec.w = 1.0 / bm; // exact
    } else {
        // residual box: the trailing fully-inactive rows of the last piece
        // along the first active dimension
        size_t row = cells / cfg.r;             // cells per leading slice
        size_t used = (spec.m + row - 1) / row; // leading rows touched
        Box slab = spec.pieces.back();
        slab.lo[0] += double(used) / double(cfg.r) * slab.side(0);
        if (!(slab.side(0) > 0.0))
            throw ConfigError("hypercube: residual slab is empty");
        spec.residual = std::move(slab);
    }

    Rng rng(seed, 2);
    spec.sigma.resize(cfg.B * spec.m);
    for (auto& s : spec.sigma) s = rng.bernoulli(0.5) ? int8_t(1) : int8_t(-1);
    return spec;
}

double hypercube_eta_at(const HypercubeSpec& spec, std::span<const double> x) {
    const auto& cfg = spec.cfg;
    for (size_t b = 0; b < spec.pieces.size(); ++b) {
        const Box& piece = spec.pieces[b];
        if (!piece.contains(x)) continue;
        std::vector<double> off(cfg.s);
        size_t cell = locate_cell(spec, piece, x, off);
        if (cell >= spec.m) return 0.5;
        double dist2 = 0.0;
        for (double e : off) dist2 += e * e;
        double psi = spec.b_small * bump_u(std::sqrt(dist2));
        return 0.5 * (1.0 + double(spec.sigma[b * spec.m + cell]) * psi);
    }
    return 0.5;
}

EtaOracle hypercube_eta(const HypercubeSpec& spec) {
    auto held = std::make_shared<const HypercubeSpec>(spec);
    EtaOracle o;
    o.eta = [held](std::span<const double> x) {
        return hypercube_eta_at(*held, x);
    };
    double bmw = double(spec.cfg.B) * double(spec.m) * spec.w;
    o.step = MarginStep{bmw, spec.b_small / 2.0, 1.0 - bmw};
    return o;
}

Marginal hypercube_marginal(const HypercubeSpec& spec) {
    auto held = std::make_shared<const HypercubeSpec>(spec);
    Marginal m;
    m.dim = spec.cfg.d;
    if (spec.cfg.s == 1) {
        // with one active dimension every ball is an axis interval, so the
        // marginal is piecewise uniform: exact overlays and stratified grids
        // become available. The sampler below is kept untouched so draws stay
        // byte-identical either way.
        const auto& cfg = spec.cfg;
        for (size_t p = 0; p < cfg.B; ++p) {
            const Box& piece = spec.pieces[p];
            double side = piece.side(0);
            for (size_t t = 0; t < spec.m; ++t) {
                Box ball = piece;
                double center =
                    piece.lo[0] +
                    (2.0 * double(t) + 1.0) / (2.0 * double(cfg.r)) * side;
                double half = 0.25 * side / double(cfg.r);
                ball.lo[0] = center - half;
                ball.hi[0] = center + half;
                m.boxes.push_back({ball, spec.w});
            }
        }
        double rest = 1.0 - double(cfg.B) * double(spec.m) * spec.w;
        if (spec.residual && rest > 0.0) m.boxes.push_back({*spec.residual, rest});
    }
    m.draw = [held](Rng& rng, std::span<double> out) {
        const HypercubeSpec& spec = *held;
        const auto& cfg = spec.cfg;
        double bmw = double(cfg.B) * double(spec.m) * spec.w;
        if (rng.uniform() < bmw) {
            size_t ball = rng.below(cfg.B * spec.m);
            const Box& piece = spec.pieces[ball / spec.m];
            size_t cell = ball % spec.m;
            // rescaled offsets inside the radius-1/4 ball, per-coordinate
            // rejection from its bounding cube
            std::vector<double> off(cfg.s);
            int tries = 0;
            for (;;) {
                double d2 = 0.0;
                for (auto& e : off) {
                    e = rng.uniform(-0.25, 0.25);
                    d2 += e * e;
                }
                if (d2 <= 0.0625) break;
                if (++tries > 100000)
                    throw GuardRailError("hypercube sampler: rejection cap hit");
            }
            // decode the cell's lex index, last active dim least significant
            std::vector<size_t> t(cfg.s);
            size_t rem = cell;
            for (size_t k = cfg.s; k-- > 0;) {
                t[k] = rem % cfg.r;
                rem /= cfg.r;
            }
            for (size_t j = 0; j < cfg.d; ++j) {
                if (j < cfg.s) {
                    double center = piece.lo[j] + (2.0 * double(t[j]) + 1.0) /
                                                      (2.0 * double(cfg.r)) *
                                                      piece.side(j);
                    out[j] = center + off[j] * piece.side(j) / double(cfg.r);
                } else {
                    out[j] = rng.uniform(piece.lo[j], piece.hi[j]);
                }
            }
        } else {
            const Box& slab = *spec.residual;
            for (size_t j = 0; j < cfg.d; ++j)
                out[j] = rng.uniform(slab.lo[j], slab.hi[j]);
        }
    };
    return m;
}

Dataset sample_hypercube(const HypercubeSpec& spec, size_t n, uint64_t seed) {
    if (n == 0) throw ConfigError("sample_hypercube: n must be >= 1");
    Marginal marginal = hypercube_marginal(spec);
    Rng rng_x(seed, 21), rng_y(seed, 22);
    size_t d = spec.cfg.d;
    std::vector<double> xs(n * d), ys(n);
    for (size_t i = 0; i < n; ++i) {
        std::span<double> row(xs.data() + i * d, d);
        marginal.draw(rng_x, row);
        ys[i] = rng_y.bernoulli(hypercube_eta_at(spec, row)) ? 1.0 : 0.0;
    }
    return Dataset(std::move(xs), std::move(ys), d);
}

// ---- noise ----------------------------------------------------------------

NoiseModel NoiseModel::gaussian(double K) {
    if (K < 0.0) throw ConfigError("noise: gaussian K must be >= 0");
    NoiseModel n;
    n.kind = Kind::gaussian;
    n.scale = K;
    return n;
}

NoiseModel NoiseModel::orlicz(double scale, double beta) {
    if (scale <= 0.0 || beta < 1.0)
        throw ConfigError("noise: orlicz needs scale > 0 and beta >= 1");
    NoiseModel n;
    n.kind = Kind::orlicz;
    n.scale = scale;
    n.beta = beta;
    return n;
}

NoiseModel NoiseModel::student_t(double dof, double scale) {
    if (dof <= 2.0) throw ConfigError("noise: student_t needs dof > 2");
    if (scale <= 0.0) throw ConfigError("noise: scale must be positive");
    NoiseModel n;
    n.kind = Kind::student_t;
    n.dof = dof;
    n.scale = scale;
    return n;
}

double NoiseModel::draw(Rng& rng) const {
    switch (kind) {
    case Kind::none: return 0.0;
    case Kind::gaussian: return scale * rng.normal();
    case Kind::orlicz: return scale * rng.exp_power(beta);
    case Kind::student_t:
        // unit variance before scaling: Var t_m = m / (m - 2)
        return scale * rng.student_t(dof) / std::sqrt(dof / (dof - 2.0));
    }
    return 0.0;
}

double NoiseModel::sd() const {
    switch (kind) {
    case Kind::none: return 0.0;
    case Kind::gaussian: return scale;
    case Kind::orlicz:
        // density ~ exp(-|t/scale|^beta): variance scale^2 G(3/b)/G(1/b)
        return scale * std::sqrt(std::exp(std::lgamma(3.0 / beta) -
                                          std::lgamma(1.0 / beta)));
    case Kind::student_t: return scale;
    }
    return 0.0;
}

Dataset sample_regression(const Truth& truth, const NoiseModel& noise, size_t n,
                          uint64_t seed, const Marginal& marginal) {
    if (n == 0) throw ConfigError("sample_regression: n must be >= 1");
    // covariates and noise on separate streams: same seed + different noise
    // model reuses the exact same X
    Rng rng_x(seed, 11), rng_noise(seed, 13);
    size_t d = marginal.dim;
    std::vector<double> xs(n * d), ys(n);
    for (size_t i = 0; i < n; ++i) {
        std::span<double> row(xs.data() + i * d, d);
        marginal.draw(rng_x, row);
        ys[i] = truth.f(row) + noise.draw(rng_noise);
    }
    return Dataset(std::move(xs), std::move(ys), d);
}

Dataset sample_regression(const PshabSpec& spec, const NoiseModel& noise,
                          size_t n, uint64_t seed, const Marginal& marginal) {
    return sample_regression(pshab_truth(spec), noise, n, seed, marginal);
}

// ---- serialization ---------------------------------------------------------

namespace {

json box_to_json(const Box& b) { return json{{"lo", b.lo}, {"hi", b.hi}}; }

Box box_from_json(const json& j) {
    Box b{j.at("lo").get<std::vector<double>>(),
          j.at("hi").get<std::vector<double>>()};
    if (b.lo.size() != b.hi.size())
        throw ConfigError("box: lo/hi size mismatch");
    return b;
}

} // namespace

std::string pshab_to_json(const PshabSpec& spec) {
    json pieces = json::array();
    for (const PshabPiece& p : spec.pieces) {
        json atoms = json::array();
        for (const BumpAtom& a : p.atoms)
            atoms.push_back({{"center", a.center}, {"sign", a.sign}});
        pieces.push_back({{"box", box_to_json(p.box)},
                          {"active", p.active},
                          {"alpha", p.alpha},
                          {"abar", p.abar},
                          {"lambda", p.lambda},
                          {"grid_r", p.grid_r},
                          {"base_scale", p.base_scale},
                          {"radii", p.radii},
                          {"amp", p.amp},
                          {"atoms", std::move(atoms)}});
    }
    json j{{"kind", "pshab"},
           {"seed", spec.seed},
           {"d", spec.cfg.d},
           {"B", spec.cfg.B},
           {"s", spec.cfg.s},
           {"alpha_range", {spec.cfg.alpha_range.first, spec.cfg.alpha_range.second}},
           {"lambda_range", {spec.cfg.lambda_range.first, spec.cfg.lambda_range.second}},
           {"bumps_per_piece", spec.cfg.bumps_per_piece},
           {"pieces", std::move(pieces)}};
    if (spec.cfg.target_abar) j["target_abar"] = *spec.cfg.target_abar;
    if (spec.cfg.base_scale) j["base_scale"] = *spec.cfg.base_scale;
    return j.dump(2);
}

PshabSpec pshab_from_json(const std::string& text) {
    try {
        json j = json::parse(text);
        if (j.at("kind") != "pshab") throw ConfigError("spec kind is not pshab");
        PshabSpec spec;
        spec.seed = j.at("seed").get<uint64_t>();
        spec.cfg.d = j.at("d").get<size_t>();
        spec.cfg.B = j.at("B").get<size_t>();
        spec.cfg.s = j.at("s").get<size_t>();
        auto ar = j.at("alpha_range").get<std::vector<double>>();
        auto lr = j.at("lambda_range").get<std::vector<double>>();
        spec.cfg.alpha_range = {ar.at(0), ar.at(1)};
        spec.cfg.lambda_range = {lr.at(0), lr.at(1)};
        spec.cfg.bumps_per_piece = j.at("bumps_per_piece").get<size_t>();
        if (j.contains("target_abar"))
            spec.cfg.target_abar = j["target_abar"].get<double>();
        if (j.contains("base_scale"))
            spec.cfg.base_scale = j["base_scale"].get<double>();
        for (const json& pj : j.at("pieces")) {
            PshabPiece p;
            p.box = box_from_json(pj.at("box"));
            p.active = pj.at("active").get<std::vector<size_t>>();
            p.alpha = pj.at("alpha").get<std::vector<double>>();
            p.abar = pj.at("abar").get<double>();
            p.lambda = pj.at("lambda").get<double>();
            p.grid_r = pj.at("grid_r").get<size_t>();
            p.base_scale = pj.at("base_scale").get<double>();
            p.radii = pj.at("radii").get<std::vector<double>>();
            p.amp = pj.at("amp").get<double>();
            for (const json& aj : pj.at("atoms"))
                p.atoms.push_back({aj.at("center").get<std::vector<double>>(),
                                   aj.at("sign").get<double>()});
            spec.pieces.push_back(std::move(p));
        }
        return spec;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("pshab spec parse: ") + e.what());
    }
}

std::string hypercube_to_json(const HypercubeSpec& spec) {
    json pieces = json::array();
    for (const Box& b : spec.pieces) pieces.push_back(box_to_json(b));
    std::vector<int> sigma(spec.sigma.begin(), spec.sigma.end());
    json j{{"kind", "hypercube"},
           {"seed", spec.seed},
           {"d", spec.cfg.d},
           {"B", spec.cfg.B},
           {"s", spec.cfg.s},
           {"rho", spec.cfg.rho},
           {"r", spec.cfg.r},
           {"lambda_inf", spec.cfg.lambda_inf},
           {"abar", spec.cfg.abar},
           {"c_phi", spec.cfg.c_phi},
           {"w_fraction", spec.cfg.w_fraction},
           {"margin_cap", spec.cfg.margin_cap},
           {"m", spec.m},
           {"w", spec.w},
           {"b", spec.b_small},
           {"b_prime", spec.b_small}, // equal by construction
           {"ell", spec.ell},
           {"sigma", std::move(sigma)},
           {"pieces", std::move(pieces)}};
    if (spec.residual) j["residual"] = box_to_json(*spec.residual);
    return j.dump(2);
}

HypercubeSpec hypercube_from_json(const std::string& text) {
    try {
        json j = json::parse(text);
        if (j.at("kind") != "hypercube")
            throw ConfigError("spec kind is not hypercube");
        HypercubeSpec spec;
        spec.seed = j.at("seed").get<uint64_t>();
        spec.cfg.d = j.at("d").get<size_t>();
        spec.cfg.B = j.at("B").get<size_t>();
        spec.cfg.s = j.at("s").get<size_t>();
        spec.cfg.rho = j.at("rho").get<double>();
        spec.cfg.r = j.at("r").get<size_t>();
        spec.cfg.lambda_inf = j.at("lambda_inf").get<double>();
        spec.cfg.abar = j.at("abar").get<double>();
        spec.cfg.c_phi = j.at("c_phi").get<double>();
        spec.cfg.w_fraction = j.at("w_fraction").get<double>();
        spec.cfg.margin_cap = j.at("margin_cap").get<double>();
        spec.m = j.at("m").get<size_t>();
        spec.w = j.at("w").get<double>();
        spec.b_small = j.at("b").get<double>();
        spec.ell = j.at("ell").get<double>();
        for (int v : j.at("sigma").get<std::vector<int>>())
            spec.sigma.push_back(int8_t(v));
        for (const json& pj : j.at("pieces"))
            spec.pieces.push_back(box_from_json(pj));
        if (j.contains("residual"))
            spec.residual = box_from_json(j["residual"]);
        return spec;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("hypercube spec parse: ") + e.what());
    }
}

} // namespace ermtree
