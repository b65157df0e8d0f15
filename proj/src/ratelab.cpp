#include "ermtree/ratelab.hpp"

#include "ermtree/io_util.hpp"
#include "ermtree/parallel.hpp"
#include "ermtree/solver.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

namespace ermtree {

using nlohmann::json;

// ---- rate targets ----------------------------------------------------------

double target_exponent(RateKind kind, double s, double abar, double rho,
                       double m) {
    if (!(s >= 1.0)) throw ConfigError("rate target: s must be >= 1");
    if (!(abar > 0.0) || !(abar <= 1.0))
        throw ConfigError("rate target: abar must lie in (0, 1]");
    if (!(rho >= 0.0)) throw ConfigError("rate target: rho must be >= 0");
    switch (kind) {
    case RateKind::regression: return -2.0 * abar / (s + 2.0 * abar);
    case RateKind::classification:
        return -(1.0 + rho) * abar / (s + (2.0 + rho) * abar);
    case RateKind::approx_regression: return -2.0 * abar / s;
    case RateKind::approx_classification: return -(1.0 + rho) * abar / s;
    case RateKind::heavy_tail:
        if (!(m > 2.0))
            throw ConfigError("rate target: heavy-tail m must exceed 2");
        return -2.0 * (1.0 - 2.0 / m) * abar / (s + 2.0 * abar);
    }
    throw ConfigError("rate target: unknown kind");
}

// ---- slope fitting ---------------------------------------------------------

LineFit fit_power_law(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ConfigError("power-law fit: need matching x/y with >= 2 points");
    size_t n = x.size();
    std::vector<double> lx(n), ly(n);
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw ConfigError("power-law fit: inputs must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
        mx += lx[i];
        my += ly[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (!(sxx > 0.0))
        throw ConfigError("power-law fit: x values must not all coincide");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (n > 2) {
        double rss = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double r = ly[i] - fit.intercept - fit.slope * lx[i];
            rss += r * r;
        }
        fit.std_err = std::sqrt(std::max(0.0, rss) / double(n - 2) / sxx);
    }
    return fit;
}

// ---- penalization schedules -------------------------------------------------

std::vector<double> Schedule::default_c_grid() {
    std::vector<double> g(7);
    for (size_t i = 0; i < g.size(); ++i)
        g[i] = std::pow(10.0, -2.0 + 3.0 * double(i) / 6.0);
    return g;
}

Schedule Schedule::regression(double M, double K) {
    Schedule s;
    s.c_grid = default_c_grid();
    s.theta = 1.0;
    s.K = K;
    s.M = M;
    s.loss = LossKind::squared;
    s.leaf_cap = 64;
    s.validate();
    return s;
}

Schedule Schedule::classification(double rho) {
    if (!(rho >= 0.0)) throw ConfigError("schedule: rho must be >= 0");
    Schedule s;
    s.c_grid = default_c_grid();
    s.theta = (1.0 + rho) / (2.0 + rho);
    s.K = 0.0;
    s.M = 1.0;
    s.loss = LossKind::zero_one;
    s.leaf_cap = 48;
    s.validate();
    return s;
}

double Schedule::lambda_scale(size_t n, size_t d) const {
    if (n < 2 || d < 1)
        throw ConfigError("lambda scale: need n >= 2 and d >= 1");
    double base = (std::log(double(n) * double(d)) + u) / double(n);
    if (loss == LossKind::squared) return (M + K) * (M + K) * base;
    return std::pow(base, theta);
}

void Schedule::validate() const {
    if (c_grid.empty()) throw ConfigError("schedule: c grid must be nonempty");
    double prev = 0.0;
    for (double c : c_grid) {
        if (!(c > prev) || !std::isfinite(c))
            throw ConfigError("schedule: c grid must be positive and strictly "
                              "increasing");
        prev = c;
    }
    if (!(u >= 0.0)) throw ConfigError("schedule: u must be >= 0");
    if (!(validation_fraction > 0.0) || !(validation_fraction < 0.5))
        throw ConfigError("schedule: validation fraction must lie in (0, 0.5)");
    if (leaf_cap < 1) throw ConfigError("schedule: leaf cap must be >= 1");
    // theta = (1+rho)/(2+rho) starts at 1/2 for rho = 0 and approaches 1
    if (!(theta >= 0.5) || !(theta <= 1.0))
        throw ConfigError("schedule: theta must lie in [1/2, 1]");
    if (!(K >= 0.0)) throw ConfigError("schedule: K must be >= 0");
    if (loss == LossKind::squared && (!(M > 0.0) || !std::isfinite(M)))
        throw ConfigError("schedule: squared loss needs a finite M > 0");
}

size_t penalized_argmin(const RiskFrontier& frontier, size_t n, double lambda,
                        double theta) {
    if (frontier.total.empty())
        throw ConfigError("penalized argmin: empty frontier");
    if (n == 0) throw ConfigError("penalized argmin: n must be >= 1");
    size_t best = 1;
    double best_obj = kInf;
    for (size_t l = 1; l <= frontier.max_leaves(); ++l) {
        double obj = frontier.total[l - 1] / double(n) +
                     lambda * std::pow(double(l), theta);
        if (obj < best_obj) {
            best_obj = obj;
            best = l;
        }
    }
    return best;
}

// ---- sweep internals ---------------------------------------------------------

namespace {

uint64_t rep_seed(uint64_t master, size_t point, size_t rep) {
    return Rng(master, 0).split(point).split(rep).next_u64();
}

// eval gets its own stream off the replication seed so adding evaluation
// draws can never perturb the data
uint64_t eval_seed(uint64_t rep_seed) { return Rng(rep_seed, 3).next_u64(); }

Dataset slice_rows(const Dataset& data, size_t lo, size_t hi) {
    size_t d = data.d();
    std::vector<double> xs((hi - lo) * d), ys(hi - lo);
    for (size_t i = lo; i < hi; ++i) {
        std::span<const double> row = data.row(i);
        std::copy(row.begin(), row.end(), xs.begin() + (i - lo) * d);
        ys[i - lo] = data.y(i);
    }
    return Dataset(std::move(xs), std::move(ys), d);
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw ConfigError("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    double pos = q * double(v.size() - 1);
    size_t i = std::min(size_t(pos), v.size() - 2);
    double frac = pos - double(i);
    return v[i] * (1.0 - frac) + v[i + 1] * frac;
}

FitConfig frontier_config(const Schedule& sch) {
    FitConfig fc;
    fc.loss = sch.loss;
    fc.sup_bound = sch.loss == LossKind::squared ? sch.M : kInf;
    return fc;
}

// pick the c whose held-out risk is smallest; on ties prefer the larger c
// (stronger regularization), hence the <= in an ascending scan
size_t pick_c(std::span<const double> val_risk) {
    size_t best = 0;
    double best_risk = kInf;
    for (size_t ci = 0; ci < val_risk.size(); ++ci) {
        if (val_risk[ci] <= best_risk) {
            best_risk = val_risk[ci];
            best = ci;
        }
    }
    return best;
}

// a replication's world: the sample plus a scorer binding whatever frozen
// truth objects the excess risk needs
struct RepWorld {
    Dataset data;
    std::function<double(const TreeModel&, uint64_t eval_seed)> score;
};

struct RepState {
    bool ok = false;     // pass 1 survived
    bool scored = false; // pass 2 survived
    uint64_t seed = 0;
    size_t d = 1;
    std::vector<double> val; // per-c held-out mean risk
    RiskFrontier frontier;   // full-sample frontier, reused in pass 2
    std::function<double(const TreeModel&, uint64_t)> score;
    double excess = 0.0;
};

void finalize_slope(RateReport& rep) {
    std::vector<double> xs, ys;
    bool any = false, all_tiny = true;
    for (const RatePoint& p : rep.points) {
        if (p.reps == 0) continue;
        any = true;
        if (p.median > 1e-8) all_tiny = false;
        if (p.median > 0.0) {
            xs.push_back(p.x);
            ys.push_back(p.median);
        }
    }
    if (any && all_tiny) {
        // realizable worlds sit at quantization level; a log-log slope of
        // noise would be meaningless, so the check passes by construction
        rep.slope_skipped_flat = true;
        rep.within_tolerance = true;
    } else if (xs.size() >= 2) {
        LineFit fit = fit_power_law(xs, ys);
        rep.slope = fit.slope;
        rep.slope_stderr = fit.std_err;
        rep.within_tolerance = std::abs(rep.slope - rep.target) <= rep.tolerance;
    } else {
        rep.within_tolerance = false;
    }
    std::vector<double> usable;
    for (const RatePoint& p : rep.points)
        if (p.reps > 0) usable.push_back(p.median);
    rep.nonmonotone_prefix = usable.size() >= 2 && usable[1] > usable[0];
}

void validate_sweep(const SweepConfig& cfg) {
    if (cfg.n_grid.size() < 3)
        throw ConfigError("rate sweep: need at least 3 grid points");
    size_t prev = 0;
    for (size_t n : cfg.n_grid) {
        if (n <= prev)
            throw ConfigError("rate sweep: n grid must be strictly increasing");
        prev = n;
    }
    if (cfg.reps < 1) throw ConfigError("rate sweep: reps must be >= 1");
    if (cfg.n_test < 1) throw ConfigError("rate sweep: n_test must be >= 1");
    if (!(cfg.tolerance > 0.0)) throw ConfigError("rate sweep: tolerance must be positive");
    if (!std::isfinite(cfg.target)) throw ConfigError("rate sweep: target must be finite");
    cfg.schedule.validate();
    size_t n0 = cfg.n_grid.front();
    size_t n_val = size_t(double(n0) * cfg.schedule.validation_fraction);
    if (n_val < 1 || n_val >= n0)
        throw ConfigError("rate sweep: smallest n leaves no validation split");
}

RateReport run_sweep_impl(
    const SweepConfig& cfg,
    const std::function<RepWorld(size_t n, uint64_t seed)>& make_rep) {
    validate_sweep(cfg);
    const Schedule& sch = cfg.schedule;

    RateReport report;
    report.sweep_var = "n";
    report.target = cfg.target;
    report.tolerance = cfg.tolerance;

    for (size_t pi = 0; pi < cfg.n_grid.size(); ++pi) {
        size_t n = cfg.n_grid[pi];
        size_t n_val = size_t(double(n) * sch.validation_fraction);
        size_t n_fit = n - n_val;

        std::vector<RepState> st(cfg.reps);
        parallel_for(cfg.reps, [&](size_t r) {
            RepState& s = st[r];
            try {
                s.seed = rep_seed(cfg.seed, pi, r);
                RepWorld w = make_rep(n, s.seed);
                s.d = w.data.d();
                s.score = std::move(w.score);

                FitConfig fc = frontier_config(sch);
                RiskFrontier fr_fit =
                    risk_frontier(slice_rows(w.data, 0, n_fit), fc, sch.leaf_cap);
                Dataset held = slice_rows(w.data, n_fit, n);
                double scale_fit = sch.lambda_scale(n_fit, s.d);
                s.val.resize(sch.c_grid.size());
                for (size_t ci = 0; ci < sch.c_grid.size(); ++ci) {
                    size_t l = penalized_argmin(fr_fit, n_fit,
                                                sch.c_grid[ci] * scale_fit,
                                                sch.theta);
                    s.val[ci] = empirical_risk(fr_fit.trees[l - 1], held).mean;
                }
                s.frontier = risk_frontier(w.data, fc, sch.leaf_cap);
                s.ok = true;
            } catch (const std::exception&) {
                s.ok = false; // guard rail or config failure: skip this rep
            }
        });

        RatePoint pt;
        pt.x = double(n);
        size_t n_ok = 0;
        for (const RepState& s : st) n_ok += s.ok ? 1 : 0;
        if (n_ok == 0) {
            pt.failed = cfg.reps;
            report.points.push_back(pt);
            continue;
        }

        // c* minimizes the across-replication median held-out risk
        size_t best_c = 0;
        double best_med = kInf;
        for (size_t ci = 0; ci < sch.c_grid.size(); ++ci) {
            std::vector<double> risks;
            for (const RepState& s : st)
                if (s.ok) risks.push_back(s.val[ci]);
            double med = quantile(std::move(risks), 0.5);
            if (med <= best_med) {
                best_med = med;
                best_c = ci;
            }
        }

        parallel_for(cfg.reps, [&](size_t r) {
            RepState& s = st[r];
            if (!s.ok) return;
            try {
                double lambda = sch.c_grid[best_c] * sch.lambda_scale(n, s.d);
                size_t l = penalized_argmin(s.frontier, n, lambda, sch.theta);
                s.excess = s.score(s.frontier.trees[l - 1], eval_seed(s.seed));
                s.scored = true;
            } catch (const std::exception&) {
                s.scored = false;
            }
        });

        std::vector<double> excess;
        for (const RepState& s : st)
            if (s.scored) excess.push_back(s.excess);
        pt.reps = excess.size();
        pt.failed = cfg.reps - pt.reps;
        if (!excess.empty()) {
            pt.median = quantile(excess, 0.5);
            pt.iqr = quantile(excess, 0.75) - quantile(excess, 0.25);
        }
        report.points.push_back(pt);
    }

    finalize_slope(report);
    return report;
}

std::string format_count(size_t v) { return std::to_string(v); }

json report_json(const RateReport& r) {
    json pts = json::array();
    for (const RatePoint& p : r.points)
        pts.push_back({{"value", p.x},
                       {"median_excess", p.median},
                       {"iqr", p.iqr},
                       {"reps", p.reps},
                       {"failed", p.failed}});
    return json{{"sweep_var", r.sweep_var},
                {"slope", r.slope},
                {"stderr", r.slope_stderr},
                {"target", r.target},
                {"tolerance", r.tolerance},
                {"pass", r.within_tolerance},
                {"slope_skipped_flat", r.slope_skipped_flat},
                {"nonmonotone_prefix", r.nonmonotone_prefix},
                {"points", std::move(pts)}};
}

} // namespace

// ---- reports -----------------------------------------------------------------

std::string RateReport::csv() const {
    std::vector<std::vector<std::string>> rows;
    for (const RatePoint& p : points)
        rows.push_back({sweep_var, format_double(p.x), format_double(p.median),
                        format_double(p.iqr), format_count(p.reps)});
    return csv_table({"sweep_var", "value", "median_excess", "iqr", "reps"},
                     rows);
}

std::string RateReport::json_summary() const { return report_json(*this).dump(2); }

// ---- rate sweeps ---------------------------------------------------------------

RateReport run_rate_sweep(const RegressionWorld& world, const SweepConfig& cfg) {
    if (!world.marginal.draw)
        throw ConfigError("rate sweep: marginal has no sampler");
    if (cfg.schedule.loss != LossKind::squared)
        throw ConfigError("rate sweep: regression needs a squared-loss schedule");
    auto truth = std::make_shared<const Truth>(pshab_truth(world.spec));
    auto make_rep = [&world, truth, n_test = cfg.n_test](size_t n,
                                                         uint64_t seed) {
        RepWorld w{sample_regression(world.spec, world.noise, n, seed,
                                     world.marginal),
                   nullptr};
        w.score = [&world, truth, n_test](const TreeModel& tree, uint64_t es) {
            return excess_risk_regression(tree, *truth, world.marginal, n_test,
                                          es)
                .value;
        };
        return w;
    };
    return run_sweep_impl(cfg, make_rep);
}

RateReport run_rate_sweep(const ClassificationWorld& world,
                          const SweepConfig& cfg) {
    if (!world.family)
        throw ConfigError("rate sweep: classification world has no family");
    if (cfg.schedule.loss != LossKind::zero_one)
        throw ConfigError("rate sweep: classification needs a zero-one schedule");
    auto make_rep = [&world, n_test = cfg.n_test](size_t n, uint64_t seed) {
        // fresh bump signs every replication: the spec is part of the draw
        auto spec = std::make_shared<const HypercubeSpec>(
            make_hypercube(world.family(n), seed));
        RepWorld w{sample_hypercube(*spec, n, seed), nullptr};
        w.score = [spec, n_test](const TreeModel& tree, uint64_t es) {
            return excess_risk_classification(tree, hypercube_eta(*spec),
                                              hypercube_marginal(*spec), n_test,
                                              es)
                .value;
        };
        return w;
    };
    return run_sweep_impl(cfg, make_rep);
}

// ---- approximation sweeps -------------------------------------------------------

namespace {

RateReport approx_impl(std::span<const size_t> L_grid, double target,
                       double tolerance,
                       const std::function<double(size_t L, uint64_t seed)>& proxy,
                       uint64_t seed) {
    if (L_grid.size() < 3)
        throw ConfigError("approximation sweep: need at least 3 leaf counts");
    size_t prev = 0;
    for (size_t L : L_grid) {
        if (L <= prev)
            throw ConfigError("approximation sweep: L grid must be strictly "
                              "increasing");
        prev = L;
    }
    RateReport report;
    report.sweep_var = "L";
    report.target = target;
    report.tolerance = tolerance;
    for (size_t L : L_grid) {
        RatePoint pt;
        pt.x = double(L);
        pt.median = proxy(L, Rng(seed, 0).split(L).next_u64());
        pt.reps = 1;
        report.points.push_back(pt);
    }
    finalize_slope(report);
    return report;
}

} // namespace

RateReport run_approx_sweep(const Truth& truth, const Marginal& marginal,
                            std::span<const size_t> L_grid, size_t grid_n,
                            double target, double tolerance, size_t n_test,
                            uint64_t seed) {
    return approx_impl(
        L_grid, target, tolerance,
        [&](size_t L, uint64_t s) {
            return approximation_error_proxy(truth, marginal, L, grid_n, n_test,
                                             s);
        },
        seed);
}

RateReport run_approx_sweep(const EtaOracle& eta, const Marginal& marginal,
                            std::span<const size_t> L_grid, size_t grid_n,
                            double target, double tolerance, size_t n_test,
                            uint64_t seed) {
    return approx_impl(
        L_grid, target, tolerance,
        [&](size_t L, uint64_t s) {
            return approximation_error_proxy(eta, marginal, L, grid_n, n_test,
                                             s);
        },
        seed);
}

// ---- validation stability --------------------------------------------------------

double c_selection_agreement(const RegressionWorld& world, size_t n,
                             const Schedule& schedule, size_t reps,
                             uint64_t seed) {
    schedule.validate();
    if (reps < 1) throw ConfigError("c stability: reps must be >= 1");
    double vf2 = 2.0 * schedule.validation_fraction;
    if (!(vf2 < 1.0))
        throw ConfigError("c stability: doubled validation split exceeds the "
                          "sample");
    if (size_t(double(n) * schedule.validation_fraction) < 1)
        throw ConfigError("c stability: n too small for the validation split");

    std::vector<uint8_t> agree(reps, 0);
    parallel_for(reps, [&](size_t r) {
        try {
            uint64_t sr = rep_seed(seed, 0, r);
            Dataset data = sample_regression(world.spec, world.noise, n, sr,
                                             world.marginal);
            FitConfig fc = frontier_config(schedule);
            auto pick = [&](double vf) {
                size_t n_val = size_t(double(n) * vf);
                size_t n_fit = n - n_val;
                RiskFrontier fr = risk_frontier(slice_rows(data, 0, n_fit), fc,
                                                schedule.leaf_cap);
                Dataset held = slice_rows(data, n_fit, n);
                double scale = schedule.lambda_scale(n_fit, data.d());
                std::vector<double> val(schedule.c_grid.size());
                for (size_t ci = 0; ci < val.size(); ++ci) {
                    size_t l = penalized_argmin(
                        fr, n_fit, schedule.c_grid[ci] * scale, schedule.theta);
                    val[ci] = empirical_risk(fr.trees[l - 1], held).mean;
                }
                return pick_c(val);
            };
            size_t a = pick(schedule.validation_fraction);
            size_t b = pick(vf2);
            agree[r] = (a <= b + 1 && b <= a + 1) ? 1 : 0;
        } catch (const std::exception&) {
            agree[r] = 0;
        }
    });
    size_t hits = 0;
    for (uint8_t a : agree) hits += a;
    return double(hits) / double(reps);
}

// ---- oracle-inequality constants ----------------------------------------------

namespace {

struct OracleForm {
    // transform of the excess / proxy before differencing, and the
    // denominator exponent structure shared by both losses
    double power = 0.5;
    double mk2 = 1.0; // (M+K)^2 for regression, 1 for classification
};

OracleCheckReport oracle_impl(
    std::span<const size_t> ns, std::span<const size_t> Ls, double u,
    size_t reps, uint64_t seed, const OracleForm& form,
    const std::function<double(size_t L, uint64_t seed)>& proxy_at,
    const std::function<double(size_t L, size_t n, uint64_t seed,
                               uint64_t eval_seed)>& fit_excess,
    size_t d) {
    if (ns.empty() || Ls.empty())
        throw ConfigError("oracle check: need nonempty L and n grids");
    for (size_t n : ns)
        if (n < 4) throw ConfigError("oracle check: n must be >= 4");
    for (size_t L : Ls)
        if (L < 1) throw ConfigError("oracle check: L must be >= 1");
    if (reps < 1) throw ConfigError("oracle check: reps must be >= 1");
    if (!(u >= 0.0)) throw ConfigError("oracle check: u must be >= 0");

    OracleCheckReport rep;
    rep.Ls.assign(Ls.begin(), Ls.end());
    rep.ns.assign(ns.begin(), ns.end());
    rep.proxy.resize(Ls.size());
    for (size_t li = 0; li < Ls.size(); ++li)
        rep.proxy[li] = proxy_at(Ls[li], Rng(seed, 9).split(Ls[li]).next_u64());

    rep.chat.assign(Ls.size(), std::vector<double>(ns.size(), 0.0));
    for (size_t li = 0; li < Ls.size(); ++li) {
        for (size_t ni = 0; ni < ns.size(); ++ni) {
            size_t L = Ls[li], n = ns[ni];
            double denom = std::sqrt(
                form.mk2 * (double(L) * std::log(double(n) * double(d)) + u) /
                double(n));
            std::vector<double> vals(reps, -1.0);
            parallel_for(reps, [&](size_t r) {
                try {
                    uint64_t sr =
                        Rng(seed, 0).split(li).split(ni).split(r).next_u64();
                    double ex = fit_excess(L, n, sr, eval_seed(sr));
                    vals[r] = std::max(0.0, std::pow(ex, form.power) -
                                                std::pow(rep.proxy[li],
                                                         form.power)) /
                              denom;
                } catch (const std::exception&) {
                    vals[r] = -1.0;
                }
            });
            std::vector<double> ok;
            for (double v : vals)
                if (v >= 0.0) ok.push_back(v);
            rep.chat[li][ni] = ok.empty() ? 0.0 : quantile(ok, 0.5);
            rep.max_chat = std::max(rep.max_chat, rep.chat[li][ni]);
        }
        // n-stability of the implied constant, zero cells skipped
        double lo = kInf, hi = 0.0;
        for (double c : rep.chat[li]) {
            if (c <= 0.0) continue;
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        if (hi > 0.0 && lo < kInf)
            rep.worst_row_ratio = std::max(rep.worst_row_ratio, hi / lo);
    }
    return rep;
}

} // namespace

std::string OracleCheckReport::csv() const {
    std::vector<std::vector<std::string>> rows;
    for (size_t li = 0; li < Ls.size(); ++li)
        for (size_t ni = 0; ni < ns.size(); ++ni)
            rows.push_back({std::to_string(Ls[li]), std::to_string(ns[ni]),
                            format_double(chat[li][ni]),
                            format_double(proxy[li])});
    return csv_table({"L", "n", "chat", "proxy"}, rows);
}

OracleCheckReport oracle_inequality_check(const RegressionWorld& world,
                                          std::span<const size_t> ns,
                                          std::span<const size_t> Ls, double u,
                                          size_t reps, uint64_t seed,
                                          size_t grid_n, size_t n_test) {
    Truth truth = pshab_truth(world.spec);
    // an identically-zero truth reports sup bound 0; any positive clipping
    // level fits it, so fall back to the unit scale
    double M = truth.sup_bound > 0.0 ? truth.sup_bound : 1.0;
    double K = world.noise.sd();
    OracleForm form{0.5, (M + K) * (M + K)};
    return oracle_impl(
        ns, Ls, u, reps, seed, form,
        [&](size_t L, uint64_t s) {
            return approximation_error_proxy(truth, world.marginal, L, grid_n,
                                             n_test, s);
        },
        [&](size_t L, size_t n, uint64_t sr, uint64_t es) {
            Dataset data =
                sample_regression(world.spec, world.noise, n, sr, world.marginal);
            FitConfig fc;
            fc.max_leaves = L;
            fc.loss = LossKind::squared;
            fc.sup_bound = M;
            TreeModel tree = fit_constrained(data, fc);
            return excess_risk_regression(tree, truth, world.marginal, n_test,
                                          es)
                .value;
        },
        world.spec.cfg.d);
}

OracleCheckReport oracle_inequality_check(const HypercubeSpec& spec, double rho,
                                          std::span<const size_t> ns,
                                          std::span<const size_t> Ls, double u,
                                          size_t reps, uint64_t seed,
                                          size_t grid_n, size_t n_test) {
    if (!(rho >= 0.0)) throw ConfigError("oracle check: rho must be >= 0");
    EtaOracle eta = hypercube_eta(spec);
    Marginal marginal = hypercube_marginal(spec);
    OracleForm form{(2.0 + rho) / (2.0 + 2.0 * rho), 1.0};
    return oracle_impl(
        ns, Ls, u, reps, seed, form,
        [&](size_t L, uint64_t s) {
            return approximation_error_proxy(eta, marginal, L, grid_n, n_test,
                                             s);
        },
        [&](size_t L, size_t n, uint64_t sr, uint64_t es) {
            Dataset data = sample_hypercube(spec, n, sr);
            FitConfig fc;
            fc.max_leaves = L;
            fc.loss = LossKind::zero_one;
            TreeModel tree = fit_constrained(data, fc);
            return excess_risk_classification(tree, eta, marginal, n_test, es)
                .value;
        },
        spec.cfg.d);
}

// ---- leaf allocation --------------------------------------------------------

AllocationResult allocate_leaves(std::span<const double> v, size_t L,
                                 AllocMode mode, double theta) {
    size_t B = v.size();
    if (B == 0) throw ConfigError("allocation: v must be nonempty");
    if (!(theta > 0.0)) throw ConfigError("allocation: theta must be positive");
    if (L < B)
        throw ConfigError("allocation: need L >= len(v) so every piece keeps "
                          "a leaf");
    for (double vb : v)
        if (!(vb > 0.0) || !std::isfinite(vb))
            throw ConfigError("allocation: v entries must be positive and "
                              "finite");

    double expo = mode == AllocMode::sum ? 1.0 / (theta + 1.0) : 1.0 / theta;
    AllocationResult res;
    res.weights.resize(B);
    double total = 0.0;
    for (size_t b = 0; b < B; ++b) {
        res.weights[b] = std::pow(v[b], expo);
        total += res.weights[b];
    }
    for (double& w : res.weights) w /= total;

    res.continuous.resize(B);
    res.leaves.resize(B);
    size_t assigned = 0;
    double spare = double(L - B);
    for (size_t b = 0; b < B; ++b) {
        res.continuous[b] = double(L) * res.weights[b];
        res.leaves[b] = size_t(spare * res.weights[b]) + 1;
        assigned += res.leaves[b];
    }
    // the floors under-shoot by less than one each; hand the slack out from
    // the front so the result is deterministic
    size_t slack = L - assigned;
    for (size_t b = 0; b < B && slack > 0; ++b, --slack) ++res.leaves[b];
    return res;
}

// ---- heavy tails --------------------------------------------------------------

HeavyTailReport heavy_tail_comparison(const RegressionWorld& world,
                                      const SweepConfig& cfg,
                                      std::span<const double> m_values) {
    if (m_values.empty())
        throw ConfigError("heavy-tail comparison: need at least one m");
    for (double m : m_values)
        if (!(m > 2.0))
            throw ConfigError("heavy-tail comparison: every m must exceed 2");

    HeavyTailReport out;
    RegressionWorld arm = world;
    arm.noise = NoiseModel::gaussian(1.0);
    out.arms.push_back({"gaussian", arm.noise, run_rate_sweep(arm, cfg)});
    for (double m : m_values) {
        arm.noise = NoiseModel::student_t(m); // rescaled to unit variance
        std::string label = "t";
        if (m == std::floor(m) && m < 1e15)
            label += std::to_string(int64_t(m));
        else
            label += format_double(m);
        // finite moments slow the theory rate by the factor (1 - 2/m), so
        // each arm is judged against its own exponent
        SweepConfig arm_cfg = cfg;
        arm_cfg.target = cfg.target * (1.0 - 2.0 / m);
        out.arms.push_back({label, arm.noise, run_rate_sweep(arm, arm_cfg)});
    }
    return out;
}

std::string HeavyTailReport::csv() const {
    std::vector<std::vector<std::string>> rows;
    for (const HeavyTailArm& arm : arms)
        for (const RatePoint& p : arm.report.points)
            rows.push_back({arm.label, arm.report.sweep_var,
                            format_double(p.x), format_double(p.median),
                            format_double(p.iqr), format_count(p.reps)});
    return csv_table(
        {"arm", "sweep_var", "value", "median_excess", "iqr", "reps"}, rows);
}

std::string HeavyTailReport::json_summary() const {
    json arr = json::array();
    for (const HeavyTailArm& arm : arms) {
        json j = report_json(arm.report);
        j["label"] = arm.label;
        arr.push_back(std::move(j));
    }
    return json{{"arms", std::move(arr)}}.dump(2);
}

} // namespace ermtree
