#include "ermtree/eval.hpp"
#include "ermtree/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ermtree {

namespace {

double triple_volume(const Box& a, const Box& b, const Box& c) {
    double v = 1.0;
    for (size_t j = 0; j < a.d(); ++j) {
        double lo = std::max({a.lo[j], b.lo[j], c.lo[j]});
        double hi = std::min({a.hi[j], b.hi[j], c.hi[j]});
        if (hi <= lo) return 0.0;
        v *= hi - lo;
    }
    return v;
}

bool model_is_binary(const TreeModel& model) {
    for (const TreeNode& node : model.nodes)
        if (node.dim < 0 && node.value != 0.0 && node.value != 1.0)
            return false;
    return true;
}

// mean and standard error of term(i) over n Monte Carlo indices, with the
// worker-count-independent two-pass reduction
ExcessRiskEstimate mc_estimate(size_t n,
                               const std::function<double(size_t)>& term) {
    double s1 = parallel_sum(n, term);
    double s2 = parallel_sum(n, [&](size_t i) {
        double v = term(i);
        return v * v;
    });
    double mean = s1 / double(n);
    double var = std::max(0.0, s2 / double(n) - mean * mean);
    return {mean, std::sqrt(var / double(n)), "monte-carlo"};
}

} // namespace

PiecewiseConstant tree_regions(const TreeModel& model, const Box& domain) {
    PiecewiseConstant out;
    std::vector<std::pair<int, Box>> stack{{0, domain}};
    while (!stack.empty()) {
        auto [idx, box] = std::move(stack.back());
        stack.pop_back();
        const TreeNode& node = model.nodes.at(size_t(idx));
        if (node.dim < 0) {
            out.boxes.push_back(std::move(box));
            out.values.push_back(node.value);
            continue;
        }
        Box left = box, right = std::move(box);
        left.hi[size_t(node.dim)] = std::min(left.hi[size_t(node.dim)], node.tau);
        right.lo[size_t(node.dim)] = std::max(right.lo[size_t(node.dim)], node.tau);
        if (right.side(size_t(node.dim)) > 0.0)
            stack.emplace_back(node.right, std::move(right));
        if (left.side(size_t(node.dim)) > 0.0)
            stack.emplace_back(node.left, std::move(left));
    }
    return out;
}

ExcessRiskEstimate excess_risk_regression(const TreeModel& model,
                                          const Truth& truth,
                                          const Marginal& marginal,
                                          size_t n_test, uint64_t seed,
                                          EvalMethod method) {
    bool overlay_ok = truth.piecewise.has_value() && marginal.piecewise_uniform();
    if (method == EvalMethod::overlay && !overlay_ok)
        throw ConfigError("overlay integral needs a piecewise-constant truth "
                          "and a piecewise-uniform marginal");
    if (method == EvalMethod::automatic && overlay_ok)
        method = EvalMethod::overlay;

    if (method == EvalMethod::overlay) {
        Box domain{std::vector<double>(marginal.dim, 0.0),
                   std::vector<double>(marginal.dim, 1.0)};
        PiecewiseConstant regions = tree_regions(model, domain);
        const PiecewiseConstant& pieces = *truth.piecewise;
        double acc = 0.0, measure = 0.0;
        for (size_t a = 0; a < regions.boxes.size(); ++a) {
            for (size_t b = 0; b < pieces.boxes.size(); ++b) {
                double dv = regions.values[a] - pieces.values[b];
                for (const WeightedBox& wb : marginal.boxes) {
                    double vol =
                        triple_volume(regions.boxes[a], pieces.boxes[b], wb.box);
                    if (vol <= 0.0) continue;
                    double meas = wb.weight * vol / wb.box.volume();
                    measure += meas;
                    acc += meas * dv * dv;
                }
            }
        }
        if (std::abs(measure - 1.0) > 1e-12)
            throw ConfigError("overlay integral: truth pieces do not tile the "
                              "marginal support");
        return {acc, 0.0, "exact-overlay"};
    }

    if (n_test == 0) throw ConfigError("monte carlo needs n_test >= 1");
    Rng base(seed, 31);
    size_t d = marginal.dim;
    auto term = [&](size_t i) {
        Rng sub = base.split(i);
        std::vector<double> x(d);
        marginal.draw(sub, x);
        double diff = model.predict(x) - truth.f(x);
        return diff * diff;
    };
    return mc_estimate(n_test, term);
}

ExcessRiskEstimate excess_risk_classification(const TreeModel& model,
                                              const EtaOracle& eta,
                                              const Marginal& marginal,
                                              size_t n_test, uint64_t seed) {
    if (!model_is_binary(model))
        throw ConfigError("classification excess risk needs 0/1 leaf values");
    if (n_test == 0) throw ConfigError("monte carlo needs n_test >= 1");
    Rng base(seed, 37);
    size_t d = marginal.dim;
    auto term = [&](size_t i) {
        Rng sub = base.split(i);
        std::vector<double> x(d);
        marginal.draw(sub, x);
        double e = eta.eta(x);
        double bayes = e >= 0.5 ? 1.0 : 0.0;
        if (model.predict(x) == bayes) return 0.0;
        return 2.0 * std::abs(e - 0.5);
    };
    return mc_estimate(n_test, term);
}

MarginProfile margin_profile(const EtaOracle& eta, const Marginal& marginal,
                             std::span<const double> t_grid, size_t n_mc,
                             uint64_t seed) {
    if (n_mc == 0) throw ConfigError("margin profile needs n_mc >= 1");
    for (double t : t_grid)
        if (!(t > 0.0 && t <= 0.5))
            throw ConfigError("margin profile thresholds must lie in (0, 1/2]");

    MarginProfile out;
    out.t.assign(t_grid.begin(), t_grid.end());
    out.mass.assign(t_grid.size(), 0.0);

    Rng rng(seed, 41);
    std::vector<double> x(marginal.dim);
    size_t zero = 0;
    std::vector<size_t> hits(t_grid.size(), 0);
    for (size_t i = 0; i < n_mc; ++i) {
        marginal.draw(rng, x);
        double m = std::abs(eta.eta(x) - 0.5);
        if (m == 0.0) {
            ++zero;
            continue;
        }
        if (m >= 0.5) continue; // deterministic labels: outside the band
        for (size_t k = 0; k < t_grid.size(); ++k)
            if (m <= t_grid[k]) ++hits[k];
    }
    for (size_t k = 0; k < t_grid.size(); ++k)
        out.mass[k] = double(hits[k]) / double(n_mc);
    out.zero_mass = double(zero) / double(n_mc);

    if (eta.step) {
        out.exact.resize(t_grid.size());
        for (size_t k = 0; k < t_grid.size(); ++k)
            out.exact[k] = (eta.step->at < 0.5 && t_grid[k] >= eta.step->at)
                               ? eta.step->mass
                               : 0.0;
    }
    return out;
}

std::vector<double> stratified_points(const Marginal& marginal, size_t grid_n) {
    if (!marginal.piecewise_uniform())
        throw ConfigError("stratified grid needs a piecewise-uniform marginal");
    if (grid_n == 0) throw ConfigError("stratified grid needs grid_n >= 1");

    size_t d = marginal.dim;
    size_t B = marginal.boxes.size();

    // largest-remainder apportionment of grid_n among the boxes
    std::vector<size_t> share(B);
    std::vector<std::pair<double, size_t>> rem(B);
    size_t assigned = 0;
    for (size_t k = 0; k < B; ++k) {
        double target = double(grid_n) * marginal.boxes[k].weight;
        share[k] = size_t(std::floor(target));
        assigned += share[k];
        rem[k] = {target - std::floor(target), k};
    }
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (size_t i = 0; assigned < grid_n; ++i, ++assigned)
        ++share[rem[i % B].second];

    std::vector<double> pts;
    pts.reserve(grid_n * d);
    for (size_t k = 0; k < B; ++k) {
        const Box& box = marginal.boxes[k].box;
        if (share[k] == 0) continue;
        if (d == 1) {
            for (size_t i = 0; i < share[k]; ++i)
                pts.push_back(box.lo[0] + (double(i) + 0.5) / double(share[k]) *
                                              box.side(0));
        } else {
            auto g = size_t(std::llround(std::pow(double(share[k]), 1.0 / double(d))));
            g = std::max<size_t>(g, 1);
            std::vector<size_t> idx(d, 0);
            for (;;) {
                for (size_t j = 0; j < d; ++j)
                    pts.push_back(box.lo[j] + (double(idx[j]) + 0.5) / double(g) *
                                                  box.side(j));
                size_t j = d;
                while (j > 0 && ++idx[j - 1] == g) idx[--j] = 0;
                if (j == 0) break;
            }
        }
    }
    return pts;
}

namespace {

Dataset noiseless_grid(const Marginal& marginal, size_t grid_n,
                       const std::function<double(std::span<const double>)>& label) {
    std::vector<double> xs = stratified_points(marginal, grid_n);
    size_t d = marginal.dim;
    size_t n = xs.size() / d;
    std::vector<double> ys(n);
    for (size_t i = 0; i < n; ++i)
        ys[i] = label(std::span<const double>(xs.data() + i * d, d));
    return Dataset(std::move(xs), std::move(ys), d);
}

} // namespace

double approximation_error_proxy(const Truth& truth, const Marginal& marginal,
                                 size_t L, size_t grid_n, size_t n_test,
                                 uint64_t seed) {
    if (L == 0) throw ConfigError("approximation proxy needs L >= 1");
    if (grid_n < L) throw ConfigError("approximation proxy needs grid_n >= L");
    Dataset grid = noiseless_grid(marginal, grid_n, truth.f);
    double M = truth.sup_bound;
    if (!std::isfinite(M)) {
        M = 0.0;
        for (double y : grid.ys()) M = std::max(M, std::abs(y));
    }
    if (!(M > 0.0)) M = 1.0; // identically-zero truth: any clip level fits it
    FitConfig cfg;
    cfg.max_leaves = L;
    cfg.loss = LossKind::squared;
    cfg.sup_bound = M;
    TreeModel tree = fit_constrained(grid, cfg);
    return excess_risk_regression(tree, truth, marginal, n_test, seed).value;
}

double approximation_error_proxy(const EtaOracle& eta, const Marginal& marginal,
                                 size_t L, size_t grid_n, size_t n_test,
                                 uint64_t seed) {
    if (L == 0) throw ConfigError("approximation proxy needs L >= 1");
    if (grid_n < L) throw ConfigError("approximation proxy needs grid_n >= L");
    Dataset grid = noiseless_grid(marginal, grid_n, [&](std::span<const double> x) {
        return eta.eta(x) >= 0.5 ? 1.0 : 0.0;
    });
    FitConfig cfg;
    cfg.max_leaves = L;
    cfg.loss = LossKind::zero_one;
    TreeModel tree = fit_constrained(grid, cfg);
    return excess_risk_classification(tree, eta, marginal, n_test, seed).value;
}

} // namespace ermtree
