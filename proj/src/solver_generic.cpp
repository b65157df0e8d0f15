#include "solver_detail.hpp"

#include <algorithm>
#include <cmath>

namespace ermtree {
namespace detail {

CellSolver::CellSolver(const Dataset& data, LossKind loss, double sup_bound, size_t budget)
    : data_(data), loss_(loss), sup_bound_(sup_bound), cap_(std::min(budget, data.n())) {
    if (cap_ == 0) cap_ = 1;
    std::vector<size_t> all(data.n());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    CellKey key(2 * data.d());
    for (size_t j = 0; j < data.d(); ++j) {
        key[2 * j] = 0;
        key[2 * j + 1] = int16_t(data.distinct(j).size() - 1);
    }
    root_ = &solve(std::move(key), std::move(all));
}

const CellSolver::Ent& CellSolver::at(const State& s, size_t l) {
    return s.front[std::min(l, s.front.size()) - 1];
}

// total order on candidate entries of one cell; matches the order
// brute_force_fit minimizes over realized trees
int CellSolver::cmp(const Ent& a, const Ent& b) {
    if (a.total != b.total) return a.total < b.total ? -1 : 1;
    if (a.leaves != b.leaves) return a.leaves < b.leaves ? -1 : 1;
    if (a.dim != b.dim) return a.dim < b.dim ? -1 : 1;
    if (a.dim < 0) return 0; // both leaves of the same cell
    if (a.rank != b.rank) return a.rank < b.rank ? -1 : 1;
    if (a.lleaves != b.lleaves) return a.lleaves < b.lleaves ? -1 : 1;
    // same split of the same cell, so the child states coincide; identical
    // child budgets mean identical subtrees by induction
    if (a.lb == b.lb && a.rb == b.rb) return 0;
    if (int c = cmp(at(*a.lch, a.lb), at(*b.lch, b.lb)); c != 0) return c;
    return cmp(at(*a.rch, a.rb), at(*b.rch, b.rb));
}

const CellSolver::State& CellSolver::solve(CellKey key, std::vector<size_t> members) {
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    State st;
    LeafFit lf = fit_leaf(data_, members, loss_, sup_bound_);
    st.leaf_value = lf.value;
    Ent leaf;
    leaf.total = lf.cost;
    leaf.leaves = 1;
    st.front.push_back(leaf);

    struct Cand {
        const State* l;
        const State* r;
        int16_t dim, rank;
    };
    std::vector<Cand> cands;
    size_t cap = std::min(cap_, members.size());
    if (cap > 1) {
        std::vector<int16_t> seen;
        for (size_t j = 0; j < data_.d(); ++j) {
            seen.clear();
            for (size_t i : members) seen.push_back(int16_t(data_.rank(i, j)));
            std::sort(seen.begin(), seen.end());
            seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
            // every rank but the member maximum: both children stay nonempty
            for (size_t t = 0; t + 1 < seen.size(); ++t) {
                int16_t r = seen[t];
                std::vector<size_t> ml, mr;
                for (size_t i : members)
                    (data_.rank(i, j) <= r ? ml : mr).push_back(i);
                auto box = [&](const std::vector<size_t>& ms) {
                    CellKey k(2 * data_.d());
                    for (size_t jj = 0; jj < data_.d(); ++jj) {
                        int16_t lo = int16_t(data_.rank(ms[0], jj)), hi = lo;
                        for (size_t i : ms) {
                            int16_t rk = int16_t(data_.rank(i, jj));
                            lo = std::min(lo, rk);
                            hi = std::max(hi, rk);
                        }
                        k[2 * jj] = lo;
                        k[2 * jj + 1] = hi;
                    }
                    return k;
                };
                CellKey kl = box(ml), kr = box(mr);
                const State& sl = solve(std::move(kl), std::move(ml));
                const State& sr = solve(std::move(kr), std::move(mr));
                cands.push_back({&sl, &sr, int16_t(j), r});
            }
        }
    }
    if (!cands.empty()) {
        for (size_t l = 2; l <= cap; ++l) {
            Ent best = st.front[l - 2]; // carry the smaller-budget optimum
            for (const Cand& c : cands) {
                size_t szl = c.l->front.size(), szr = c.r->front.size();
                size_t top = std::min(l - 1, szl);
                for (size_t ll = 1; ll <= top; ++ll) {
                    size_t lr = std::min(l - ll, szr);
                    const Ent& le = c.l->front[ll - 1];
                    const Ent& re = c.r->front[lr - 1];
                    Ent e;
                    e.total = le.total + re.total;
                    e.lch = c.l;
                    e.rch = c.r;
                    e.leaves = le.leaves + re.leaves;
                    e.lleaves = le.leaves;
                    e.dim = c.dim;
                    e.rank = c.rank;
                    e.lb = int16_t(ll);
                    e.rb = int16_t(lr);
                    if (cmp(e, best) < 0) best = e;
                }
            }
            st.front.push_back(best);
        }
    }
    auto [it, inserted] = memo_.emplace(std::move(key), std::move(st));
    return it->second;
}

double CellSolver::total(size_t l) const { return at(*root_, l).total; }

int CellSolver::emit(TreeModel& out, const State& st, size_t l) const {
    const Ent& e = at(st, l);
    int idx = int(out.nodes.size());
    out.nodes.emplace_back();
    if (e.dim < 0) {
        out.nodes[idx].value = st.leaf_value;
        return idx;
    }
    out.nodes[idx].dim = e.dim;
    out.nodes[idx].tau = data_.distinct(size_t(e.dim))[size_t(e.rank)];
    int lc = emit(out, *e.lch, size_t(e.lb));
    int rc = emit(out, *e.rch, size_t(e.rb));
    out.nodes[idx].left = lc;
    out.nodes[idx].right = rc;
    return idx;
}

TreeModel CellSolver::extract(size_t l) const {
    TreeModel tm;
    tm.loss = loss_;
    tm.sup_bound = sup_bound_;
    emit(tm, *root_, l);
    return tm;
}

void validate_fit(const Dataset& data, const FitConfig& cfg, bool penalized) {
    if (data.n() == 0) throw ConfigError("fit: dataset is empty");
    if (!penalized && cfg.max_leaves < 1)
        throw ConfigError("fit: max_leaves must be at least 1");
    if (!(cfg.sup_bound > 0))
        throw ConfigError("fit: sup_bound must be positive");
    if (cfg.loss == LossKind::zero_one && !data.labels_binary())
        throw ConfigError("fit: zero-one loss needs labels in {0,1}");
    if (penalized) {
        if (!cfg.penalty) throw ConfigError("fit: penalized fit needs a penalty");
        if (!(cfg.penalty->lambda >= 0))
            throw ConfigError("fit: penalty lambda must be nonnegative");
        if (!(cfg.penalty->theta > 0))
            throw ConfigError("fit: penalty theta must be positive");
    }
}

namespace {

// additive penalized engine (theta = 1): single best entry per cell under
// total loss + charge * leaves, same tie order as the frontier engine
class PenSolver {
  public:
    PenSolver(const Dataset& data, LossKind loss, double sup_bound, double charge)
        : data_(data), loss_(loss), sup_bound_(sup_bound), charge_(charge) {
        std::vector<size_t> all(data.n());
        for (size_t i = 0; i < all.size(); ++i) all[i] = i;
        CellKey key(2 * data.d());
        for (size_t j = 0; j < data.d(); ++j) {
            key[2 * j] = 0;
            key[2 * j + 1] = int16_t(data.distinct(j).size() - 1);
        }
        root_ = &solve(std::move(key), std::move(all));
    }

    TreeModel extract() const {
        TreeModel tm;
        tm.loss = loss_;
        tm.sup_bound = sup_bound_;
        emit(tm, *root_);
        return tm;
    }

  private:
    struct State;
    struct Ent {
        double obj = kInf;
        const State* lch = nullptr;
        const State* rch = nullptr;
        int32_t leaves = 0;
        int32_t lleaves = 0;
        int16_t dim = -1;
        int16_t rank = -1;
    };
    struct State {
        Ent best;
        double leaf_value = 0.0;
    };

    static int cmp(const Ent& a, const Ent& b) {
        if (a.obj != b.obj) return a.obj < b.obj ? -1 : 1;
        if (a.leaves != b.leaves) return a.leaves < b.leaves ? -1 : 1;
        if (a.dim != b.dim) return a.dim < b.dim ? -1 : 1;
        if (a.dim < 0) return 0;
        if (a.rank != b.rank) return a.rank < b.rank ? -1 : 1;
        if (a.lleaves != b.lleaves) return a.lleaves < b.lleaves ? -1 : 1;
        if (a.lch == b.lch && a.rch == b.rch) return 0;
        if (int c = cmp(a.lch->best, b.lch->best); c != 0) return c;
        return cmp(a.rch->best, b.rch->best);
    }

    const State& solve(CellKey key, std::vector<size_t> members) {
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        State st;
        LeafFit lf = fit_leaf(data_, members, loss_, sup_bound_);
        st.leaf_value = lf.value;
        st.best.obj = lf.cost + charge_;
        st.best.leaves = 1;
        if (members.size() > 1) {
            std::vector<int16_t> seen;
            for (size_t j = 0; j < data_.d(); ++j) {
                seen.clear();
                for (size_t i : members) seen.push_back(int16_t(data_.rank(i, j)));
                std::sort(seen.begin(), seen.end());
                seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
                for (size_t t = 0; t + 1 < seen.size(); ++t) {
                    int16_t r = seen[t];
                    std::vector<size_t> ml, mr;
                    for (size_t i : members)
                        (data_.rank(i, j) <= r ? ml : mr).push_back(i);
                    auto box = [&](const std::vector<size_t>& ms) {
                        CellKey k(2 * data_.d());
                        for (size_t jj = 0; jj < data_.d(); ++jj) {
                            int16_t lo = int16_t(data_.rank(ms[0], jj)), hi = lo;
                            for (size_t i : ms) {
                                int16_t rk = int16_t(data_.rank(i, jj));
                                lo = std::min(lo, rk);
                                hi = std::max(hi, rk);
                            }
                            k[2 * jj] = lo;
                            k[2 * jj + 1] = hi;
                        }
                        return k;
                    };
                    CellKey kl = box(ml), kr = box(mr);
                    const State& sl = solve(std::move(kl), std::move(ml));
                    const State& sr = solve(std::move(kr), std::move(mr));
                    Ent e;
                    e.obj = sl.best.obj + sr.best.obj;
                    e.lch = &sl;
                    e.rch = &sr;
                    e.leaves = sl.best.leaves + sr.best.leaves;
                    e.lleaves = sl.best.leaves;
                    e.dim = int16_t(j);
                    e.rank = r;
                    if (cmp(e, st.best) < 0) st.best = e;
                }
            }
        }
        auto [it, inserted] = memo_.emplace(std::move(key), std::move(st));
        return it->second;
    }

    int emit(TreeModel& out, const State& st) const {
        const Ent& e = st.best;
        int idx = int(out.nodes.size());
        out.nodes.emplace_back();
        if (e.dim < 0) {
            out.nodes[idx].value = st.leaf_value;
            return idx;
        }
        out.nodes[idx].dim = e.dim;
        out.nodes[idx].tau = data_.distinct(size_t(e.dim))[size_t(e.rank)];
        int lc = emit(out, *e.lch);
        int rc = emit(out, *e.rch);
        out.nodes[idx].left = lc;
        out.nodes[idx].right = rc;
        return idx;
    }

    const Dataset& data_;
    LossKind loss_;
    double sup_bound_;
    double charge_;
    std::unordered_map<CellKey, State, CellKeyHash> memo_;
    const State* root_ = nullptr;
};

bool use_segment_route(const Dataset& data) {
    return data.d() == 1 && data.n() > kSegCutoff;
}

} // namespace
} // namespace detail

using detail::CellSolver;
using detail::SegSolver;

RiskFrontier risk_frontier(const Dataset& data, const FitConfig& cfg, size_t max_leaves) {
    FitConfig probe = cfg;
    probe.max_leaves = max_leaves;
    detail::validate_fit(data, probe, false);
    RiskFrontier out;
    if (detail::use_segment_route(data)) {
        SegSolver seg(data, cfg.loss, cfg.sup_bound);
        size_t top = std::min(max_leaves, seg.segment_cap());
        seg.ensure(top);
        for (size_t l = 1; l <= top; ++l) {
            out.total.push_back(seg.budget_total(l));
            out.trees.push_back(seg.rebuild(seg.budget_argmin(l)));
        }
    } else {
        CellSolver dp(data, cfg.loss, cfg.sup_bound, max_leaves);
        for (size_t l = 1; l <= dp.budget(); ++l) {
            out.total.push_back(dp.total(l));
            out.trees.push_back(dp.extract(l));
        }
    }
    return out;
}

TreeModel fit_constrained(const Dataset& data, const FitConfig& cfg) {
    detail::validate_fit(data, cfg, false);
    if (detail::use_segment_route(data)) {
        SegSolver seg(data, cfg.loss, cfg.sup_bound);
        size_t top = std::min(cfg.max_leaves, seg.segment_cap());
        seg.ensure(top);
        return seg.rebuild(seg.budget_argmin(top));
    }
    CellSolver dp(data, cfg.loss, cfg.sup_bound, cfg.max_leaves);
    return dp.extract(cfg.max_leaves);
}

TreeModel fit_penalized(const Dataset& data, const FitConfig& cfg) {
    detail::validate_fit(data, cfg, true);
    const double lambda = cfg.penalty->lambda;
    const double theta = cfg.penalty->theta;
    const double n = double(data.n());
    size_t cap = cfg.max_leaves ? std::min(cfg.max_leaves, data.n()) : data.n();

    if (detail::use_segment_route(data)) {
        SegSolver seg(data, cfg.loss, cfg.sup_bound);
        cap = std::min(cap, seg.segment_cap());
        double best = kInf;
        size_t best_l = 1;
        for (size_t l = 1; l <= cap; ++l) {
            // the penalty alone already loses to the incumbent: no larger
            // budget can win, so stop growing the frontier
            if (l > 1 && lambda * std::pow(double(l), theta) >= best) break;
            seg.ensure(l);
            double obj = seg.budget_total(l) / n + lambda * std::pow(double(l), theta);
            if (obj < best) {
                best = obj;
                best_l = l;
            }
        }
        return seg.rebuild(seg.budget_argmin(best_l));
    }

    CellSolver dp(data, cfg.loss, cfg.sup_bound, cap);
    double best = kInf;
    size_t best_l = 1;
    for (size_t l = 1; l <= dp.budget(); ++l) {
        if (l > 1 && lambda * std::pow(double(l), theta) >= best) break;
        double obj = dp.total(l) / n + lambda * std::pow(double(l), theta);
        if (obj < best) {
            best = obj;
            best_l = l;
        }
    }
    return dp.extract(best_l);
}

TreeModel fit_penalized_additive(const Dataset& data, const FitConfig& cfg) {
    detail::validate_fit(data, cfg, true);
    if (cfg.penalty->theta != 1.0)
        throw ConfigError("fit: additive penalized route needs theta == 1");
    double charge = double(data.n()) * cfg.penalty->lambda;
    if (detail::use_segment_route(data)) {
        SegSolver seg(data, cfg.loss, cfg.sup_bound);
        return seg.additive(charge);
    }
    detail::PenSolver pen(data, cfg.loss, cfg.sup_bound, charge);
    return pen.extract();
}

} // namespace ermtree
