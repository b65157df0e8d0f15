#include "solver_detail.hpp"

#include <algorithm>
#include <stdexcept>

namespace ermtree::detail {

SegSolver::SegSolver(const Dataset& data, LossKind loss, double sup_bound, Exec exec)
    : data_(data), loss_(loss), sup_bound_(sup_bound), exec_(exec) {
    if (data.d() != 1)
        throw std::logic_error("SegSolver: one-dimensional data only");
    m_ = data.distinct(0).size();
    pc_.assign(m_ + 1, 0);
    po_.assign(m_ + 1, 0);
    ps_.assign(m_ + 1, 0.0);
    pss_.assign(m_ + 1, 0.0);
    // per-rank accumulation in point index order, then prefix
    for (size_t i = 0; i < data.n(); ++i) {
        size_t r = size_t(data.rank(i, 0));
        pc_[r + 1] += 1;
        double y = data.y(i);
        ps_[r + 1] += y;
        pss_[r + 1] += y * y;
        if (y == 1.0) po_[r + 1] += 1;
    }
    for (size_t k = 1; k <= m_; ++k) {
        pc_[k] += pc_[k - 1];
        po_[k] += po_[k - 1];
        ps_[k] += ps_[k - 1];
        pss_[k] += pss_[k - 1];
    }
}

double SegSolver::seg_cost(size_t i, size_t j) const {
    int64_t cnt = pc_[j] - pc_[i];
    if (loss_ == LossKind::zero_one) {
        int64_t ones = po_[j] - po_[i];
        return double(std::min(ones, cnt - ones));
    }
    double s = ps_[j] - ps_[i];
    double ss = pss_[j] - pss_[i];
    double c = std::clamp(s / double(cnt), -sup_bound_, sup_bound_);
    return std::max(0.0, ss - 2.0 * c * s + c * c * double(cnt));
}

double SegSolver::seg_value(size_t i, size_t j) const {
    int64_t cnt = pc_[j] - pc_[i];
    if (loss_ == LossKind::zero_one) {
        int64_t ones = po_[j] - po_[i];
        return 2 * ones >= cnt ? 1.0 : 0.0;
    }
    double s = ps_[j] - ps_[i];
    return std::clamp(s / double(cnt), -sup_bound_, sup_bound_);
}

void SegSolver::ensure(size_t layers) {
    layers = std::min(layers, m_);
    while (layers_.size() < layers) {
        size_t t = layers_.size() + 1;
        std::vector<double> cur(m_, kInf);
        if (t == 1) {
            for (size_t i = 0; i < m_; ++i) cur[i] = seg_cost(i, m_);
        } else {
            const std::vector<double>& prev = layers_.back();
            // S_t[i] = min over cut j of cost[i,j) + S_{t-1}[j]; each slot is
            // written by exactly one index, so the kernel is order-free
            parallel_for(
                m_,
                [&](size_t i) {
                    if (m_ - i < t) return; // fewer ranks than segments
                    double best = kInf;
                    size_t top = m_ - (t - 1);
                    for (size_t j = i + 1; j <= top; ++j) {
                        double v = seg_cost(i, j) + prev[j];
                        if (v < best) best = v;
                    }
                    cur[i] = best;
                },
                exec_);
        }
        layers_.push_back(std::move(cur));
    }
}

double SegSolver::budget_total(size_t l) const {
    return exact_total(budget_argmin(l));
}

size_t SegSolver::budget_argmin(size_t l) const {
    l = std::min(l, layers_.size());
    size_t arg = 1;
    for (size_t t = 2; t <= l; ++t)
        if (layers_[t - 1][0] < layers_[arg - 1][0]) arg = t;
    return arg;
}

namespace {

TreeModel comb_tree(const Dataset& data, LossKind loss, double sup_bound,
                    const std::vector<size_t>& cuts,
                    const std::function<double(size_t, size_t)>& value, size_t m) {
    TreeModel tm;
    tm.loss = loss;
    tm.sup_bound = sup_bound;
    size_t start = 0;
    int prev = -1;
    for (size_t c : cuts) {
        int idx = int(tm.nodes.size());
        tm.nodes.emplace_back();
        tm.nodes[idx].dim = 0;
        tm.nodes[idx].tau = data.distinct(0)[c - 1];
        int leaf = int(tm.nodes.size());
        tm.nodes.emplace_back();
        tm.nodes[leaf].value = value(start, c);
        tm.nodes[idx].left = leaf;
        if (prev >= 0) tm.nodes[prev].right = idx;
        prev = idx;
        start = c;
    }
    int leaf = int(tm.nodes.size());
    tm.nodes.emplace_back();
    tm.nodes[leaf].value = value(start, m);
    if (prev >= 0) tm.nodes[prev].right = leaf;
    return tm;
}

} // namespace

TreeModel SegSolver::rebuild(size_t l) const {
    l = std::min(l, layers_.size());
    // walk left to right taking the smallest cut that reproduces the table
    // value exactly; the result is the lexicographically smallest optimal
    // boundary sequence, realized as a right-leaning comb (the tie-break
    // canonical tree)
    std::vector<size_t> cuts;
    size_t i = 0;
    for (size_t rem = l; rem > 1; --rem) {
        double target = layers_[rem - 1][i];
        bool found = false;
        for (size_t j = i + 1; j + (rem - 1) <= m_; ++j) {
            if (seg_cost(i, j) + layers_[rem - 2][j] == target) {
                cuts.push_back(j);
                i = j;
                found = true;
                break;
            }
        }
        if (!found) throw std::logic_error("SegSolver: reconstruction lost the cut");
    }
    return comb_tree(data_, loss_, sup_bound_, cuts,
                     [this](size_t a, size_t b) { return seg_value(a, b); }, m_);
}

TreeModel SegSolver::additive(double per_leaf_charge) const {
    // A[i] = cheapest (total + charge per segment, then fewest segments)
    // covering ranks [i, m)
    std::vector<double> val(m_ + 1, kInf);
    std::vector<int64_t> segs(m_ + 1, 0);
    val[m_] = 0.0;
    for (size_t i = m_; i-- > 0;) {
        for (size_t j = i + 1; j <= m_; ++j) {
            double v = seg_cost(i, j) + per_leaf_charge + val[j];
            int64_t s = 1 + segs[j];
            if (v < val[i] || (v == val[i] && s < segs[i])) {
                val[i] = v;
                segs[i] = s;
            }
        }
    }
    std::vector<size_t> cuts;
    size_t i = 0;
    while (i < m_) {
        bool found = false;
        for (size_t j = i + 1; j <= m_; ++j) {
            if (seg_cost(i, j) + per_leaf_charge + val[j] == val[i] &&
                1 + segs[j] == segs[i]) {
                if (j < m_) cuts.push_back(j);
                i = j;
                found = true;
                break;
            }
        }
        if (!found) throw std::logic_error("SegSolver: additive reconstruction lost the cut");
    }
    return comb_tree(data_, loss_, sup_bound_, cuts,
                     [this](size_t a, size_t b) { return seg_value(a, b); }, m_);
}

} // namespace ermtree::detail
