#include "solver_detail.hpp"

#include <algorithm>
#include <map>

namespace ermtree {

namespace {

struct NodeStats {
    double total = 0.0;
    int leaves = 0;
};

// total loss of the tree as stored (leaf values are not refitted), summed in
// point index order per leaf and bottom-up across splits, matching the
// arithmetic shape the solvers use
void fill_stats(const TreeModel& tm, const Dataset& data, int idx,
                std::vector<size_t>& members, std::vector<NodeStats>& out) {
    const TreeNode& nd = tm.nodes[size_t(idx)];
    if (nd.dim < 0) {
        double c = 0.0;
        for (size_t i : members) {
            if (tm.loss == LossKind::zero_one) {
                c += data.y(i) != nd.value ? 1.0 : 0.0;
            } else {
                double dlt = data.y(i) - nd.value;
                c += dlt * dlt;
            }
        }
        out[size_t(idx)] = {c, 1};
        return;
    }
    std::vector<size_t> ml, mr;
    for (size_t i : members)
        (data.x(i, size_t(nd.dim)) <= nd.tau ? ml : mr).push_back(i);
    fill_stats(tm, data, nd.left, ml, out);
    fill_stats(tm, data, nd.right, mr, out);
    out[size_t(idx)] = {out[size_t(nd.left)].total + out[size_t(nd.right)].total,
                        out[size_t(nd.left)].leaves + out[size_t(nd.right)].leaves};
}

int threshold_rank(const Dataset& data, int dim, double tau) {
    const auto& vals = data.distinct(size_t(dim));
    return int(std::lower_bound(vals.begin(), vals.end(), tau) - vals.begin());
}

int cmp_nodes(const TreeModel& a, int ai, const std::vector<NodeStats>& sa,
              const TreeModel& b, int bi, const std::vector<NodeStats>& sb,
              const Dataset& data) {
    const NodeStats& na = sa[size_t(ai)];
    const NodeStats& nb = sb[size_t(bi)];
    if (na.total != nb.total) return na.total < nb.total ? -1 : 1;
    if (na.leaves != nb.leaves) return na.leaves < nb.leaves ? -1 : 1;
    const TreeNode& x = a.nodes[size_t(ai)];
    const TreeNode& y = b.nodes[size_t(bi)];
    if (x.dim != y.dim) return x.dim < y.dim ? -1 : 1;
    if (x.dim < 0) return 0;
    int rx = threshold_rank(data, x.dim, x.tau);
    int ry = threshold_rank(data, y.dim, y.tau);
    if (rx != ry) return rx < ry ? -1 : 1;
    int lx = sa[size_t(x.left)].leaves, ly = sb[size_t(y.left)].leaves;
    if (lx != ly) return lx < ly ? -1 : 1;
    if (int c = cmp_nodes(a, x.left, sa, b, y.left, sb, data); c != 0) return c;
    return cmp_nodes(a, x.right, sa, b, y.right, sb, data);
}

} // namespace

int tree_compare(const TreeModel& a, const TreeModel& b, const Dataset& data) {
    std::vector<size_t> all(data.n());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::vector<NodeStats> sa(a.nodes.size()), sb(b.nodes.size());
    std::vector<size_t> ma = all, mb = all;
    fill_stats(a, data, 0, ma, sa);
    fill_stats(b, data, 0, mb, sb);
    return cmp_nodes(a, 0, sa, b, 0, sb, data);
}

namespace {

// exhaustive tree enumeration arena; independent of the DP on purpose, so
// the two routes genuinely cross-check each other
class BruteSearch {
  public:
    BruteSearch(const Dataset& data, LossKind loss, double sup_bound)
        : data_(data), loss_(loss), sup_bound_(sup_bound) {}

    TreeModel run(size_t max_leaves) {
        std::vector<size_t> all(data_.n());
        for (size_t i = 0; i < all.size(); ++i) all[i] = i;
        int best = -1;
        for (size_t l = 1; l <= max_leaves; ++l) {
            for (int cand : exact(all, l))
                if (best < 0 || cmp(cand, best) < 0) best = cand;
        }
        TreeModel tm;
        tm.loss = loss_;
        tm.sup_bound = sup_bound_;
        emit(tm, best);
        return tm;
    }

  private:
    struct BNode {
        double total = 0.0;
        double value = 0.0;
        int32_t leaves = 0;
        int32_t left = -1, right = -1;
        int16_t dim = -1, rank = -1;
    };

    // all trees with exactly l nonempty leaves over the given members
    std::vector<int> exact(const std::vector<size_t>& members, size_t l) {
        std::vector<int> out;
        if (members.size() < l) return out;
        if (l == 1) {
            LeafFit lf = fit_leaf(data_, members, loss_, sup_bound_);
            BNode nd;
            nd.total = lf.cost;
            nd.value = lf.value;
            nd.leaves = 1;
            arena_.push_back(nd);
            out.push_back(int(arena_.size()) - 1);
            return out;
        }
        std::vector<int16_t> seen;
        for (size_t j = 0; j < data_.d(); ++j) {
            seen.clear();
            for (size_t i : members) seen.push_back(int16_t(data_.rank(i, j)));
            std::sort(seen.begin(), seen.end());
            seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
            for (size_t t = 0; t + 1 < seen.size(); ++t) {
                std::vector<size_t> ml, mr;
                for (size_t i : members)
                    (data_.rank(i, j) <= seen[t] ? ml : mr).push_back(i);
                for (size_t a = 1; a < l; ++a) {
                    std::vector<int> ls = exact(ml, a);
                    if (ls.empty()) continue;
                    std::vector<int> rs = exact(mr, l - a);
                    for (int li : ls)
                        for (int ri : rs) {
                            BNode nd;
                            nd.total = arena_[size_t(li)].total + arena_[size_t(ri)].total;
                            nd.leaves = int32_t(l);
                            nd.left = li;
                            nd.right = ri;
                            nd.dim = int16_t(j);
                            nd.rank = seen[t];
                            arena_.push_back(nd);
                            out.push_back(int(arena_.size()) - 1);
                        }
                }
            }
        }
        return out;
    }

    int cmp(int x, int y) const {
        const BNode& a = arena_[size_t(x)];
        const BNode& b = arena_[size_t(y)];
        if (a.total != b.total) return a.total < b.total ? -1 : 1;
        if (a.leaves != b.leaves) return a.leaves < b.leaves ? -1 : 1;
        if (a.dim != b.dim) return a.dim < b.dim ? -1 : 1;
        if (a.dim < 0) return 0;
        if (a.rank != b.rank) return a.rank < b.rank ? -1 : 1;
        int la = arena_[size_t(a.left)].leaves, lb = arena_[size_t(b.left)].leaves;
        if (la != lb) return la < lb ? -1 : 1;
        if (int c = cmp(a.left, b.left); c != 0) return c;
        return cmp(a.right, b.right);
    }

    int emit(TreeModel& tm, int x) const {
        const BNode& nd = arena_[size_t(x)];
        int idx = int(tm.nodes.size());
        tm.nodes.emplace_back();
        if (nd.dim < 0) {
            tm.nodes[size_t(idx)].value = nd.value;
            return idx;
        }
        tm.nodes[size_t(idx)].dim = nd.dim;
        tm.nodes[size_t(idx)].tau = data_.distinct(size_t(nd.dim))[size_t(nd.rank)];
        int lc = emit(tm, nd.left);
        int rc = emit(tm, nd.right);
        tm.nodes[size_t(idx)].left = lc;
        tm.nodes[size_t(idx)].right = rc;
        return idx;
    }

    const Dataset& data_;
    LossKind loss_;
    double sup_bound_;
    std::vector<BNode> arena_;
};

} // namespace

TreeModel brute_force_fit(const Dataset& data, const FitConfig& cfg) {
    detail::validate_fit(data, cfg, false);
    if (data.n() > 10 || data.d() > 2 || cfg.max_leaves > 4)
        throw GuardRailError(
            "brute_force_fit: envelope is n <= 10, d <= 2, max_leaves <= 4");
    BruteSearch search(data, cfg.loss, cfg.sup_bound);
    return search.run(cfg.max_leaves);
}

namespace {

// geometric cell for counting: per dimension, (lo, hi) as indices into
// distinct(j) with lo == -1 meaning the domain edge 0 and hi == m meaning 1
using GeoKey = std::vector<int16_t>;

class PartitionCounter {
  public:
    PartitionCounter(const Dataset& data, size_t max_leaves)
        : data_(data), cap_(max_leaves) {}

    uint64_t run() {
        GeoKey root(2 * data_.d());
        for (size_t j = 0; j < data_.d(); ++j) {
            root[2 * j] = -1;
            root[2 * j + 1] = int16_t(data_.distinct(j).size());
        }
        const std::vector<uint64_t>& c = counts(root);
        uint64_t total = 0;
        for (uint64_t v : c) total += v;
        return total;
    }

  private:
    const std::vector<uint64_t>& counts(const GeoKey& key) {
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        std::vector<uint64_t> c(cap_, 0);
        c[0] = 1; // the cell itself as a single leaf
        for (size_t j = 0; j < data_.d(); ++j) {
            const auto& vals = data_.distinct(j);
            int lo = key[2 * j], hi = key[2 * j + 1];
            for (int k = lo + 1; k < hi; ++k) {
                // threshold must sit strictly inside the cell's interval
                if (lo < 0 && vals[size_t(k)] == 0.0) continue;
                if (hi == int(vals.size()) && vals[size_t(k)] == 1.0) continue;
                GeoKey kl = key, kr = key;
                kl[2 * j + 1] = int16_t(k);
                kr[2 * j] = int16_t(k);
                const std::vector<uint64_t> cl = counts(kl);
                const std::vector<uint64_t>& cr = counts(kr);
                for (size_t l = 2; l <= cap_; ++l)
                    for (size_t a = 1; a < l; ++a)
                        c[l - 1] += cl[a - 1] * cr[l - a - 1];
            }
        }
        auto [it, inserted] = memo_.emplace(key, std::move(c));
        return it->second;
    }

    const Dataset& data_;
    size_t cap_;
    std::map<GeoKey, std::vector<uint64_t>> memo_;
};

} // namespace

uint64_t enumerate_valid_partitions(const Dataset& data, size_t max_leaves) {
    if (data.n() == 0) throw ConfigError("enumerate: dataset is empty");
    if (max_leaves < 1) throw ConfigError("enumerate: max_leaves must be at least 1");
    if (data.n() > 6 || data.d() > 2 || max_leaves > 4)
        throw GuardRailError(
            "enumerate: counting envelope is n <= 6, d <= 2, max_leaves <= 4");
    PartitionCounter counter(data, max_leaves);
    return counter.run();
}

TreeModel greedy_fit(const Dataset& data, const FitConfig& cfg) {
    detail::validate_fit(data, cfg, false);

    struct Leaf {
        std::vector<size_t> members;
        int node = -1;
        double cost = 0.0;
        double dec = -1.0; // best single-split decrease; -1 when no split exists
        int16_t dim = -1, rank = -1;
    };

    auto scan = [&](Leaf& lf) {
        lf.dec = -1.0;
        lf.dim = -1;
        lf.rank = -1;
        std::vector<int16_t> seen;
        for (size_t j = 0; j < data.d(); ++j) {
            seen.clear();
            for (size_t i : lf.members) seen.push_back(int16_t(data.rank(i, j)));
            std::sort(seen.begin(), seen.end());
            seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
            for (size_t t = 0; t + 1 < seen.size(); ++t) {
                std::vector<size_t> ml, mr;
                for (size_t i : lf.members)
                    (data.rank(i, j) <= seen[t] ? ml : mr).push_back(i);
                double child = fit_leaf(data, ml, cfg.loss, cfg.sup_bound).cost +
                               fit_leaf(data, mr, cfg.loss, cfg.sup_bound).cost;
                double dec = lf.cost - child;
                // strict improvement only: ties stay with the smaller
                // (dim, rank) found earlier
                if (dec > lf.dec) {
                    lf.dec = dec;
                    lf.dim = int16_t(j);
                    lf.rank = seen[t];
                }
            }
        }
    };

    TreeModel tm;
    tm.loss = cfg.loss;
    tm.sup_bound = cfg.sup_bound;
    tm.nodes.emplace_back();

    Leaf root;
    root.members.resize(data.n());
    for (size_t i = 0; i < data.n(); ++i) root.members[i] = i;
    root.node = 0;
    LeafFit rf = fit_leaf(data, root.members, cfg.loss, cfg.sup_bound);
    root.cost = rf.cost;
    tm.nodes[0].value = rf.value;
    scan(root);

    std::vector<Leaf> leaves;
    leaves.push_back(std::move(root));

    while (leaves.size() < cfg.max_leaves) {
        size_t pick = 0;
        for (size_t i = 1; i < leaves.size(); ++i)
            if (leaves[i].dec > leaves[pick].dec) pick = i; // ties: oldest leaf
        Leaf& lf = leaves[pick];
        if (lf.dim < 0) break;
        if (lf.dec < 0.0 || (lf.dec == 0.0 && !cfg.greedy_allow_zero_gain)) break;

        Leaf cl, cr;
        for (size_t i : lf.members)
            (data.rank(i, size_t(lf.dim)) <= lf.rank ? cl.members : cr.members).push_back(i);

        int li = int(tm.nodes.size());
        tm.nodes.emplace_back();
        int ri = int(tm.nodes.size());
        tm.nodes.emplace_back();
        TreeNode& nd = tm.nodes[size_t(lf.node)];
        nd.dim = lf.dim;
        nd.tau = data.distinct(size_t(lf.dim))[size_t(lf.rank)];
        nd.value = 0.0;
        nd.left = li;
        nd.right = ri;

        cl.node = li;
        cr.node = ri;
        LeafFit fl = fit_leaf(data, cl.members, cfg.loss, cfg.sup_bound);
        LeafFit fr = fit_leaf(data, cr.members, cfg.loss, cfg.sup_bound);
        cl.cost = fl.cost;
        cr.cost = fr.cost;
        tm.nodes[size_t(cl.node)].value = fl.value;
        tm.nodes[size_t(cr.node)].value = fr.value;
        scan(cl);
        scan(cr);

        leaves.erase(leaves.begin() + long(pick));
        leaves.push_back(std::move(cl));
        leaves.push_back(std::move(cr));
    }
    return tm;
}

} // namespace ermtree
