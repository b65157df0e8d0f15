#pragma once
#include "ermtree/core.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>

namespace ermtree {

struct Penalty {
    double lambda = 0.0; // charged against mean risk
    double theta = 1.0;  // leaf-count exponent
};

struct FitConfig {
    size_t max_leaves = 0; // 0 = no explicit cap (bounded by n)
    LossKind loss = LossKind::squared;
    double sup_bound = kInf;
    std::optional<Penalty> penalty;
    bool greedy_allow_zero_gain = false;
};

// Ties between candidate trees of equal total loss are broken by fewest
// leaves, then smallest split dimension, then smallest threshold rank, then
// smallest left-subtree leaf count, then recursively (left, then right).
// Totals are computed bottom-up (left + right), the same shape both the DP
// and the brute-force search use, so "equal" is exact in floating point.
// Returns <0, 0, >0.
int tree_compare(const TreeModel& a, const TreeModel& b, const Dataset& data);

// values[l-1] = minimum total empirical loss over split trees with at most l
// leaves (every leaf nonempty; splits that would empty a child are skipped
// since an equivalent tree on the data never needs them). trees[l-1] is the
// tie-break-canonical optimizer.
struct RiskFrontier {
    std::vector<double> total;
    std::vector<TreeModel> trees;

    // the frontier saturates at the distinct-value count, so it can be
    // shorter than the budget asked for; lookups cap accordingly
    size_t max_leaves() const { return total.size(); }
    double mean(size_t leaves, size_t n) const {
        leaves = std::min(leaves, total.size());
        return total[leaves - 1] / double(n);
    }
};

RiskFrontier risk_frontier(const Dataset& data, const FitConfig& cfg, size_t max_leaves);

TreeModel fit_constrained(const Dataset& data, const FitConfig& cfg);

// argmin over l of frontier_mean(l) + lambda * l^theta. The frontier is grown
// lazily and stops once lambda * l^theta alone exceeds the best objective so
// far (safe: risks are nonnegative); cfg.max_leaves additionally caps it.
TreeModel fit_penalized(const Dataset& data, const FitConfig& cfg);

// theta = 1 only: per-leaf additive charge folded into the DP, no frontier.
// Kept as an independent route for consistency checks against fit_penalized.
// cfg.max_leaves is ignored here; lambda alone controls the size.
TreeModel fit_penalized_additive(const Dataset& data, const FitConfig& cfg);

// Exhaustive reference: enumerates every split tree with <= max_leaves leaves
// (nonempty leaves), evaluates each, returns the tree_compare minimum.
// Guard rails: n <= 10, d <= 2, L <= 4.
TreeModel brute_force_fit(const Dataset& data, const FitConfig& cfg);

// Counts split trees with <= max_leaves leaves where every split threshold is
// an observed coordinate strictly inside the current cell's interval. Cells
// are geometric ([0,1]^d at the root), so splits that empty a child still
// count; identical (dim, threshold) trees count once. The count is bounded by
// (d*n)^L. Guard rails: n <= 6, d <= 2, L <= 4.
uint64_t enumerate_valid_partitions(const Dataset& data, size_t max_leaves);

// CART baseline: repeatedly applies the best immediate split (largest loss
// decrease, ties by smallest dim then threshold rank, oldest leaf first)
// until the leaf budget is reached or no split helps. Zero-decrease splits
// are taken only when cfg.greedy_allow_zero_gain is set.
TreeModel greedy_fit(const Dataset& data, const FitConfig& cfg);

} // namespace ermtree
