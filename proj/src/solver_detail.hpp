#pragma once
#include "ermtree/parallel.hpp"
#include "ermtree/solver.hpp"

#include <cstring>
#include <unordered_map>
#include <vector>

namespace ermtree::detail {

// 1D instances above this size take the O(n^2 L) segment DP; at or below it
// the generic cell engine runs, so small 1D fits share their arithmetic with
// the brute-force reference (exact tie-for-tie agreement).
constexpr size_t kSegCutoff = 64;

// rank box key: (min rank, max rank) per dimension over the member set.
// Cells reached along different split paths but holding the same points
// collapse to one key; nothing downstream depends on how a cell was cut out.
using CellKey = std::vector<int16_t>;

struct CellKeyHash {
    size_t operator()(const CellKey& k) const {
        // fnv-1a over the raw bytes
        size_t h = 1469598103934665603ull;
        for (int16_t v : k) {
            uint16_t u;
            std::memcpy(&u, &v, 2);
            h = (h ^ (u & 0xff)) * 1099511628211ull;
            h = (h ^ (u >> 8)) * 1099511628211ull;
        }
        return h;
    }
};

// Generic engine: memoized frontier DP over rank-box cells. Exact-arithmetic
// discipline: leaf costs come from fit_leaf (direct summation in index
// order), split totals are built bottom-up as left + right, and ties are
// resolved by the same total order brute_force_fit minimizes, recursing into
// subtrees when the shallow keys all tie.
class CellSolver {
  public:
    CellSolver(const Dataset& data, LossKind loss, double sup_bound, size_t budget);

    size_t budget() const { return root_->front.size(); }
    // minimum total loss over trees with at most l leaves (l capped at budget)
    double total(size_t l) const;
    TreeModel extract(size_t l) const;

  private:
    struct State;
    struct Ent {
        double total = kInf;
        const State* lch = nullptr;
        const State* rch = nullptr;
        int32_t leaves = 0;
        int32_t lleaves = 0; // realized leaves of the left child entry
        int16_t dim = -1;    // -1 marks a leaf
        int16_t rank = -1;   // global rank of the threshold in distinct(dim)
        int16_t lb = 0, rb = 0; // child frontier budgets (1-based)
    };
    struct State {
        std::vector<Ent> front; // front[l-1] = canonical optimum at budget l
        double leaf_value = 0.0;
    };

    static const Ent& at(const State& s, size_t l);
    static int cmp(const Ent& a, const Ent& b);
    const State& solve(CellKey key, std::vector<size_t> members);
    int emit(TreeModel& out, const State& st, size_t l) const;

    const Dataset& data_;
    LossKind loss_;
    double sup_bound_;
    size_t cap_;
    std::unordered_map<CellKey, State, CellKeyHash> memo_;
    const State* root_ = nullptr;
};

// 1D fast path: suffix segment DP over collapsed ranks with prefix sums.
// layers_[l-1][i] = min total loss covering ranks [i, m) with exactly l
// segments. Costs use closed forms over prefix sums, so totals can differ
// from the generic engine's by rounding; cross-route tests use tolerances.
class SegSolver {
  public:
    SegSolver(const Dataset& data, LossKind loss, double sup_bound,
              Exec exec = Exec::openmp);

    size_t segment_cap() const { return m_; } // distinct-value count
    void ensure(size_t layers);               // grow exact-l tables up to l
    double exact_total(size_t l) const { return layers_[l - 1][0]; }
    // frontier semantics: best over l' <= l, preferring the smallest l'
    double budget_total(size_t l) const;
    size_t budget_argmin(size_t l) const;
    // canonical tree for exactly l segments: right-leaning comb over the
    // lexicographically smallest optimal boundary sequence
    TreeModel rebuild(size_t l) const;
    // theta = 1 penalized route: per-segment additive charge, no frontier
    TreeModel additive(double per_leaf_charge) const;

  private:
    double seg_cost(size_t i, size_t j) const; // ranks [i, j)
    double seg_value(size_t i, size_t j) const;

    const Dataset& data_;
    LossKind loss_;
    double sup_bound_;
    Exec exec_;
    size_t m_ = 0;
    std::vector<int64_t> pc_, po_;  // prefix point and one-label counts
    std::vector<double> ps_, pss_;  // prefix sum and sum of squares
    std::vector<std::vector<double>> layers_;
};

void validate_fit(const Dataset& data, const FitConfig& cfg, bool penalized);

} // namespace ermtree::detail
