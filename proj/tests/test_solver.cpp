#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ermtree/rng.hpp"
#include "ermtree/solver.hpp"
#include "solver_detail.hpp"

#include <cmath>

using namespace ermtree;

namespace {

// x = (0.1, 0.2, 0.8, 0.9); the regression labels are separated at 0.2
Dataset step_regression() {
    return Dataset({0.1, 0.2, 0.8, 0.9}, {0.0, 0.0, 1.0, 1.0}, 1);
}

Dataset alternating_labels() {
    return Dataset({0.1, 0.2, 0.8, 0.9}, {0.0, 1.0, 0.0, 1.0}, 1);
}

Dataset xor_square() {
    return Dataset({0.2, 0.2, 0.2, 0.8, 0.8, 0.2, 0.8, 0.8},
                   {0.0, 1.0, 1.0, 0.0}, 2);
}

FitConfig squared_cfg(size_t leaves, double bound = 1.0) {
    FitConfig cfg;
    cfg.max_leaves = leaves;
    cfg.loss = LossKind::squared;
    cfg.sup_bound = bound;
    return cfg;
}

FitConfig zero_one_cfg(size_t leaves) {
    FitConfig cfg;
    cfg.max_leaves = leaves;
    cfg.loss = LossKind::zero_one;
    return cfg;
}

// instances on a coarse grid so exact risk ties are common; that is what
// stresses the tie-break order
Dataset random_instance(Rng& rng, size_t n, size_t d, LossKind loss) {
    std::vector<double> xs(n * d), y(n);
    for (auto& v : xs) v = double(1 + rng.below(9)) / 10.0;
    for (auto& v : y)
        v = loss == LossKind::zero_one ? double(rng.bernoulli(0.5))
                                       : double(int(rng.below(17))) * 0.25 - 2.0;
    return Dataset(std::move(xs), std::move(y), d);
}

double penalized_objective(const TreeModel& m, const Dataset& data,
                           const Penalty& pen) {
    return empirical_risk(m, data).mean +
           pen.lambda * std::pow(double(m.n_leaves()), pen.theta);
}

} // namespace

TEST_CASE("two leaves recover the step exactly") {
    Dataset data = step_regression();
    TreeModel m = fit_constrained(data, squared_cfg(2));
    REQUIRE(m.nodes.size() == 3);
    CHECK(m.nodes[0].dim == 0);
    CHECK(m.nodes[0].tau == 0.2);
    CHECK(m.nodes[m.nodes[0].left].value == 0.0);
    CHECK(m.nodes[m.nodes[0].right].value == 1.0);
    RiskValue r = empirical_risk(m, data);
    CHECK(r.total == 0.0);
    CHECK(r.mean == 0.0);
}

TEST_CASE("single leaf is the clipped global mean") {
    Dataset data = step_regression();
    TreeModel m = fit_constrained(data, squared_cfg(1));
    REQUIRE(m.n_leaves() == 1);
    CHECK(m.nodes[0].value == 0.5);
    CHECK(empirical_risk(m, data).mean == 0.25);
}

TEST_CASE("frontier means for the step are (0.25, 0, 0, 0)") {
    Dataset data = step_regression();
    RiskFrontier fr = risk_frontier(data, squared_cfg(4), 4);
    REQUIRE(fr.max_leaves() == 4);
    CHECK(fr.mean(1, 4) == 0.25);
    CHECK(fr.mean(2, 4) == 0.0);
    CHECK(fr.mean(3, 4) == 0.0);
    CHECK(fr.mean(4, 4) == 0.0);
    // totals never increase with budget, realized sizes never exceed it
    for (size_t l = 1; l <= 4; ++l) {
        if (l > 1) CHECK(fr.total[l - 1] <= fr.total[l - 2]);
        CHECK(fr.trees[l - 1].n_leaves() <= l);
    }
    // once the risk hits zero the tree stops growing
    CHECK(fr.trees[2].n_leaves() == 2);
    CHECK(fr.trees[3] == fr.trees[2]);
}

TEST_CASE("zero-one tie between thresholds 0.1 and 0.8 resolves to 0.1") {
    Dataset data = alternating_labels();
    TreeModel m = fit_constrained(data, zero_one_cfg(2));
    REQUIRE(m.nodes.size() == 3);
    CHECK(m.nodes[0].tau == 0.1);
    CHECK(m.nodes[m.nodes[0].left].value == 0.0);
    CHECK(m.nodes[m.nodes[0].right].value == 1.0);
    CHECK(empirical_risk(m, data).mean == 0.25);
}

TEST_CASE("penalized fit on the step") {
    Dataset data = step_regression();
    FitConfig cfg = squared_cfg(0);
    cfg.penalty = Penalty{0.05, 1.0};
    TreeModel m = fit_penalized(data, cfg);
    CHECK(m.n_leaves() == 2);
    CHECK(m.nodes[0].tau == 0.2);
    CHECK(penalized_objective(m, data, *cfg.penalty) == doctest::Approx(0.10));

    cfg.penalty = Penalty{10.0, 1.0};
    TreeModel root = fit_penalized(data, cfg);
    CHECK(root.n_leaves() == 1);

    // free splits: lambda 0 keeps the smallest perfect tree
    cfg.penalty = Penalty{0.0, 1.0};
    TreeModel free = fit_penalized(data, cfg);
    CHECK(empirical_risk(free, data).total == 0.0);
    CHECK(free.n_leaves() == 2);
}

TEST_CASE("geometric partition counts on two 1d points") {
    Dataset data({0.3, 0.7}, {0.0, 1.0}, 1);
    CHECK(enumerate_valid_partitions(data, 1) == 1);
    CHECK(enumerate_valid_partitions(data, 2) == 3);
    CHECK(enumerate_valid_partitions(data, 3) == 5);
    CHECK(enumerate_valid_partitions(data, 4) == 5); // no fourth piece exists
}

TEST_CASE("geometric partition counts on two 2d points") {
    Dataset data({0.3, 0.4, 0.7, 0.6}, {0.0, 1.0}, 2);
    // root plus one split per (dimension, observed value) pair
    CHECK(enumerate_valid_partitions(data, 2) == 5);
}

TEST_CASE("tree counts respect the (dn)^L bound") {
    Rng rng(404, 0);
    for (size_t d : {1ul, 2ul}) {
        for (size_t n : {2ul, 3ul, 4ul, 5ul}) {
            for (size_t L : {1ul, 2ul, 3ul}) {
                Dataset data = random_instance(rng, n, d, LossKind::squared);
                uint64_t count = enumerate_valid_partitions(data, L);
                CHECK(count >= 1);
                CHECK(double(count) <= std::pow(double(d * n), double(L)));
            }
        }
    }
}

TEST_CASE("xor needs four leaves; greedy stalls without zero-gain splits") {
    Dataset data = xor_square();
    TreeModel exact = fit_constrained(data, zero_one_cfg(4));
    CHECK(exact.n_leaves() == 4);
    CHECK(empirical_risk(exact, data).total == 0.0);

    TreeModel stuck = greedy_fit(data, zero_one_cfg(4));
    CHECK(stuck.n_leaves() == 1);
    CHECK(stuck.nodes[0].value == 1.0); // majority tie goes to label 1
    CHECK(empirical_risk(stuck, data).mean == 0.5);

    FitConfig cfg = zero_one_cfg(8);
    cfg.greedy_allow_zero_gain = true;
    TreeModel pushed = greedy_fit(data, cfg);
    CHECK(pushed.n_leaves() == 4); // singleton leaves end the loop on their own
    CHECK(empirical_risk(pushed, data).total == 0.0);
}

TEST_CASE("greedy equals exact when the first split already separates") {
    Dataset data = step_regression();
    TreeModel g = greedy_fit(data, squared_cfg(2));
    TreeModel e = fit_constrained(data, squared_cfg(2));
    CHECK(g == e);
}

TEST_CASE("brute force on two points splits them") {
    Dataset data({0.3, 0.7}, {0.0, 1.0}, 1);
    TreeModel m = brute_force_fit(data, squared_cfg(2));
    REQUIRE(m.n_leaves() == 2);
    CHECK(m.nodes[0].tau == 0.3);
    CHECK(empirical_risk(m, data).total == 0.0);
}

TEST_CASE("dp matches brute force tree for tree on 200 random instances") {
    Rng rng(2024, 0);
    const double bounds[] = {0.5, 1.0, kInf};
    for (int it = 0; it < 200; ++it) {
        CAPTURE(it);
        size_t n = 2 + rng.below(7);
        size_t d = 1 + rng.below(2);
        LossKind loss = it % 2 ? LossKind::zero_one : LossKind::squared;
        FitConfig cfg;
        cfg.loss = loss;
        cfg.sup_bound = loss == LossKind::squared ? bounds[rng.below(3)] : kInf;
        cfg.max_leaves = 1 + rng.below(4);
        Dataset data = random_instance(rng, n, d, loss);
        TreeModel dp = fit_constrained(data, cfg);
        TreeModel bf = brute_force_fit(data, cfg);
        REQUIRE(dp == bf);
        CHECK(empirical_risk(dp, data).total == empirical_risk(bf, data).total);
    }
}

TEST_CASE("penalized objective matches a brute force frontier scan") {
    Rng rng(2025, 0);
    const double lambdas[] = {0.0, 0.01, 0.05, 0.25, 1.0};
    const double thetas[] = {0.5, 2.0 / 3.0, 1.0};
    for (int it = 0; it < 60; ++it) {
        CAPTURE(it);
        size_t n = 2 + rng.below(7);
        size_t d = 1 + rng.below(2);
        LossKind loss = it % 2 ? LossKind::zero_one : LossKind::squared;
        Dataset data = random_instance(rng, n, d, loss);
        Penalty pen{lambdas[rng.below(5)], thetas[rng.below(3)]};

        FitConfig cfg;
        cfg.loss = loss;
        cfg.max_leaves = 4;
        cfg.penalty = pen;
        TreeModel m = fit_penalized(data, cfg);
        double got = penalized_objective(m, data, pen);

        double want = kInf;
        for (size_t k = 1; k <= 4; ++k) {
            FitConfig ck;
            ck.loss = loss;
            ck.max_leaves = k;
            TreeModel bk = brute_force_fit(data, ck);
            double obj = empirical_risk(bk, data).total / double(data.n()) +
                         pen.lambda * std::pow(double(k), pen.theta);
            want = std::min(want, obj);
        }
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("theta=1 additive route agrees with the frontier route") {
    Rng rng(2026, 0);
    const double lambdas[] = {0.0, 0.002, 0.01, 0.05, 0.2, 1.0};
    for (int it = 0; it < 100; ++it) {
        CAPTURE(it);
        // mix sizes across the 1d segment cutoff and include 2d instances
        size_t n = it % 3 == 0 ? 80 + rng.below(40) : 3 + rng.below(30);
        size_t d = it % 3 == 0 ? 1 : 1 + rng.below(2);
        LossKind loss = it % 2 ? LossKind::zero_one : LossKind::squared;
        Dataset data = random_instance(rng, n, d, loss);
        Penalty pen{lambdas[rng.below(6)], 1.0};

        FitConfig cfg;
        cfg.loss = loss;
        cfg.sup_bound = loss == LossKind::squared ? 2.0 : kInf;
        cfg.penalty = pen;
        TreeModel fr = fit_penalized(data, cfg);
        TreeModel ad = fit_penalized_additive(data, cfg);
        double a = penalized_objective(fr, data, pen);
        double b = penalized_objective(ad, data, pen);
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("interpolation: distinct points and enough leaves give zero risk") {
    Rng rng(2027, 0);
    std::vector<double> xs(12), y(12);
    for (size_t i = 0; i < xs.size(); ++i) xs[i] = (double(i) + 0.5) / 12.0;
    for (auto& v : y) v = rng.uniform(-1.0, 1.0);
    Dataset data(std::move(xs), std::move(y), 1);
    TreeModel m = fit_constrained(data, squared_cfg(12, kInf));
    CHECK(empirical_risk(m, data).total == 0.0);
}

TEST_CASE("frontier saturates when no split exists") {
    Dataset data({0.5, 0.5, 0.5}, {0.0, 1.0, 1.0}, 1);
    RiskFrontier fr = risk_frontier(data, zero_one_cfg(3), 3);
    CHECK(fr.max_leaves() == 1); // a single distinct value admits no split
    CHECK(fr.mean(3, 3) == fr.mean(1, 3));
    TreeModel m = fit_constrained(data, zero_one_cfg(3));
    CHECK(m.n_leaves() == 1);
}

TEST_CASE("segment and generic engines agree on 1d instances") {
    Rng rng(2028, 0);
    for (int it = 0; it < 12; ++it) {
        CAPTURE(it);
        LossKind loss = it % 2 ? LossKind::zero_one : LossKind::squared;
        Dataset data = random_instance(rng, 80, 1, loss);
        double bound = loss == LossKind::squared ? 1.5 : kInf;
        size_t budget = 6;

        detail::CellSolver cell(data, loss, bound, budget);
        detail::SegSolver seg(data, loss, bound);
        seg.ensure(std::min(budget, seg.segment_cap()));
        for (size_t l = 1; l <= std::min(budget, cell.budget()); ++l) {
            double a = cell.total(l);
            double b = seg.budget_total(std::min(l, seg.segment_cap()));
            CHECK(a == doctest::Approx(b).epsilon(1e-9));
            // the rebuilt tree attains the same risk either way
            TreeModel tc = cell.extract(l);
            TreeModel ts = seg.rebuild(seg.budget_argmin(std::min(l, seg.segment_cap())));
            CHECK(empirical_risk(tc, data).total ==
                  doctest::Approx(empirical_risk(ts, data).total).epsilon(1e-9));
        }
    }
}

TEST_CASE("segment layers are bit identical across execution policies") {
    Rng rng(2029, 0);
    Dataset data = random_instance(rng, 300, 1, LossKind::squared);
    detail::SegSolver a(data, LossKind::squared, 1.0, Exec::serial);
    detail::SegSolver b(data, LossKind::squared, 1.0, Exec::openmp);
    a.ensure(10);
    b.ensure(10);
    for (size_t l = 1; l <= 10; ++l) {
        CHECK(a.exact_total(l) == b.exact_total(l));
        CHECK(a.rebuild(l) == b.rebuild(l));
    }
}

TEST_CASE("fits are deterministic across repeated calls") {
    Rng rng(2030, 0);
    Dataset data = random_instance(rng, 120, 2, LossKind::squared);
    FitConfig cfg = squared_cfg(5, 2.0);
    std::string once = tree_to_json(fit_constrained(data, cfg));
    std::string twice = tree_to_json(fit_constrained(data, cfg));
    CHECK(once == twice);
}

TEST_CASE("tree_compare orders by risk then size then shape") {
    Dataset data = step_regression();
    TreeModel split = fit_constrained(data, squared_cfg(2));
    TreeModel root = fit_constrained(data, squared_cfg(1));
    CHECK(tree_compare(split, split, data) == 0);
    CHECK(tree_compare(split, root, data) < 0); // lower risk wins
    CHECK(tree_compare(root, split, data) > 0);
}

TEST_CASE("config validation rejects bad requests") {
    Dataset data = step_regression();
    Dataset empty;

    CHECK_THROWS_AS(fit_constrained(empty, squared_cfg(2)), ConfigError);
    CHECK_THROWS_AS(fit_constrained(data, squared_cfg(0)), ConfigError);
    CHECK_THROWS_AS(risk_frontier(data, squared_cfg(0), 0), ConfigError);
    CHECK_THROWS_AS(fit_constrained(data, squared_cfg(2, -1.0)), ConfigError);
    Dataset real_valued({0.1, 0.2}, {0.5, 1.0}, 1);
    CHECK_THROWS_AS(fit_constrained(real_valued, zero_one_cfg(2)), ConfigError);

    FitConfig pen = squared_cfg(0);
    CHECK_THROWS_AS(fit_penalized(data, pen), ConfigError); // penalty missing
    pen.penalty = Penalty{-0.1, 1.0};
    CHECK_THROWS_AS(fit_penalized(data, pen), ConfigError);
    pen.penalty = Penalty{0.1, 0.0};
    CHECK_THROWS_AS(fit_penalized(data, pen), ConfigError);
    pen.penalty = Penalty{0.1, 0.5};
    CHECK_THROWS_AS(fit_penalized_additive(data, pen), ConfigError);
}

TEST_CASE("guard rails stop exhaustive routines outside their envelope") {
    Rng rng(2031, 0);
    Dataset big = random_instance(rng, 11, 1, LossKind::squared);
    CHECK_THROWS_AS(brute_force_fit(big, squared_cfg(2)), GuardRailError);
    Dataset ok = random_instance(rng, 6, 1, LossKind::squared);
    CHECK_THROWS_AS(brute_force_fit(ok, squared_cfg(5)), GuardRailError);
    Dataset seven = random_instance(rng, 7, 1, LossKind::squared);
    CHECK_THROWS_AS(enumerate_valid_partitions(seven, 2), GuardRailError);
    CHECK_THROWS_AS(enumerate_valid_partitions(ok, 5), GuardRailError);
}
