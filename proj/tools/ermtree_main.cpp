// Command-line front end: fit trees on CSV data, sample synthetic worlds,
// run rate sweeps and the consistency batteries, count valid partitions.
//
// Exit codes, never mixed:
//   0  success
//   1  a scientific check ran fine but missed its tolerance
//   2  bad input: flags, config files, malformed data
//   3  guard rails (exhaustive routines asked to run beyond their envelope)
//      and resource failures

#include "ermtree/io_util.hpp"
#include "ermtree/parallel.hpp"
#include "ermtree/ratelab.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ermtree;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

// ---- json access with path-qualified errors --------------------------------

// every object is matched against its full key list so typos fail loudly
// instead of silently falling back to defaults
void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
    if (!obj.is_object()) fail(where + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) fail(where + ": unknown key \"" + it.key() + "\"");
    }
}

const json* opt(const json& obj, const char* key) {
    if (!obj.is_object()) return nullptr;
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

const json& require_key(const json& obj, const char* key, const std::string& where) {
    const json* v = opt(obj, key);
    if (!v) fail(where + ": missing \"" + std::string(key) + "\"");
    return *v;
}

std::string str_of(const json& v, const char* key, const std::string& where) {
    if (!v.is_string()) fail(where + ": \"" + std::string(key) + "\" must be a string");
    return v.get<std::string>();
}

double num_of(const json& v, const char* key, const std::string& where) {
    if (!v.is_number()) fail(where + ": \"" + std::string(key) + "\" must be a number");
    return v.get<double>();
}

size_t usize_of(const json& v, const char* key, const std::string& where) {
    if (!v.is_number_unsigned())
        fail(where + ": \"" + std::string(key) + "\" must be a nonnegative integer");
    return v.get<size_t>();
}

std::string require_str(const json& obj, const char* key, const std::string& where) {
    return str_of(require_key(obj, key, where), key, where);
}

double require_num(const json& obj, const char* key, const std::string& where) {
    return num_of(require_key(obj, key, where), key, where);
}

size_t require_usize(const json& obj, const char* key, const std::string& where) {
    return usize_of(require_key(obj, key, where), key, where);
}

double field_num(const json& obj, const char* key, double def, const std::string& where) {
    const json* v = opt(obj, key);
    return v ? num_of(*v, key, where) : def;
}

size_t field_usize(const json& obj, const char* key, size_t def, const std::string& where) {
    const json* v = opt(obj, key);
    return v ? usize_of(*v, key, where) : def;
}

std::vector<double> num_vec_of(const json& v, const char* key, const std::string& where) {
    if (!v.is_array() || v.empty())
        fail(where + ": \"" + std::string(key) + "\" must be a nonempty array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const json& e : v) out.push_back(num_of(e, key, where));
    return out;
}

std::vector<size_t> usize_vec_of(const json& v, const char* key, const std::string& where) {
    if (!v.is_array() || v.empty())
        fail(where + ": \"" + std::string(key) + "\" must be a nonempty array");
    std::vector<size_t> out;
    out.reserve(v.size());
    for (const json& e : v) out.push_back(usize_of(e, key, where));
    return out;
}

std::vector<size_t> field_usize_vec(const json& obj, const char* key,
                                    std::vector<size_t> def, const std::string& where) {
    const json* v = opt(obj, key);
    return v ? usize_vec_of(*v, key, where) : std::move(def);
}

uint64_t require_seed(const json& cfg) {
    const json& v = require_key(cfg, "seed", "config");
    if (!v.is_number_unsigned()) fail("config: \"seed\" must be a nonnegative integer");
    return v.get<uint64_t>();
}

std::string resolve_out_dir(const std::string& flag, const json& cfg) {
    if (!flag.empty()) return flag;
    if (const json* o = opt(cfg, "output")) {
        check_keys(*o, {"dir"}, "output");
        return require_str(*o, "dir", "output");
    }
    fail("config: set output.dir or pass --out-dir");
}

// ---- world / noise / schedule sections --------------------------------------

NoiseModel noise_from(const json* nj, const std::string& where) {
    if (!nj) return NoiseModel::none();
    std::string kind = require_str(*nj, "kind", where);
    if (kind == "none") {
        check_keys(*nj, {"kind"}, where);
        return NoiseModel::none();
    }
    if (kind == "gaussian") {
        check_keys(*nj, {"kind", "K"}, where);
        double K = field_num(*nj, "K", 1.0, where);
        if (!(K >= 0.0)) fail(where + ": gaussian K must be nonnegative");
        return NoiseModel::gaussian(K);
    }
    if (kind == "orlicz") {
        check_keys(*nj, {"kind", "scale", "beta"}, where);
        double scale = field_num(*nj, "scale", 1.0, where);
        double beta = require_num(*nj, "beta", where);
        if (!(scale > 0.0)) fail(where + ": orlicz scale must be positive");
        if (!(beta >= 1.0)) fail(where + ": orlicz beta must be at least 1");
        return NoiseModel::orlicz(scale, beta);
    }
    if (kind == "student_t") {
        check_keys(*nj, {"kind", "dof", "scale"}, where);
        double dof = require_num(*nj, "dof", where);
        double scale = field_num(*nj, "scale", 1.0, where);
        if (!(dof > 2.0)) fail(where + ": student_t needs dof > 2 (finite variance)");
        if (!(scale > 0.0)) fail(where + ": student_t scale must be positive");
        return NoiseModel::student_t(dof, scale);
    }
    fail(where + ": unknown noise kind \"" + kind + "\"");
}

json noise_json(const NoiseModel& n) {
    switch (n.kind) {
        case NoiseModel::Kind::none: return {{"kind", "none"}};
        case NoiseModel::Kind::gaussian: return {{"kind", "gaussian"}, {"K", n.scale}};
        case NoiseModel::Kind::orlicz:
            return {{"kind", "orlicz"}, {"scale", n.scale}, {"beta", n.beta}};
        case NoiseModel::Kind::student_t:
            return {{"kind", "student_t"}, {"dof", n.dof}, {"scale", n.scale}};
    }
    return {{"kind", "none"}};
}

std::pair<double, double> range_of(const json& v, const char* key, const std::string& where) {
    if (v.is_number()) {
        double x = v.get<double>();
        return {x, x};
    }
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        fail(where + ": \"" + std::string(key) + "\" must be a number or [lo, hi]");
    return {v[0].get<double>(), v[1].get<double>()};
}

Marginal marginal_from(const json* m, size_t d, const std::string& where) {
    if (!m) return Marginal::uniform(d);
    std::string kind = require_str(*m, "kind", where);
    if (kind == "uniform") {
        check_keys(*m, {"kind"}, where);
        return Marginal::uniform(d);
    }
    if (kind != "piecewise") fail(where + ": unknown marginal kind \"" + kind + "\"");
    check_keys(*m, {"kind", "boxes"}, where);
    const json& boxes = require_key(*m, "boxes", where);
    if (!boxes.is_array() || boxes.empty())
        fail(where + ": \"boxes\" must be a nonempty array");
    std::vector<WeightedBox> parts;
    for (const json& bj : boxes) {
        check_keys(bj, {"lo", "hi", "weight"}, where + ".boxes");
        WeightedBox wb;
        wb.box.lo = num_vec_of(require_key(bj, "lo", where), "lo", where);
        wb.box.hi = num_vec_of(require_key(bj, "hi", where), "hi", where);
        if (wb.box.lo.size() != wb.box.hi.size())
            fail(where + ": box lo/hi length mismatch");
        wb.weight = field_num(bj, "weight", 1.0, where);
        parts.push_back(std::move(wb));
    }
    Marginal out = Marginal::piecewise(std::move(parts));
    if (out.dim != d) fail(where + ": marginal boxes have dimension " +
                           std::to_string(out.dim) + ", the world has " + std::to_string(d));
    return out;
}

PshabConfig pshab_config_from(const json& w, const std::string& where) {
    PshabConfig c;
    c.d = field_usize(w, "d", c.d, where);
    c.B = field_usize(w, "B", c.B, where);
    c.s = field_usize(w, "s", c.s, where);
    if (const json* v = opt(w, "alpha_range")) c.alpha_range = range_of(*v, "alpha_range", where);
    if (const json* v = opt(w, "lambda_range")) c.lambda_range = range_of(*v, "lambda_range", where);
    c.bumps_per_piece = field_usize(w, "bumps_per_piece", c.bumps_per_piece, where);
    if (const json* v = opt(w, "target_abar")) c.target_abar = num_of(*v, "target_abar", where);
    if (const json* v = opt(w, "base_scale")) c.base_scale = num_of(*v, "base_scale", where);
    return c;
}

HypercubeConfig hc_config_from(const json& w, const std::string& where,
                               bool allow_r_power, bool* has_r_power, double* r_power) {
    if (allow_r_power)
        check_keys(w, {"kind", "d", "B", "s", "rho", "r", "r_power", "lambda_inf",
                       "abar", "c_phi", "w_fraction", "margin_cap"}, where);
    else
        check_keys(w, {"kind", "d", "B", "s", "rho", "r", "lambda_inf", "abar",
                       "c_phi", "w_fraction", "margin_cap"}, where);
    HypercubeConfig c;
    c.d = field_usize(w, "d", c.d, where);
    c.B = field_usize(w, "B", c.B, where);
    c.s = field_usize(w, "s", c.s, where);
    c.rho = field_num(w, "rho", c.rho, where);
    c.r = field_usize(w, "r", c.r, where);
    c.lambda_inf = field_num(w, "lambda_inf", c.lambda_inf, where);
    c.abar = field_num(w, "abar", c.abar, where);
    c.c_phi = field_num(w, "c_phi", c.c_phi, where);
    c.w_fraction = field_num(w, "w_fraction", c.w_fraction, where);
    c.margin_cap = field_num(w, "margin_cap", c.margin_cap, where);
    if (allow_r_power) {
        if (const json* v = opt(w, "r_power")) {
            if (opt(w, "r")) fail(where + ": give \"r\" or \"r_power\", not both");
            *has_r_power = true;
            *r_power = num_of(*v, "r_power", where);
            if (!(*r_power > 0.0 && *r_power < 1.0))
                fail(where + ": r_power must be in (0, 1)");
        }
    }
    return c;
}

fs::path world_path(const json& w, const fs::path& base, const std::string& where) {
    fs::path p = fs::path(require_str(w, "path", where));
    return p.is_relative() ? base / p : p;
}

// "file" worlds defer their kind to the referenced spec's discriminator
std::string world_kind(const json& w, const fs::path& base, const std::string& where) {
    std::string kind = require_str(w, "kind", where);
    if (kind != "file") return kind;
    json j = json::parse(read_file(world_path(w, base, where).string()));
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string())
        fail(where + ": referenced spec has no \"kind\" discriminator");
    return j.at("kind").get<std::string>();
}

std::pair<PshabSpec, Marginal> pshab_world(const json& w, uint64_t seed,
                                           const fs::path& base, const std::string& where) {
    std::string kind = require_str(w, "kind", where);
    PshabSpec spec;
    if (kind == "pshab") {
        check_keys(w, {"kind", "d", "B", "s", "alpha_range", "lambda_range",
                       "bumps_per_piece", "target_abar", "base_scale", "marginal"}, where);
        spec = make_pshab(pshab_config_from(w, where), seed);
    } else if (kind == "file") {
        check_keys(w, {"kind", "path", "marginal"}, where);
        std::string text = read_file(world_path(w, base, where).string());
        if (json::parse(text).value("kind", "") != "pshab")
            fail(where + ": referenced spec is not a bump-target world");
        spec = pshab_from_json(text);
    } else {
        fail(where + ": expected a bump-target world, got kind \"" + kind + "\"");
    }
    Marginal m = marginal_from(opt(w, "marginal"), spec.cfg.d, where + ".marginal");
    return {std::move(spec), std::move(m)};
}

HypercubeSpec hc_world(const json& w, uint64_t seed, const fs::path& base,
                       const std::string& where) {
    std::string kind = require_str(w, "kind", where);
    if (kind == "hypercube")
        return make_hypercube(hc_config_from(w, where, false, nullptr, nullptr), seed);
    if (kind == "file") {
        check_keys(w, {"kind", "path"}, where);
        std::string text = read_file(world_path(w, base, where).string());
        if (json::parse(text).value("kind", "") != "hypercube")
            fail(where + ": referenced spec is not a margin-step world");
        return hypercube_from_json(text);
    }
    fail(where + ": expected a margin-step world, got kind \"" + kind + "\"");
}

// clipping level matched to the world's amplitude; identically-zero truths
// get the unit fallback (any positive level fits them)
double default_clip(const PshabSpec& spec) {
    double M = pshab_sup_bound(spec);
    return M > 0.0 ? M : 1.0;
}

Schedule schedule_from(const json* solver, Schedule base,
                       std::initializer_list<const char*> allowed,
                       const std::string& where) {
    if (solver) {
        check_keys(*solver, allowed, where);
        if (const json* v = opt(*solver, "c_grid"))
            base.c_grid = num_vec_of(*v, "c_grid", where);
        base.u = field_num(*solver, "u", base.u, where);
        base.validation_fraction =
            field_num(*solver, "validation_fraction", base.validation_fraction, where);
        base.leaf_cap = field_usize(*solver, "leaf_cap", base.leaf_cap, where);
        base.theta = field_num(*solver, "theta", base.theta, where);
        base.K = field_num(*solver, "K", base.K, where);
        base.M = field_num(*solver, "M", base.M, where);
    }
    base.validate();
    return base;
}

SweepConfig sweep_config_common(const json& sw, uint64_t seed, Schedule sch,
                                const std::string& where) {
    SweepConfig sc;
    sc.n_grid = usize_vec_of(require_key(sw, "n_grid", where), "n_grid", where);
    sc.reps = field_usize(sw, "reps", sc.reps, where);
    sc.n_test = field_usize(sw, "n_test", sc.n_test, where);
    sc.target = require_num(sw, "target", where); // theory exponent, no default
    sc.tolerance = field_num(sw, "tolerance", sc.tolerance, where);
    sc.schedule = std::move(sch);
    sc.seed = seed;
    return sc;
}

// ---- subcommand option bags --------------------------------------------------

struct FitOpts {
    std::string data, loss = "reg", out;
    size_t leaves = 0;
    double lambda = 0.0, theta = 1.0, sup_bound = kInf;
    int workers = 0;
    bool has_leaves = false, has_lambda = false, has_sup = false;
};

struct GenOpts {
    std::string config, out_dir;
    int workers = 0;
};

struct SweepOpts {
    std::string config, out_dir;
    int workers = 0;
};

struct EnumOpts {
    std::string data;
    size_t leaves = 0;
    int workers = 0;
};

// ---- fit ----------------------------------------------------------------------

int cmd_fit(const FitOpts& o) {
    set_worker_count(resolve_workers(o.workers));
    Dataset data = read_csv_dataset(o.data);
    FitConfig fc;
    fc.loss = o.loss == "cls" ? LossKind::zero_one : LossKind::squared;
    if (fc.loss == LossKind::zero_one && !data.labels_binary())
        fail("fit: zero-one loss needs labels in {0, 1}");
    if (o.has_sup) {
        if (fc.loss == LossKind::zero_one)
            fail("fit: --sup-bound applies to squared loss only");
        fc.sup_bound = o.sup_bound;
    }
    TreeModel model;
    if (o.has_leaves) {
        if (o.leaves == 0) fail("fit: --leaves must be at least 1");
        fc.max_leaves = o.leaves;
        model = fit_constrained(data, fc);
    } else if (o.has_lambda) {
        if (!(o.lambda >= 0.0)) fail("fit: --lambda must be nonnegative");
        if (!(o.theta > 0.0)) fail("fit: --theta must be positive");
        fc.penalty = Penalty{o.lambda, o.theta};
        model = fit_penalized(data, fc);
    } else {
        fail("fit: pass --leaves or --lambda");
    }
    RiskValue risk = empirical_risk(model, data);
    atomic_write_file(o.out, tree_to_json(model, &risk));
    std::cout << json{{"empirical_risk", risk.mean}, {"leaves", model.n_leaves()}}.dump()
              << "\n";
    return 0;
}

// ---- gen ------------------------------------------------------------------------

int cmd_gen(const GenOpts& o) {
    set_worker_count(resolve_workers(o.workers));
    json cfg = json::parse(read_file(o.config));
    if (!cfg.is_object()) fail("config: top level must be an object");
    check_keys(cfg, {"seed", "n", "world", "noise", "output"}, "config");
    uint64_t seed = require_seed(cfg);
    size_t n = require_usize(cfg, "n", "config");
    if (n == 0) fail("config: n must be positive");
    const json& w = require_key(cfg, "world", "config");
    fs::path base = fs::absolute(fs::path(o.config)).parent_path();
    std::string dir = resolve_out_dir(o.out_dir, cfg);

    // build everything before touching the output directory
    Dataset data;
    std::string spec_text;
    json manifest;
    std::string kind = world_kind(w, base, "world");
    if (kind == "pshab") {
        auto [spec, marg] = pshab_world(w, seed, base, "world");
        NoiseModel noise = noise_from(opt(cfg, "noise"), "noise");
        data = sample_regression(spec, noise, n, seed, marg);
        spec_text = pshab_to_json(spec);
        json abar = json::array();
        for (const auto& piece : spec.pieces) abar.push_back(piece.abar);
        manifest = {
            {"kind", "pshab"},
            {"d", spec.cfg.d},
            {"B", spec.cfg.B},
            {"s", spec.cfg.s},
            {"n", n},
            {"seed", seed},
            {"sup_bound", pshab_sup_bound(spec)},
            {"abar", std::move(abar)},
            {"noise", noise_json(noise)},
            {"files", {{"data", "data.csv"}, {"spec", "spec.json"}}},
        };
        cfg["noise"] = noise_json(noise); // effective echo
    } else if (kind == "hypercube") {
        if (opt(cfg, "noise"))
            fail("config: label noise is built into classification worlds; drop \"noise\"");
        HypercubeSpec spec = hc_world(w, seed, base, "world");
        data = sample_hypercube(spec, n, seed);
        spec_text = hypercube_to_json(spec);
        EtaOracle eta = hypercube_eta(spec);
        json step = nullptr;
        if (eta.step)
            step = {{"mass", eta.step->mass},
                    {"at", eta.step->at},
                    {"zero_mass", eta.step->zero_mass}};
        manifest = {
            {"kind", "hypercube"},
            {"d", spec.cfg.d},
            {"B", spec.cfg.B},
            {"s", spec.cfg.s},
            {"rho", spec.cfg.rho},
            {"n", n},
            {"seed", seed},
            {"b", spec.b_small},
            {"b_prime", spec.b_small},
            {"m", spec.m},
            {"w", spec.w},
            {"ell", spec.ell},
            {"eta_step", std::move(step)},
            {"files", {{"data", "data.csv"}, {"spec", "spec.json"}}},
        };
    } else {
        fail("world: unknown kind \"" + kind + "\"");
    }

    cfg["output"] = json{{"dir", dir}};
    fs::create_directories(dir);
    write_csv_dataset(data, (fs::path(dir) / "data.csv").string());
    atomic_write_file((fs::path(dir) / "spec.json").string(), spec_text);
    atomic_write_file((fs::path(dir) / "truth.json").string(), manifest.dump(2) + "\n");
    atomic_write_file((fs::path(dir) / "config.json").string(), cfg.dump(2) + "\n");
    return 0;
}

// ---- sweep ------------------------------------------------------------------------

struct SweepResult {
    json summary;
    std::string csv;
    bool pass = true;
};

struct Ctx {
    json cfg;
    fs::path base; // config file's directory, anchors relative world paths
    uint64_t seed = 0;
};

SweepResult sweep_rate_reg(const Ctx& ctx) {
    check_keys(ctx.cfg, {"seed", "world", "noise", "solver", "sweep", "output"}, "config");
    auto [spec, marg] = pshab_world(require_key(ctx.cfg, "world", "config"),
                                    ctx.seed, ctx.base, "world");
    NoiseModel noise = noise_from(opt(ctx.cfg, "noise"), "noise");
    Schedule sch = schedule_from(
        opt(ctx.cfg, "solver"), Schedule::regression(default_clip(spec), noise.sd()),
        {"c_grid", "u", "validation_fraction", "leaf_cap", "theta", "K", "M"}, "solver");
    const json& sw = ctx.cfg.at("sweep");
    check_keys(sw, {"kind", "n_grid", "reps", "n_test", "target", "tolerance"}, "sweep");
    SweepConfig sc = sweep_config_common(sw, ctx.seed, std::move(sch), "sweep");
    RegressionWorld world{std::move(spec), std::move(marg), noise};
    RateReport rep = run_rate_sweep(world, sc);
    json summary = json::parse(rep.json_summary());
    summary["kind"] = "rate-reg";
    return {std::move(summary), rep.csv(), rep.within_tolerance};
}

SweepResult sweep_rate_cls(const Ctx& ctx) {
    check_keys(ctx.cfg, {"seed", "world", "solver", "sweep", "output"}, "config");
    const json& w = require_key(ctx.cfg, "world", "config");
    if (require_str(w, "kind", "world") != "hypercube")
        fail("world: rate-cls scales its geometry with n and needs an inline "
             "margin-step config");
    bool has_rp = false;
    double rp = 0.0;
    HypercubeConfig base = hc_config_from(w, "world", true, &has_rp, &rp);
    ClassificationWorld world;
    world.rho = base.rho;
    world.family = [base, has_rp, rp](size_t n) {
        HypercubeConfig c = base;
        if (has_rp) c.r = std::max<size_t>(2, size_t(std::pow(double(n), rp)));
        return c;
    };
    Schedule sch = schedule_from(
        opt(ctx.cfg, "solver"), Schedule::classification(base.rho),
        {"c_grid", "u", "validation_fraction", "leaf_cap", "theta"}, "solver");
    const json& sw = ctx.cfg.at("sweep");
    check_keys(sw, {"kind", "n_grid", "reps", "n_test", "target", "tolerance"}, "sweep");
    SweepConfig sc = sweep_config_common(sw, ctx.seed, std::move(sch), "sweep");
    RateReport rep = run_rate_sweep(world, sc);
    json summary = json::parse(rep.json_summary());
    summary["kind"] = "rate-cls";
    return {std::move(summary), rep.csv(), rep.within_tolerance};
}

SweepResult sweep_approx(const Ctx& ctx) {
    check_keys(ctx.cfg, {"seed", "world", "sweep", "output"}, "config");
    const json& sw = ctx.cfg.at("sweep");
    check_keys(sw, {"kind", "L_grid", "grid_n", "target", "tolerance", "n_test"}, "sweep");
    std::vector<size_t> L_grid =
        usize_vec_of(require_key(sw, "L_grid", "sweep"), "L_grid", "sweep");
    size_t grid_n = field_usize(sw, "grid_n", 4096, "sweep");
    size_t n_test = field_usize(sw, "n_test", 200000, "sweep");
    double target = require_num(sw, "target", "sweep");
    double tol = field_num(sw, "tolerance", 0.3, "sweep");

    const json& w = require_key(ctx.cfg, "world", "config");
    std::string kind = world_kind(w, ctx.base, "world");
    RateReport rep;
    if (kind == "ramp") {
        check_keys(w, {"kind"}, "world");
        Truth t;
        t.f = [](std::span<const double> x) { return x[0]; };
        t.sup_bound = 1.0;
        rep = run_approx_sweep(t, Marginal::uniform(1), L_grid, grid_n, target, tol,
                               n_test, ctx.seed);
    } else if (kind == "pshab") {
        auto [spec, marg] = pshab_world(w, ctx.seed, ctx.base, "world");
        rep = run_approx_sweep(pshab_truth(spec), marg, L_grid, grid_n, target, tol,
                               n_test, ctx.seed);
    } else if (kind == "hypercube") {
        HypercubeSpec spec = hc_world(w, ctx.seed, ctx.base, "world");
        rep = run_approx_sweep(hypercube_eta(spec), hypercube_marginal(spec), L_grid,
                               grid_n, target, tol, n_test, ctx.seed);
    } else {
        fail("world: unknown kind \"" + kind + "\"");
    }
    json summary = json::parse(rep.json_summary());
    summary["kind"] = "approx";
    return {std::move(summary), rep.csv(), rep.within_tolerance};
}

SweepResult sweep_heavy_tail(const Ctx& ctx) {
    check_keys(ctx.cfg, {"seed", "world", "solver", "sweep", "output"}, "config");
    auto [spec, marg] = pshab_world(require_key(ctx.cfg, "world", "config"),
                                    ctx.seed, ctx.base, "world");
    // the arms pin the noise scale at unit variance, so K is not configurable
    Schedule sch = schedule_from(
        opt(ctx.cfg, "solver"), Schedule::regression(default_clip(spec), 1.0),
        {"c_grid", "u", "validation_fraction", "leaf_cap", "theta", "M"}, "solver");
    const json& sw = ctx.cfg.at("sweep");
    check_keys(sw, {"kind", "n_grid", "reps", "n_test", "target", "tolerance", "m_values"},
               "sweep");
    std::vector<double> ms =
        num_vec_of(require_key(sw, "m_values", "sweep"), "m_values", "sweep");
    SweepConfig sc = sweep_config_common(sw, ctx.seed, std::move(sch), "sweep");
    RegressionWorld world{std::move(spec), std::move(marg), NoiseModel::gaussian(1.0)};
    HeavyTailReport rep = heavy_tail_comparison(world, sc, ms);

    bool pass = true;
    json summary = json::parse(rep.json_summary());
    const RateReport& gauss = rep.arms.front().report;
    for (size_t i = 0; i < rep.arms.size(); ++i) {
        const RateReport& r = rep.arms[i].report;
        pass = pass && r.within_tolerance;
        if (i == 0) continue;
        bool dominates = true;
        for (size_t k = 0; k < r.points.size() && k < gauss.points.size(); ++k)
            if (r.points[k].reps && gauss.points[k].reps &&
                r.points[k].median < gauss.points[k].median)
                dominates = false;
        summary["arms"][i]["dominates_gaussian_per_n"] = dominates;
        summary["arms"][i]["slope_gap_vs_gaussian"] = r.slope - gauss.slope;
    }
    summary["kind"] = "heavy-tail";
    return {std::move(summary), rep.csv(), pass};
}

SweepResult sweep_oracle_check(const Ctx& ctx) {
    check_keys(ctx.cfg, {"seed", "world", "noise", "sweep", "output"}, "config");
    const json& sw = ctx.cfg.at("sweep");
    check_keys(sw, {"kind", "ns", "Ls", "u", "reps", "grid_n", "n_test", "max_chat",
                    "max_row_ratio"}, "sweep");
    std::vector<size_t> ns = usize_vec_of(require_key(sw, "ns", "sweep"), "ns", "sweep");
    std::vector<size_t> Ls = usize_vec_of(require_key(sw, "Ls", "sweep"), "Ls", "sweep");
    double u = field_num(sw, "u", 1.0, "sweep");
    size_t reps = field_usize(sw, "reps", 5, "sweep");
    size_t grid_n = field_usize(sw, "grid_n", 4096, "sweep");
    size_t n_test = field_usize(sw, "n_test", 200000, "sweep");
    double max_chat = field_num(sw, "max_chat", 50.0, "sweep");
    double max_ratio = field_num(sw, "max_row_ratio", 5.0, "sweep");

    const json& w = require_key(ctx.cfg, "world", "config");
    std::string kind = world_kind(w, ctx.base, "world");
    OracleCheckReport rep;
    if (kind == "pshab") {
        auto [spec, marg] = pshab_world(w, ctx.seed, ctx.base, "world");
        NoiseModel noise = noise_from(opt(ctx.cfg, "noise"), "noise");
        RegressionWorld world{std::move(spec), std::move(marg), noise};
        rep = oracle_inequality_check(world, ns, Ls, u, reps, ctx.seed, grid_n, n_test);
    } else if (kind == "hypercube") {
        if (opt(ctx.cfg, "noise"))
            fail("config: oracle-check on a classification world takes no noise section");
        HypercubeSpec spec = hc_world(w, ctx.seed, ctx.base, "world");
        rep = oracle_inequality_check(spec, spec.cfg.rho, ns, Ls, u, reps, ctx.seed,
                                      grid_n, n_test);
    } else {
        fail("world: unknown kind \"" + kind + "\"");
    }

    bool pass = rep.max_chat <= max_chat && rep.worst_row_ratio <= max_ratio;
    json summary = {
        {"kind", "oracle-check"},
        {"max_chat", rep.max_chat},
        {"worst_row_ratio", rep.worst_row_ratio},
        {"limits", {{"max_chat", max_chat}, {"max_row_ratio", max_ratio}}},
        {"Ls", rep.Ls},
        {"ns", rep.ns},
        {"proxy", rep.proxy},
        {"pass", pass},
    };
    return {std::move(summary), rep.csv(), pass};
}

// the max-mode objective is scale-free in the budget, so allocations are
// compared on the weight simplex directly
double simplex_objective(std::span<const double> v, std::span<const double> x,
                         double theta) {
    double worst = 0.0;
    for (size_t b = 0; b < v.size(); ++b)
        worst = std::max(worst, v[b] * std::pow(x[b], -theta));
    return worst;
}

double grid_minimum(const std::vector<double>& v, double theta, size_t steps) {
    double best = kInf;
    std::vector<double> x(v.size());
    if (v.size() == 2) {
        for (size_t k = 1; k < steps; ++k) {
            x[0] = double(k) / double(steps);
            x[1] = double(steps - k) / double(steps);
            best = std::min(best, simplex_objective(v, x, theta));
        }
    } else {
        for (size_t k1 = 1; k1 + 2 <= steps; ++k1)
            for (size_t k2 = 1; k1 + k2 + 1 <= steps; ++k2) {
                x[0] = double(k1) / double(steps);
                x[1] = double(k2) / double(steps);
                x[2] = double(steps - k1 - k2) / double(steps);
                best = std::min(best, simplex_objective(v, x, theta));
            }
    }
    return best;
}

bool allocation_ok(const std::vector<double>& v, size_t L, AllocMode mode,
                   double theta) {
    AllocationResult res = allocate_leaves(v, L, mode, theta);
    size_t B = v.size(), total = 0;
    double wsum = 0.0, csum = 0.0;
    for (size_t b = 0; b < B; ++b) {
        total += res.leaves[b];
        wsum += res.weights[b];
        csum += res.continuous[b];
        if (res.leaves[b] < 1) return false;
        double lo = double(L - B) * res.weights[b];
        if (!(double(res.leaves[b]) > lo - 1e-9 &&
              double(res.leaves[b]) <= lo + 2.0 + 1e-9))
            return false;
    }
    return total == L && std::abs(wsum - 1.0) <= 1e-12 &&
           std::abs(csum - double(L)) <= 1e-9 * double(L) + 1e-12;
}

SweepResult sweep_alloc_check(const Ctx& ctx) {
    check_keys(ctx.cfg, {"seed", "sweep", "output"}, "config");
    const json& sw = ctx.cfg.at("sweep");
    check_keys(sw, {"kind", "trials", "grid_trials", "grid_b", "grid_steps"}, "sweep");
    size_t trials = field_usize(sw, "trials", 1000, "sweep");
    size_t grid_trials = field_usize(sw, "grid_trials", 3, "sweep");
    size_t grid_b = field_usize(sw, "grid_b", 3, "sweep");
    size_t steps = field_usize(sw, "grid_steps", 1000, "sweep");
    if (grid_b < 2 || grid_b > 3)
        fail("sweep: grid_b must be 2 or 3 (the simplex search is exhaustive)");
    if (steps < 10) fail("sweep: grid_steps must be at least 10");

    size_t bracket_bad = 0;
    for (size_t t = 0; t < trials; ++t) {
        Rng rng = Rng(ctx.seed, 5).split(t);
        size_t B = 1 + rng.below(6);
        size_t L = B + rng.below(41);
        double theta = 0.4 + 1.2 * rng.uniform();
        std::vector<double> v(B);
        for (double& x : v) x = std::exp(rng.uniform(-3.0, 3.0));
        for (AllocMode mode : {AllocMode::sum, AllocMode::max})
            if (!allocation_ok(v, L, mode, theta)) ++bracket_bad;
    }

    size_t grid_bad = 0, grid_total = 0;
    for (size_t B = 2; B <= grid_b; ++B)
        for (size_t t = 0; t < grid_trials; ++t) {
            ++grid_total;
            Rng rng = Rng(ctx.seed, 6).split(B).split(t);
            double theta = 0.4 + 1.2 * rng.uniform();
            std::vector<double> v(B);
            for (double& x : v) x = std::exp(rng.uniform(-2.0, 2.0));
            AllocationResult res = allocate_leaves(v, B, AllocMode::max, theta);
            double cont = simplex_objective(v, res.weights, theta);
            double best = grid_minimum(v, theta, steps);
            if (best < cont * (1.0 - 1e-9)) ++grid_bad;
        }

    bool pass = bracket_bad == 0 && grid_bad == 0;
    std::string csv = csv_table(
        {"check", "trials", "violations"},
        {{"bracket", std::to_string(trials), std::to_string(bracket_bad)},
         {"grid", std::to_string(grid_total), std::to_string(grid_bad)}});
    json summary = {
        {"kind", "alloc-check"},
        {"bracket", {{"trials", trials}, {"violations", bracket_bad}}},
        {"grid", {{"trials", grid_total}, {"steps", steps}, {"violations", grid_bad}}},
        {"pass", pass},
    };
    return {std::move(summary), std::move(csv), pass};
}

uint64_t ipow(uint64_t base, uint64_t e) {
    uint64_t r = 1;
    for (uint64_t i = 0; i < e; ++i) r *= base; // guard rails keep base^e tiny
    return r;
}

SweepResult sweep_enum_check(const Ctx& ctx) {
    check_keys(ctx.cfg, {"seed", "sweep", "output"}, "config");
    const json& sw = ctx.cfg.at("sweep");
    check_keys(sw, {"kind", "n_values", "d_values", "L_values"}, "sweep");
    std::vector<size_t> ns = field_usize_vec(sw, "n_values", {2, 3, 4, 5}, "sweep");
    std::vector<size_t> ds = field_usize_vec(sw, "d_values", {1, 2}, "sweep");
    std::vector<size_t> Ls = field_usize_vec(sw, "L_values", {1, 2, 3}, "sweep");

    std::vector<std::vector<std::string>> rows;
    size_t over = 0, hand_checked = 0, hand_bad = 0;
    for (size_t d : ds)
        for (size_t n : ns) {
            // counts depend only on rank structure, so any distinct draw does
            Rng rng = Rng(ctx.seed, 7).split(d).split(n);
            std::vector<double> xs(n * d), y(n);
            for (double& x : xs) x = rng.uniform();
            for (double& v : y) v = rng.uniform();
            Dataset data(std::move(xs), std::move(y), d);
            for (size_t L : Ls) {
                uint64_t count = enumerate_valid_partitions(data, L);
                uint64_t bound = ipow(uint64_t(d) * uint64_t(n), L);
                if (count > bound) ++over;
                if (n == 2 && L == 2 && (d == 1 || d == 2)) {
                    ++hand_checked;
                    if (count != (d == 1 ? 3u : 5u)) ++hand_bad;
                }
                rows.push_back({std::to_string(n), std::to_string(d),
                                std::to_string(L), std::to_string(count),
                                std::to_string(bound)});
            }
        }

    bool pass = over == 0 && hand_bad == 0;
    json summary = {
        {"kind", "enum-check"},
        {"cells", rows.size()},
        {"bound_violations", over},
        {"hand_checked", hand_checked},
        {"hand_mismatches", hand_bad},
        {"pass", pass},
    };
    return {std::move(summary), csv_table({"n", "d", "L", "count", "bound"}, rows), pass};
}

int cmd_sweep(const SweepOpts& o) {
    set_worker_count(resolve_workers(o.workers));
    json cfg = json::parse(read_file(o.config));
    if (!cfg.is_object()) fail("config: top level must be an object");
    const json& sw = require_key(cfg, "sweep", "config");
    if (!sw.is_object()) fail("config: \"sweep\" must be an object");
    std::string kind = require_str(sw, "kind", "sweep");
    std::string dir = resolve_out_dir(o.out_dir, cfg);
    Ctx ctx{cfg, fs::absolute(fs::path(o.config)).parent_path(), require_seed(cfg)};

    SweepResult res;
    if (kind == "rate-reg") res = sweep_rate_reg(ctx);
    else if (kind == "rate-cls") res = sweep_rate_cls(ctx);
    else if (kind == "approx") res = sweep_approx(ctx);
    else if (kind == "heavy-tail") res = sweep_heavy_tail(ctx);
    else if (kind == "oracle-check") res = sweep_oracle_check(ctx);
    else if (kind == "alloc-check") res = sweep_alloc_check(ctx);
    else if (kind == "enum-check") res = sweep_enum_check(ctx);
    else fail("sweep: unknown kind \"" + kind + "\"");

    // everything computed; only now touch the output directory
    json echo = std::move(ctx.cfg);
    echo["output"] = json{{"dir", dir}};
    fs::create_directories(dir);
    atomic_write_file((fs::path(dir) / "sweep.csv").string(), res.csv);
    atomic_write_file((fs::path(dir) / "summary.json").string(),
                      res.summary.dump(2) + "\n");
    atomic_write_file((fs::path(dir) / "config.json").string(), echo.dump(2) + "\n");
    return res.pass ? 0 : 1;
}

// ---- enumerate ---------------------------------------------------------------------

int cmd_enumerate(const EnumOpts& o) {
    set_worker_count(resolve_workers(o.workers));
    if (o.leaves == 0) fail("enumerate: --leaves must be at least 1");
    Dataset data = read_csv_dataset(o.data);
    uint64_t count = enumerate_valid_partitions(data, o.leaves);
    uint64_t bound = ipow(uint64_t(data.d()) * uint64_t(data.n()), o.leaves);
    std::cout << json{{"count", count}, {"bound", bound}, {"within", count <= bound}}.dump()
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact shallow decision trees: fitting, synthetic worlds, rate "
                 "experiments"};
    app.require_subcommand(1);

    FitOpts fo;
    CLI::App* fit = app.add_subcommand("fit", "fit a tree to a CSV dataset");
    fit->add_option("--data", fo.data, "dataset CSV with header x1,...,xd,y")->required();
    fit->add_option("--loss", fo.loss, "reg | cls (default reg)")
        ->check(CLI::IsMember({"reg", "cls"}));
    CLI::Option* leaves_opt =
        fit->add_option("--leaves", fo.leaves, "leaf budget (constrained fit)");
    CLI::Option* lambda_opt = fit->add_option(
        "--lambda", fo.lambda, "penalty per leaves^theta of mean risk (penalized fit)");
    fit->add_option("--theta", fo.theta, "penalty exponent (default 1)")
        ->needs(lambda_opt);
    CLI::Option* sup_opt = fit->add_option(
        "--sup-bound", fo.sup_bound, "clipping level for squared loss (default none)");
    fit->add_option("--out", fo.out, "output model JSON")->required();
    fit->add_option("--workers", fo.workers, "worker cap, 0 = hardware");
    leaves_opt->excludes(lambda_opt);

    GenOpts go;
    CLI::App* gen = app.add_subcommand("gen", "sample a dataset from a world config");
    gen->add_option("--config", go.config, "world config JSON")->required();
    gen->add_option("--out-dir", go.out_dir, "overrides output.dir");
    gen->add_option("--workers", go.workers, "worker cap, 0 = hardware");

    SweepOpts so;
    CLI::App* sweep =
        app.add_subcommand("sweep", "run a rate sweep or consistency battery");
    sweep->add_option("--config", so.config, "sweep config JSON")->required();
    sweep->add_option("--out-dir", so.out_dir, "overrides output.dir");
    sweep->add_option("--workers", so.workers, "worker cap, 0 = hardware");

    EnumOpts eo;
    CLI::App* enumerate =
        app.add_subcommand("enumerate", "count valid tree partitions of a dataset");
    enumerate->add_option("--data", eo.data, "dataset CSV")->required();
    enumerate->add_option("--leaves", eo.leaves, "leaf budget")->required();
    enumerate->add_option("--workers", eo.workers, "worker cap, 0 = hardware");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e); // prints help or the parse error
        return code == 0 ? 0 : 2;
    }
    fo.has_leaves = leaves_opt->count() > 0;
    fo.has_lambda = lambda_opt->count() > 0;
    fo.has_sup = sup_opt->count() > 0;

    try {
        if (fit->parsed()) return cmd_fit(fo);
        if (gen->parsed()) return cmd_gen(go);
        if (sweep->parsed()) return cmd_sweep(so);
        return cmd_enumerate(eo);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const GuardRailError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
