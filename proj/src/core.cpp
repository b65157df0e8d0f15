#include "ermtree/core.hpp"
#include "ermtree/io_util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ermtree {

const char* to_string(LossKind k) {
    return k == LossKind::squared ? "squared" : "zero-one";
}

LossKind loss_from_string(const std::string& s) {
    if (s == "squared" || s == "reg") return LossKind::squared;
    if (s == "zero-one" || s == "cls") return LossKind::zero_one;
    throw ConfigError("unknown loss kind: " + s);
}

Dataset::Dataset(std::vector<double> xs, std::vector<double> y, size_t d)
    : xs_(std::move(xs)), y_(std::move(y)), d_(d) {
    if (d_ == 0) throw ConfigError("dataset needs at least one feature");
    if (xs_.size() != y_.size() * d_)
        throw ConfigError("feature matrix size does not match label count");
    size_t n = y_.size();
    for (double v : xs_)
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError("feature values must lie in [0,1]");
    for (double v : y_)
        if (!std::isfinite(v)) throw ConfigError("labels must be finite");
    distinct_.resize(d_);
    ranks_.resize(n * d_);
    std::vector<double> col(n);
    for (size_t j = 0; j < d_; ++j) {
        for (size_t i = 0; i < n; ++i) col[i] = x(i, j);
        std::sort(col.begin(), col.end());
        col.erase(std::unique(col.begin(), col.end()), col.end());
        distinct_[j] = col;
        for (size_t i = 0; i < n; ++i) {
            auto it = std::lower_bound(distinct_[j].begin(), distinct_[j].end(), x(i, j));
            ranks_[i * d_ + j] = int(it - distinct_[j].begin());
        }
        col.resize(n);
    }
    for (size_t j = 0; j < d_; ++j)
        if (distinct_[j].size() > 32000)
            throw GuardRailError("more than 32000 distinct values per dimension");
}

bool Dataset::labels_binary() const {
    for (double v : y_)
        if (v != 0.0 && v != 1.0) return false;
    return true;
}

Cell Cell::root(const Dataset& data) {
    Cell c;
    c.lo.assign(data.d(), -1);
    c.hi.resize(data.d());
    for (size_t j = 0; j < data.d(); ++j)
        c.hi[j] = int16_t(data.distinct(j).size()) - 1;
    return c;
}

bool Cell::contains(const Dataset& data, size_t i) const {
    for (size_t j = 0; j < lo.size(); ++j) {
        int r = data.rank(i, j);
        if (r <= lo[j] || r > hi[j]) return false;
    }
    return true;
}

double leaf_value(std::span<const double> ys, LossKind loss, double sup_bound) {
    double sum = 0.0;
    for (double v : ys) sum += v;
    double mean = ys.empty() ? 0.0 : sum / double(ys.size());
    if (loss == LossKind::zero_one) return mean >= 0.5 ? 1.0 : 0.0;
    return std::clamp(mean, -sup_bound, sup_bound);
}

LeafFit fit_leaf(const Dataset& data, std::span<const size_t> members,
                 LossKind loss, double sup_bound) {
    LeafFit f;
    if (members.empty()) return f;
    if (loss == LossKind::zero_one) {
        double ones = 0.0;
        for (size_t i : members) ones += data.y(i);
        double cnt = double(members.size());
        f.value = 2.0 * ones >= cnt ? 1.0 : 0.0;
        f.cost = f.value == 1.0 ? cnt - ones : ones;
        return f;
    }
    double sum = 0.0;
    for (size_t i : members) sum += data.y(i);
    f.value = std::clamp(sum / double(members.size()), -sup_bound, sup_bound);
    double cost = 0.0;
    for (size_t i : members) {
        double r = data.y(i) - f.value;
        cost += r * r;
    }
    f.cost = cost;
    return f;
}

size_t TreeModel::n_leaves() const {
    size_t k = 0;
    for (const auto& nd : nodes)
        if (nd.dim < 0) ++k;
    return k;
}

double TreeModel::predict(std::span<const double> x) const {
    int i = 0;
    for (;;) {
        const TreeNode& nd = nodes[i];
        if (nd.dim < 0) return nd.value;
        i = x[size_t(nd.dim)] <= nd.tau ? nd.left : nd.right;
    }
}

RiskValue empirical_risk(const TreeModel& model, const Dataset& data) {
    RiskValue r;
    for (size_t i = 0; i < data.n(); ++i) {
        double p = model.predict(data.row(i));
        if (model.loss == LossKind::zero_one) {
            r.total += p != data.y(i) ? 1.0 : 0.0;
        } else {
            double e = p - data.y(i);
            r.total += e * e;
        }
    }
    r.mean = data.n() ? r.total / double(data.n()) : 0.0;
    return r;
}

namespace {

nlohmann::ordered_json node_json(const TreeModel& m, int i) {
    const TreeNode& nd = m.nodes[size_t(i)];
    nlohmann::ordered_json j;
    if (nd.dim < 0) {
        j["value"] = nd.value;
    } else {
        j["dim"] = nd.dim;
        j["tau"] = nd.tau;
        j["left"] = node_json(m, nd.left);
        j["right"] = node_json(m, nd.right);
    }
    return j;
}

int node_from_json(const nlohmann::json& j, TreeModel& m) {
    int idx = int(m.nodes.size());
    m.nodes.emplace_back();
    if (j.contains("value")) {
        m.nodes[size_t(idx)].value = j.at("value").get<double>();
        return idx;
    }
    m.nodes[size_t(idx)].dim = j.at("dim").get<int>();
    m.nodes[size_t(idx)].tau = j.at("tau").get<double>();
    int l = node_from_json(j.at("left"), m);
    m.nodes[size_t(idx)].left = l;
    int r = node_from_json(j.at("right"), m);
    m.nodes[size_t(idx)].right = r;
    return idx;
}

} // namespace

std::string tree_to_json(const TreeModel& model, const RiskValue* train_risk) {
    nlohmann::ordered_json j;
    j["loss"] = to_string(model.loss);
    if (std::isinf(model.sup_bound))
        j["sup_bound"] = "inf";
    else
        j["sup_bound"] = model.sup_bound;
    j["n_leaves"] = model.n_leaves();
    if (train_risk) {
        j["train_risk"] = {{"total", train_risk->total}, {"mean", train_risk->mean}};
    }
    j["tree"] = node_json(model, 0);
    return j.dump(2) + "\n";
}

TreeModel tree_from_json(const std::string& text, RiskValue* train_risk) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad model JSON: ") + e.what());
    }
    TreeModel m;
    m.loss = loss_from_string(j.at("loss").get<std::string>());
    if (j.at("sup_bound").is_string())
        m.sup_bound = kInf;
    else
        m.sup_bound = j.at("sup_bound").get<double>();
    node_from_json(j.at("tree"), m);
    if (train_risk && j.contains("train_risk")) {
        train_risk->total = j["train_risk"].at("total").get<double>();
        train_risk->mean = j["train_risk"].at("mean").get<double>();
    }
    return m;
}

Dataset read_csv_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty dataset file: " + path);
    size_t d = size_t(std::count(line.begin(), line.end(), ',')); // x1..xd,y
    if (d == 0) throw ConfigError("dataset header needs x1,...,xd,y columns");
    std::vector<double> xs, y;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        size_t pos = 0, field = 0;
        while (field <= d) {
            size_t next = line.find(',', pos);
            std::string_view sv(line.data() + pos,
                                (next == std::string::npos ? line.size() : next) - pos);
            double v = 0.0;
            auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
            if (ec != std::errc() || p != sv.data() + sv.size())
                throw ConfigError(path + ":" + std::to_string(lineno) + ": bad number");
            if (field < d)
                xs.push_back(v);
            else
                y.push_back(v);
            ++field;
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        if (field != d + 1)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": wrong column count");
    }
    if (y.empty()) throw ConfigError("dataset has no rows: " + path);
    return Dataset(std::move(xs), std::move(y), d);
}

void write_csv_dataset(const Dataset& data, const std::string& path) {
    std::string out;
    for (size_t j = 0; j < data.d(); ++j) out += "x" + std::to_string(j + 1) + ",";
    out += "y\n";
    for (size_t i = 0; i < data.n(); ++i) {
        for (size_t j = 0; j < data.d(); ++j) {
            out += format_double(data.x(i, j));
            out += ',';
        }
        out += format_double(data.y(i));
        out += '\n';
    }
    atomic_write_file(path, out);
}

} // namespace ermtree
