#pragma once
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ermtree {

constexpr double kInf = std::numeric_limits<double>::infinity();

// bad user input / malformed config -> CLI exit code 2
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// exhaustive routine asked to run beyond its documented envelope -> exit code 3
struct GuardRailError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LossKind { squared, zero_one };

const char* to_string(LossKind k);
LossKind loss_from_string(const std::string& s);

struct RiskValue {
    double total = 0.0;
    double mean = 0.0;
};

// Feature matrix in [0,1]^d plus responses. Per-dimension sorted distinct
// values and per-point ranks into them are precomputed once; all solvers and
// cells speak rank indices so duplicate thresholds collapse by construction.
class Dataset {
  public:
    Dataset() = default;
    Dataset(std::vector<double> xs, std::vector<double> y, size_t d);

    size_t n() const { return y_.size(); }
    size_t d() const { return d_; }
    double x(size_t i, size_t j) const { return xs_[i * d_ + j]; }
    std::span<const double> row(size_t i) const { return {xs_.data() + i * d_, d_}; }
    double y(size_t i) const { return y_[i]; }
    const std::vector<double>& ys() const { return y_; }

    // ascending distinct values of dimension j
    const std::vector<double>& distinct(size_t j) const { return distinct_[j]; }
    // rank of x(i,j) within distinct(j)
    int rank(size_t i, size_t j) const { return ranks_[i * d_ + j]; }

    bool labels_binary() const; // every y in {0,1}

  private:
    std::vector<double> xs_;  // row-major n*d
    std::vector<double> y_;
    std::vector<int> ranks_;
    std::vector<std::vector<double>> distinct_;
    size_t d_ = 0;
};

Dataset read_csv_dataset(const std::string& path);
void write_csv_dataset(const Dataset& data, const std::string& path);

// Axis-aligned box in rank space: dimension j spans (lo[j], hi[j]] as indices
// into data.distinct(j), lo[j] == -1 meaning the domain's left edge. A point
// lies inside iff lo[j] < rank < = hi[j] for every j.
struct Cell {
    std::vector<int16_t> lo, hi;

    static Cell root(const Dataset& data);
    bool contains(const Dataset& data, size_t i) const;
    bool operator==(const Cell&) const = default;
};

// leaf fitting: squared -> mean clipped to [-M, M]; zero-one -> majority vote
// with ties going to label 1 (mean >= 1/2)
double leaf_value(std::span<const double> ys, LossKind loss, double sup_bound);

struct LeafFit {
    double value = 0.0;
    double cost = 0.0; // total loss over the members at that value
};
// members given as indices into data; summation runs in the order given
LeafFit fit_leaf(const Dataset& data, std::span<const size_t> members,
                 LossKind loss, double sup_bound);

struct TreeNode {
    int dim = -1;     // -1 marks a leaf
    double tau = 0.0; // split threshold, x_dim <= tau goes left
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool operator==(const TreeNode&) const = default;
};

struct TreeModel {
    std::vector<TreeNode> nodes; // root at index 0
    LossKind loss = LossKind::squared;
    double sup_bound = kInf;

    size_t n_leaves() const;
    double predict(std::span<const double> x) const;
    bool operator==(const TreeModel&) const = default;
};

RiskValue empirical_risk(const TreeModel& model, const Dataset& data);

std::string tree_to_json(const TreeModel& model, const RiskValue* train_risk = nullptr);
TreeModel tree_from_json(const std::string& text, RiskValue* train_risk = nullptr);

} // namespace ermtree
