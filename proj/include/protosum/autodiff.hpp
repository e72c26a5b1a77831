#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "protosum/tensor.hpp"

namespace protosum {

struct ParamId {
    std::size_t index = 0;
};

struct Parameter {
    std::string name;
    Matrix value;
};

// Ordered, named collection of trainable matrices. Order is insertion order and
// is the order used by gradients, optimizer state, and checkpoints.
class ParameterSet {
  public:
    ParamId add(std::string name, Matrix init);

    Parameter& operator[](ParamId id) { return params_[id.index]; }
    const Parameter& operator[](ParamId id) const { return params_[id.index]; }
    Parameter& at(std::size_t i) { return params_[i]; }
    const Parameter& at(std::size_t i) const { return params_[i]; }

    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;
    std::optional<ParamId> find(const std::string& name) const;

    std::vector<Parameter>::iterator begin() { return params_.begin(); }
    std::vector<Parameter>::iterator end() { return params_.end(); }
    std::vector<Parameter>::const_iterator begin() const { return params_.begin(); }
    std::vector<Parameter>::const_iterator end() const { return params_.end(); }

  private:
    std::vector<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

// One gradient matrix per parameter, aligned with ParameterSet order.
using Gradients = std::vector<Matrix>;

Gradients zero_gradients(const ParameterSet& params);
void add_gradients(Gradients& into, const Gradients& from);

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
class Var {
  public:
    Var() = default;
    Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

    const Matrix& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    double scalar() const;

    Graph* graph() const { return graph_; }
    std::size_t id() const { return id_; }

  private:
    Graph* graph_ = nullptr;
    std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
// insertion order is a valid topological order for backward().
class Graph {
  public:
    using BackwardFn = std::function<void(Graph&, std::size_t self)>;

    // With record == false no backward closures are kept (inference mode).
    explicit Graph(const ParameterSet* params = nullptr, bool record = true);

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Matrix value);
    Var param(ParamId id);
    Var push(Matrix value, BackwardFn backward);

    bool recording() const { return record_; }
    std::size_t node_count() const { return nodes_.size(); }
    // Drops every node created after the first `count`; Vars to them become invalid.
    void truncate(std::size_t count);

    const Matrix& value(std::size_t id) const;
    // Gradient of node id; allocated (zeroed) on first access.
    Matrix& grad(std::size_t id);
    bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }

    // Seeds d(loss)/d(loss) = 1 and propagates. loss must be 1x1.
    void backward(Var loss);

    // Adds parameter gradients of the last backward() into out (sized per ParameterSet).
    void accumulate_param_grads(Gradients& out) const;

    // Set by ops that hit a numeric floor (e.g. log of a zero probability).
    void flag_floor() { floor_hits_++; }
    std::size_t floor_hits() const { return floor_hits_; }
    // Running hash of the piecewise branches taken (relu sides, log floors). Two
    // evaluations with equal signatures lie on the same smooth piece.
    void note_branch(bool taken) { branches_ = (branches_ ^ (taken ? 1u : 2u)) * 1099511628211ULL; }
    std::uint64_t branch_signature() const { return branches_; }

  private:
    struct Node {
        Matrix value;
        const Matrix* external = nullptr;
        Matrix grad;
        BackwardFn backward;
    };

    const ParameterSet* params_;
    bool record_;
    std::vector<Node> nodes_;
    std::unordered_map<std::size_t, std::size_t> param_nodes_;
    std::size_t floor_hits_ = 0;
    std::uint64_t branches_ = 14695981039346656037ULL;
};

// -- primitive operations ---------------------------------------------------
// Shape mismatches throw std::invalid_argument naming the op and both shapes.

Var matmul(Var a, Var b);     // a (m x k) * b (k x n)
Var matmul_nt(Var a, Var b);  // a (m x k) * b^T, b is (n x k)
Var add(Var a, Var b);
Var add_row(Var a, Var row);  // broadcast a 1 x n row over every row of a
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var a);
Var sigmoid(Var a);
// Row softmax; mask is additive (0 or a large negative surrogate for -inf).
Var softmax_rows(Var a, const Matrix* mask = nullptr);
// Per-row normalization followed by gamma/beta (both 1 x n).
Var layer_norm(Var a, Var gamma, Var beta, double eps = 1e-6);
Var embedding(Var table, const std::vector<int>& ids);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var sum(Var a);
Var mean(Var a);
// Natural log, floored at `floor`; values below the floor are counted on the graph.
Var log(Var a, double floor = 1e-12);
// out[i] = a(rows[i], cols[i]); result is n x 1.
Var gather(Var a, const std::vector<std::pair<std::size_t, std::size_t>>& cells);
// out[r] = sum over c in cols[r] of a(r, c); result is rows x 1. Empty lists give 0.
Var gather_sum(Var a, const std::vector<std::vector<std::size_t>>& cols);
// Mean binary cross-entropy between sigmoid(logits) and 0/1 targets, computed from logits.
Var bce_with_logits(Var logits, const Matrix& targets);

inline constexpr double kMaskedLogit = -1e9;

}  // namespace protosum
