#pragma once

// Tape-based reverse-mode differentiation over dense Eigen matrices.
//
// A Graph records every operation applied to its Vars; Graph::backward walks
// the tape in reverse and accumulates gradients. Parameters live outside the
// graph so a fresh Graph can be built per example while gradients accumulate
// into the same Parameter::grad buffers.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace revshill::ad {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool frozen = false;

  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
};

// Owns the parameters of one model. Parameter addresses stay stable for the
// lifetime of the store, including across moves.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Matrix value);

  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Parameter*> trainable();
  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }

  void zero_grad();
  void freeze_all(bool frozen = true);

  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& snap);

  std::size_t scalar_count() const;
  double grad_norm() const;
  // Hex digest of all values; used to prove a model was not mutated.
  std::string digest() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Graph;

struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Matrix& value() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return graph != nullptr; }
};

class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Matrix value);
  // References `value` without copying; it must outlive the graph.
  Var constant_ref(const Matrix& value);
  // A leaf that records its gradient locally (read it with grad()).
  Var input(Matrix value);
  Var param(Parameter& p);

  const Matrix& value(int id) const;
  // Gradient buffer of a node, zero-initialised on first access.
  Matrix& grad(int id);
  const Matrix& grad_of(Var v) { return grad(v.id); }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  void backward(Var loss);

  // Used by operations; `back` receives the id of the node it belongs to.
  Var push(Matrix value, bool needs_grad, std::function<void(int)> back);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* ext_value = nullptr;
    Matrix grad;
    Matrix* ext_grad = nullptr;
    bool needs_grad = false;
    bool touched = false;
    std::function<void(int)> back;
  };
  std::vector<Node> nodes_;
  bool grad_enabled_;
};

// Elementwise and linear algebra.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var add_row(Var a, Var row);  // broadcasts a 1xN row over every row of a
Var mul_row(Var a, Var row);
Var transpose(Var a);

Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var abs(Var a);
Var sqrt(Var a);

Var sum(Var a);
Var mean(Var a);
Var sum_rows(Var a);   // 1xN column sums
Var mean_rows(Var a);  // 1xN column means
Var max_rows(Var a);   // 1xN column maxima (max-pool over time)

// Row-wise normalised exponential; `mask` is added to the logits first.
Var softmax_rows(Var a, const Matrix* mask = nullptr);
Var log_softmax_rows(Var a, const Matrix* mask = nullptr);
Var layer_norm_rows(Var a, double eps = 1e-5);
Var l2_normalize_rows(Var a, double eps = 1e-12);

// out(r) = a(r, idx[r]); shape rows x 1.
Var pick(Var a, std::span<const int> idx);
Var lookup(Graph& g, Parameter& table, std::span<const int> ids);
Var lookup_const(Graph& g, const Matrix& table, std::span<const int> ids);

Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
// Sliding windows of `width` consecutive rows flattened into one row each.
Var unfold_rows(Var a, int width);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

// Lower-triangular additive mask (0 on/below the diagonal, -inf above).
Matrix causal_mask(Eigen::Index n);

}  // namespace revshill::ad
