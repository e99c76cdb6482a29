#include "revshill/autodiff.hpp"

#include "revshill/hashing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace revshill::ad {

Parameter& ParameterStore::add(const std::string& name, Matrix value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  params_.push_back(std::make_unique<Parameter>(name, std::move(value)));
  return *params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return *p;
  throw std::out_of_range("unknown parameter: " + name);
}

const Parameter& ParameterStore::get(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return *p;
  throw std::out_of_range("unknown parameter: " + name);
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return true;
  return false;
}

std::vector<Parameter*> ParameterStore::trainable() {
  std::vector<Parameter*> out;
  for (auto& p : params_)
    if (!p->frozen) out.push_back(p.get());
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

void ParameterStore::freeze_all(bool frozen) {
  for (auto& p : params_) p->frozen = frozen;
}

std::vector<Matrix> ParameterStore::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterStore::restore(const std::vector<Matrix>& snap) {
  if (snap.size() != params_.size()) throw std::invalid_argument("snapshot size mismatch");
  for (std::size_t i = 0; i < snap.size(); ++i) params_[i]->value = snap[i];
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

double ParameterStore::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_) s += p->grad.squaredNorm();
  return std::sqrt(s);
}

std::string ParameterStore::digest() const {
  Sha256 h;
  for (const auto& p : params_) {
    h.update(p->name);
    h.update(std::string_view(reinterpret_cast<const char*>(p->value.data()),
                              static_cast<std::size_t>(p->value.size()) * sizeof(double)));
  }
  return h.hex();
}

const Matrix& Var::value() const { return graph->value(id); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw std::logic_error("Var::scalar on non-scalar");
  return v(0, 0);
}

Var Graph::push(Matrix value, bool needs_grad, std::function<void(int)> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad && grad_enabled_;
  if (n.needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Graph::constant_ref(const Matrix& value) {
  Node n;
  n.ext_value = &value;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::input(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::param(Parameter& p) {
  Node n;
  n.ext_value = &p.value;
  n.needs_grad = grad_enabled_ && !p.frozen;
  if (n.needs_grad) {
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    n.ext_grad = &p.grad;
  }
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

const Matrix& Graph::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.ext_value ? *n.ext_value : n.value;
}

Matrix& Graph::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.touched = true;
  if (n.ext_grad) return *n.ext_grad;
  if (n.grad.size() == 0) {
    const Matrix& v = value(id);
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw std::logic_error("backward on foreign Var");
  if (value(loss.id).size() != 1) throw std::logic_error("backward requires a scalar loss");
  if (!nodes_[static_cast<std::size_t>(loss.id)].needs_grad) return;
  grad(loss.id)(0, 0) += 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.needs_grad && n.touched && n.back) n.back(i);
  }
}

namespace {

bool needs(Var v) { return v.graph->needs_grad(v.id); }

Graph* graph_of(Var a, Var b) {
  if (a.graph != b.graph) throw std::logic_error("operands belong to different graphs");
  return a.graph;
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

// Elementwise unary op whose derivative is expressed through input x and output y.
template <class Fwd, class Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Graph* g = a.graph;
  const int ia = a.id;
  return g->push(fwd(a.value()), needs(a), [g, ia, deriv](int self) {
    g->grad(ia).array() += g->grad(self).array() * deriv(g->value(ia).array(), g->value(self).array());
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph* g = graph_of(a, b);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  const int ia = a.id, ib = b.id;
  return g->push(a.value() * b.value(), needs(a) || needs(b), [g, ia, ib](int self) {
    const Matrix& dy = g->grad(self);
    if (g->needs_grad(ia)) g->grad(ia).noalias() += dy * g->value(ib).transpose();
    if (g->needs_grad(ib)) g->grad(ib).noalias() += g->value(ia).transpose() * dy;
  });
}

Var add(Var a, Var b) {
  Graph* g = graph_of(a, b);
  check_same_shape(a.value(), b.value(), "add");
  const int ia = a.id, ib = b.id;
  return g->push(a.value() + b.value(), needs(a) || needs(b), [g, ia, ib](int self) {
    const Matrix& dy = g->grad(self);
    if (g->needs_grad(ia)) g->grad(ia) += dy;
    if (g->needs_grad(ib)) g->grad(ib) += dy;
  });
}

Var sub(Var a, Var b) {
  Graph* g = graph_of(a, b);
  check_same_shape(a.value(), b.value(), "sub");
  const int ia = a.id, ib = b.id;
  return g->push(a.value() - b.value(), needs(a) || needs(b), [g, ia, ib](int self) {
    const Matrix& dy = g->grad(self);
    if (g->needs_grad(ia)) g->grad(ia) += dy;
    if (g->needs_grad(ib)) g->grad(ib) -= dy;
  });
}

Var mul(Var a, Var b) {
  Graph* g = graph_of(a, b);
  check_same_shape(a.value(), b.value(), "mul");
  const int ia = a.id, ib = b.id;
  return g->push(a.value().cwiseProduct(b.value()), needs(a) || needs(b), [g, ia, ib](int self) {
    const Matrix& dy = g->grad(self);
    if (g->needs_grad(ia)) g->grad(ia) += dy.cwiseProduct(g->value(ib));
    if (g->needs_grad(ib)) g->grad(ib) += dy.cwiseProduct(g->value(ia));
  });
}

Var scale(Var a, double s) {
  Graph* g = a.graph;
  const int ia = a.id;
  return g->push(a.value() * s, needs(a), [g, ia, s](int self) { g->grad(ia) += g->grad(self) * s; });
}

Var add_scalar(Var a, double s) {
  Graph* g = a.graph;
  const int ia = a.id;
  return g->push(a.value().array() + s, needs(a), [g, ia](int self) { g->grad(ia) += g->grad(self); });
}

Var add_row(Var a, Var row) {
  Graph* g = graph_of(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
  const int ia = a.id, ib = row.id;
  Matrix out = a.value().rowwise() + row.value().row(0);
  return g->push(std::move(out), needs(a) || needs(row), [g, ia, ib](int self) {
    const Matrix& dy = g->grad(self);
    if (g->needs_grad(ia)) g->grad(ia) += dy;
    if (g->needs_grad(ib)) g->grad(ib) += dy.colwise().sum();
  });
}

Var mul_row(Var a, Var row) {
  Graph* g = graph_of(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("mul_row: shape mismatch");
  const int ia = a.id, ib = row.id;
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return g->push(std::move(out), needs(a) || needs(row), [g, ia, ib](int self) {
    const Matrix& dy = g->grad(self);
    if (g->needs_grad(ia)) g->grad(ia).array() += dy.array().rowwise() * g->value(ib).row(0).array();
    if (g->needs_grad(ib)) g->grad(ib) += dy.cwiseProduct(g->value(ia)).colwise().sum();
  });
}

Var transpose(Var a) {
  Graph* g = a.graph;
  const int ia = a.id;
  return g->push(a.value().transpose(), needs(a), [g, ia](int self) { g->grad(ia) += g->grad(self).transpose(); });
}

Var tanh(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().tanh(); },
      [](const auto&, const auto& y) { return 1.0 - y.square(); });
}

Var relu(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.cwiseMax(0.0); },
      [](const auto& x, const auto&) { return (x > 0.0).template cast<double>(); });
}

Var sigmoid(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return (1.0 + (-x.array()).exp()).inverse(); },
      [](const auto&, const auto& y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().exp(); },
      [](const auto&, const auto& y) { return y; });
}

Var log(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().log(); },
      [](const auto& x, const auto&) { return x.inverse(); });
}

Var square(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().square(); },
      [](const auto& x, const auto&) { return 2.0 * x; });
}

Var sqrt(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.array().sqrt(); },
      [](const auto&, const auto& y) { return 0.5 / y; });
}

Var abs(Var a) {
  return unary(
      a, [](const Matrix& x) -> Matrix { return x.cwiseAbs(); },
      [](const auto& x, const auto&) { return x.sign(); });
}

Var sum(Var a) {
  Graph* g = a.graph;
  const int ia = a.id;
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return g->push(std::move(out), needs(a), [g, ia](int self) { g->grad(ia).array() += g->grad(self)(0, 0); });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw std::invalid_argument("mean of empty matrix");
  return scale(sum(a), 1.0 / n);
}

Var sum_rows(Var a) {
  Graph* g = a.graph;
  const int ia = a.id;
  return g->push(a.value().colwise().sum(), needs(a), [g, ia](int self) {
    g->grad(ia).rowwise() += g->grad(self).row(0);
  });
}

Var mean_rows(Var a) {
  if (a.rows() == 0) throw std::invalid_argument("mean_rows of empty matrix");
  return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows()));
}

Var max_rows(Var a) {
  Graph* g = a.graph;
  const Matrix& x = a.value();
  if (x.rows() == 0) throw std::invalid_argument("max_rows of empty matrix");
  Matrix out(1, x.cols());
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    Eigen::Index r;
    out(0, c) = x.col(c).maxCoeff(&r);
    arg[static_cast<std::size_t>(c)] = r;
  }
  const int ia = a.id;
  return g->push(std::move(out), needs(a), [g, ia, arg = std::move(arg)](int self) {
    const Matrix& dy = g->grad(self);
    Matrix& dx = g->grad(ia);
    for (Eigen::Index c = 0; c < dy.cols(); ++c) dx(arg[static_cast<std::size_t>(c)], c) += dy(0, c);
  });
}

Var softmax_rows(Var a, const Matrix* mask) {
  Graph* g = a.graph;
  Matrix z = a.value();
  if (mask) {
    check_same_shape(z, *mask, "softmax_rows mask");
    z += *mask;
  }
  Eigen::VectorXd mx = z.rowwise().maxCoeff();
  Matrix e = (z.colwise() - mx).array().exp();
  Eigen::VectorXd s = e.rowwise().sum();
  Matrix y = e.array().colwise() / s.array();
  const int ia = a.id;
  return g->push(std::move(y), needs(a), [g, ia](int self) {
    const Matrix& dy = g->grad(self);
    const Matrix& y = g->value(self);
    Eigen::VectorXd dot = dy.cwiseProduct(y).rowwise().sum();
    g->grad(ia).array() += y.array() * (dy.colwise() - dot).array();
  });
}

Var log_softmax_rows(Var a, const Matrix* mask) {
  Graph* g = a.graph;
  Matrix z = a.value();
  if (mask) {
    check_same_shape(z, *mask, "log_softmax_rows mask");
    z += *mask;
  }
  Eigen::VectorXd mx = z.rowwise().maxCoeff();
  Matrix shifted = z.colwise() - mx;
  Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log();
  Matrix y = shifted.colwise() - lse;
  const int ia = a.id;
  return g->push(std::move(y), needs(a), [g, ia](int self) {
    const Matrix& dy = g->grad(self);
    Matrix p = g->value(self).array().exp();
    Eigen::VectorXd tot = dy.rowwise().sum();
    g->grad(ia) += dy - (p.array().colwise() * tot.array()).matrix();
  });
}

Var layer_norm_rows(Var a, double eps) {
  Graph* g = a.graph;
  const Matrix& x = a.value();
  const double n = static_cast<double>(x.cols());
  Eigen::VectorXd mu = x.rowwise().mean();
  Matrix xc = x.colwise() - mu;
  Eigen::VectorXd inv = ((xc.array().square().rowwise().sum() / n) + eps).rsqrt();
  Matrix y = xc.array().colwise() * inv.array();
  const int ia = a.id;
  return g->push(std::move(y), needs(a), [g, ia, inv, n](int self) {
    const Matrix& dy = g->grad(self);
    const Matrix& y = g->value(self);
    Eigen::VectorXd mdy = dy.rowwise().mean();
    Eigen::VectorXd mdyy = dy.cwiseProduct(y).rowwise().sum() / n;
    Matrix dx = (dy.colwise() - mdy) - (y.array().colwise() * mdyy.array()).matrix();
    g->grad(ia).array() += dx.array().colwise() * inv.array();
  });
}

Var l2_normalize_rows(Var a, double eps) {
  Graph* g = a.graph;
  const Matrix& x = a.value();
  Eigen::VectorXd norm = (x.rowwise().squaredNorm().array() + eps).sqrt();
  Matrix y = x.array().colwise() / norm.array();
  const int ia = a.id;
  return g->push(std::move(y), needs(a), [g, ia, norm](int self) {
    const Matrix& dy = g->grad(self);
    const Matrix& y = g->value(self);
    Eigen::VectorXd dot = dy.cwiseProduct(y).rowwise().sum();
    Matrix dx = dy - (y.array().colwise() * dot.array()).matrix();
    g->grad(ia).array() += dx.array().colwise() / norm.array();
  });
}

Var pick(Var a, std::span<const int> idx) {
  Graph* g = a.graph;
  const Matrix& x = a.value();
  if (static_cast<Eigen::Index>(idx.size()) != x.rows()) throw std::invalid_argument("pick: index count");
  Matrix out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const int c = idx[static_cast<std::size_t>(r)];
    if (c < 0 || c >= x.cols()) throw std::out_of_range("pick: index out of range");
    out(r, 0) = x(r, c);
  }
  std::vector<int> ids(idx.begin(), idx.end());
  const int ia = a.id;
  return g->push(std::move(out), needs(a), [g, ia, ids = std::move(ids)](int self) {
    const Matrix& dy = g->grad(self);
    Matrix& dx = g->grad(ia);
    for (Eigen::Index r = 0; r < dy.rows(); ++r) dx(r, ids[static_cast<std::size_t>(r)]) += dy(r, 0);
  });
}

namespace {

Matrix gather_rows(const Matrix& table, std::span<const int> ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) throw std::out_of_range("lookup: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  }
  return out;
}

}  // namespace

Var lookup(Graph& g, Parameter& table, std::span<const int> ids) {
  Matrix out = gather_rows(table.value, ids);
  std::vector<int> rows(ids.begin(), ids.end());
  Parameter* p = &table;
  Graph* gp = &g;
  return g.push(std::move(out), !table.frozen, [gp, p, rows = std::move(rows)](int self) {
    const Matrix& dy = gp->grad(self);
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols())
      p->grad = Matrix::Zero(p->value.rows(), p->value.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) p->grad.row(rows[i]) += dy.row(static_cast<Eigen::Index>(i));
  });
}

Var lookup_const(Graph& g, const Matrix& table, std::span<const int> ids) {
  return g.constant(gather_rows(table, ids));
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  Graph* g = parts[0].graph;
  Eigen::Index rows = 0, cols = parts[0].cols();
  bool ng = false;
  for (const Var& v : parts) {
    if (v.graph != g) throw std::logic_error("operands belong to different graphs");
    if (v.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += v.rows();
    ng = ng || needs(v);
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index off = 0;
  for (const Var& v : parts) {
    out.middleRows(off, v.rows()) = v.value();
    spans.emplace_back(v.id, off);
    off += v.rows();
  }
  return g->push(std::move(out), ng, [g, spans = std::move(spans)](int self) {
    const Matrix& dy = g->grad(self);
    for (const auto& [id, start] : spans) {
      if (!g->needs_grad(id)) continue;
      Matrix& dx = g->grad(id);
      dx += dy.middleRows(start, dx.rows());
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  Graph* g = parts[0].graph;
  Eigen::Index cols = 0, rows = parts[0].rows();
  bool ng = false;
  for (const Var& v : parts) {
    if (v.graph != g) throw std::logic_error("operands belong to different graphs");
    if (v.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += v.cols();
    ng = ng || needs(v);
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index off = 0;
  for (const Var& v : parts) {
    out.middleCols(off, v.cols()) = v.value();
    spans.emplace_back(v.id, off);
    off += v.cols();
  }
  return g->push(std::move(out), ng, [g, spans = std::move(spans)](int self) {
    const Matrix& dy = g->grad(self);
    for (const auto& [id, start] : spans) {
      if (!g->needs_grad(id)) continue;
      Matrix& dx = g->grad(id);
      dx += dy.middleCols(start, dx.cols());
    }
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  Graph* g = a.graph;
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::out_of_range("slice_rows");
  const int ia = a.id;
  return g->push(a.value().middleRows(start, count), needs(a), [g, ia, start, count](int self) {
    g->grad(ia).middleRows(start, count) += g->grad(self);
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Graph* g = a.graph;
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::out_of_range("slice_cols");
  const int ia = a.id;
  return g->push(a.value().middleCols(start, count), needs(a), [g, ia, start, count](int self) {
    g->grad(ia).middleCols(start, count) += g->grad(self);
  });
}

Var unfold_rows(Var a, int width) {
  Graph* g = a.graph;
  const Matrix& x = a.value();
  const Eigen::Index d = x.cols();
  const Eigen::Index n = x.rows() - width + 1;
  if (width < 1 || n < 1) throw std::invalid_argument("unfold_rows: sequence shorter than window");
  Matrix out(n, d * width);
  for (Eigen::Index t = 0; t < n; ++t)
    for (int k = 0; k < width; ++k) out.block(t, k * d, 1, d) = x.row(t + k);
  const int ia = a.id;
  return g->push(std::move(out), needs(a), [g, ia, width, d, n](int self) {
    const Matrix& dy = g->grad(self);
    Matrix& dx = g->grad(ia);
    for (Eigen::Index t = 0; t < n; ++t)
      for (int k = 0; k < width; ++k) dx.row(t + k) += dy.block(t, k * d, 1, d);
  });
}

Matrix causal_mask(Eigen::Index n) {
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = r + 1; c < n; ++c) m(r, c) = -1e9;
  return m;
}

}  // namespace revshill::ad
