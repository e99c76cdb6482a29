#include "revshill/nn.hpp"

#include <cmath>
#include <vector>

namespace revshill::nn {

Matrix xavier(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
  return m;
}

Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  // Box-Muller on the raw engine keeps draws identical across standard libraries.
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double u1 = std::max(uniform01(rng), 1e-300);
      const double u2 = uniform01(rng);
      m(r, c) = stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
  return m;
}

Linear Linear::create(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng,
                      bool with_bias) {
  Linear l;
  l.weight = &store.add(name + ".w", xavier(rng, in, out));
  if (with_bias) l.bias = &store.add(name + ".b", Matrix::Zero(1, out));
  return l;
}

Linear Linear::bind(ParameterStore& store, const std::string& name, bool with_bias) {
  Linear l;
  l.weight = &store.get(name + ".w");
  if (with_bias) l.bias = &store.get(name + ".b");
  return l;
}

Var Linear::operator()(Graph& g, Var x) const {
  Var y = ad::matmul(x, g.param(*weight));
  if (bias) y = ad::add_row(y, g.param(*bias));
  return y;
}

LayerNorm LayerNorm::create(ParameterStore& store, const std::string& name, Eigen::Index dim) {
  LayerNorm n;
  n.gain = &store.add(name + ".g", Matrix::Ones(1, dim));
  n.shift = &store.add(name + ".b", Matrix::Zero(1, dim));
  return n;
}

Var LayerNorm::operator()(Graph& g, Var x) const {
  return ad::add_row(ad::mul_row(ad::layer_norm_rows(x), g.param(*gain)), g.param(*shift));
}

Attention Attention::create(ParameterStore& store, const std::string& name, Eigen::Index dim, int heads, Rng& rng) {
  Attention a;
  a.query = Linear::create(store, name + ".q", dim, dim, rng, false);
  a.key = Linear::create(store, name + ".k", dim, dim, rng, false);
  a.value = Linear::create(store, name + ".v", dim, dim, rng, false);
  a.out = Linear::create(store, name + ".o", dim, dim, rng);
  a.heads = heads;
  return a;
}

Var Attention::operator()(Graph& g, Var x, Var memory, const Matrix* mask) const {
  Var q = query(g, x);
  Var k = key(g, memory);
  Var v = value(g, memory);
  const Eigen::Index dim = q.cols();
  const Eigen::Index hd = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<Var> parts;
  for (int h = 0; h < heads; ++h) {
    Var qh = heads == 1 ? q : ad::slice_cols(q, h * hd, hd);
    Var kh = heads == 1 ? k : ad::slice_cols(k, h * hd, hd);
    Var vh = heads == 1 ? v : ad::slice_cols(v, h * hd, hd);
    Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt);
    Var weights = ad::softmax_rows(scores, mask);
    parts.push_back(ad::matmul(weights, vh));
  }
  Var mixed = heads == 1 ? parts[0] : ad::concat_cols(parts);
  return out(g, mixed);
}

TransformerLayer TransformerLayer::create(ParameterStore& store, const std::string& name, Eigen::Index dim,
                                          Eigen::Index ff_dim, int heads, bool cross, Rng& rng) {
  TransformerLayer t;
  t.norm_self = LayerNorm::create(store, name + ".ln_self", dim);
  t.self_attention = Attention::create(store, name + ".self", dim, heads, rng);
  t.has_cross = cross;
  if (cross) {
    t.norm_cross = LayerNorm::create(store, name + ".ln_cross", dim);
    t.cross_attention = Attention::create(store, name + ".cross", dim, heads, rng);
  }
  t.norm_ff = LayerNorm::create(store, name + ".ln_ff", dim);
  t.ff_in = Linear::create(store, name + ".ff_in", dim, ff_dim, rng);
  t.ff_out = Linear::create(store, name + ".ff_out", ff_dim, dim, rng);
  return t;
}

Var TransformerLayer::operator()(Graph& g, Var x, const Matrix* self_mask, const Var* memory) const {
  Var h = norm_self(g, x);
  x = x + self_attention(g, h, h, self_mask);
  if (has_cross && memory) x = x + cross_attention(g, norm_cross(g, x), *memory, nullptr);
  return x + ff_out(g, ad::relu(ff_in(g, norm_ff(g, x))));
}

}  // namespace revshill::nn
