#pragma once

// Small neural building blocks shared by the recommender, language model,
// aspect model and generator.

#include "revshill/autodiff.hpp"
#include "revshill/random.hpp"

#include <string>

namespace revshill::nn {

using ad::Graph;
using ad::Matrix;
using ad::Parameter;
using ad::ParameterStore;
using ad::Var;

Matrix xavier(Rng& rng, Eigen::Index rows, Eigen::Index cols);
Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev);

struct Linear {
  Parameter* weight = nullptr;  // in x out
  Parameter* bias = nullptr;    // 1 x out, may be null

  static Linear create(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng,
                       bool with_bias = true);
  static Linear bind(ParameterStore& store, const std::string& name, bool with_bias = true);
  Var operator()(Graph& g, Var x) const;
};

struct LayerNorm {
  Parameter* gain = nullptr;
  Parameter* shift = nullptr;

  static LayerNorm create(ParameterStore& store, const std::string& name, Eigen::Index dim);
  Var operator()(Graph& g, Var x) const;
};

// Scaled dot-product attention with `heads` heads over the query rows of `x`
// and the key/value rows of `memory`.
struct Attention {
  Linear query, key, value, out;
  int heads = 1;

  static Attention create(ParameterStore& store, const std::string& name, Eigen::Index dim, int heads, Rng& rng);
  Var operator()(Graph& g, Var x, Var memory, const Matrix* mask) const;
};

// Pre-norm transformer layer: self-attention, optional cross-attention, feed-forward.
struct TransformerLayer {
  LayerNorm norm_self, norm_cross, norm_ff;
  Attention self_attention;
  Attention cross_attention;
  Linear ff_in, ff_out;
  bool has_cross = false;

  static TransformerLayer create(ParameterStore& store, const std::string& name, Eigen::Index dim, Eigen::Index ff_dim,
                                 int heads, bool cross, Rng& rng);
  Var operator()(Graph& g, Var x, const Matrix* self_mask, const Var* memory) const;
};

}  // namespace revshill::nn
