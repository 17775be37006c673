#include "rrg/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "rrg/encoders.hpp"

namespace rrg {

void fill_trunc_normal(Matrix& m, Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.trunc_normal(stddev);
  }
}

void check_finite(const Matrix& m, const std::string& where) {
  if (!m.allFinite()) throw std::runtime_error("non-finite activation in " + where);
}

void init_linear(ParamStore& store, const std::string& prefix, int in_dim, int out_dim,
                 Rng& rng) {
  fill_trunc_normal(store.add(prefix + ".w", in_dim, out_dim).value, rng);
  store.add(prefix + ".b", 1, out_dim);
}

Var linear(Tape& tape, Var x, ParamStore& store, const std::string& prefix) {
  return add_rowvec(matmul(x, tape.leaf(store.at(prefix + ".w"))),
                    tape.leaf(store.at(prefix + ".b")));
}

void init_layer_norm(ParamStore& store, const std::string& prefix, int dim) {
  store.add(prefix + ".g", 1, dim).value.setOnes();
  store.add(prefix + ".b", 1, dim);
}

Var layer_norm(Tape& tape, Var x, ParamStore& store, const std::string& prefix) {
  return layer_norm_rows(x, tape.leaf(store.at(prefix + ".g")),
                         tape.leaf(store.at(prefix + ".b")));
}

void init_attention(ParamStore& store, const std::string& prefix, int dim, Rng& rng) {
  for (const char* name : {".q", ".k", ".v", ".o"}) {
    init_linear(store, prefix + name, dim, dim, rng);
  }
}

void init_mlp(ParamStore& store, const std::string& prefix, int dim, double ratio, Rng& rng) {
  const int hidden = static_cast<int>(std::lround(dim * ratio));
  init_linear(store, prefix + ".fc1", dim, hidden, rng);
  init_linear(store, prefix + ".fc2", hidden, dim, rng);
}

Var multi_head_attention(Tape& tape, Var query_src, Var kv_src, ParamStore& store,
                         const std::string& prefix, int num_heads, const Matrix* mask,
                         const std::vector<Var>* head_bias, AttnProbe* probe) {
  const int dim = static_cast<int>(query_src.value().cols());
  if (dim % num_heads != 0) {
    throw std::invalid_argument("attention dim " + std::to_string(dim) +
                                " not divisible by " + std::to_string(num_heads) + " heads");
  }
  const int head_dim = dim / num_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Var q = linear(tape, query_src, store, prefix + ".q");
  Var k = linear(tape, kv_src, store, prefix + ".k");
  Var v = linear(tape, kv_src, store, prefix + ".v");

  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(num_heads));
  for (int h = 0; h < num_heads; ++h) {
    Var qh = slice_cols(q, h * head_dim, head_dim);
    Var kh = slice_cols(k, h * head_dim, head_dim);
    Var vh = slice_cols(v, h * head_dim, head_dim);
    Var scores = scale(matmul(qh, kh, false, true), inv_sqrt);
    if (head_bias) scores = add(scores, (*head_bias)[static_cast<std::size_t>(h)]);
    if (mask) scores = add_const(scores, *mask);
    Var attn = softmax_rows(scores);
    if (probe) probe->maps.push_back(attn.value());
    heads.push_back(matmul(attn, vh));
  }
  return linear(tape, concat_cols(heads), store, prefix + ".o");
}

Var mlp_block(Tape& tape, Var x, ParamStore& store, const std::string& prefix) {
  return linear(tape, gelu(linear(tape, x, store, prefix + ".fc1")), store, prefix + ".fc2");
}

}  // namespace rrg
