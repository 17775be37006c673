#pragma once

#include <string>
#include <vector>

#include "rrg/autodiff.hpp"

namespace rrg {

struct AttnProbe;

// Parameter-block helpers. Each init_* creates entries under `prefix` in a
// fixed order; the matching forward helper looks them up by the same names.

void init_linear(ParamStore& store, const std::string& prefix, int in_dim, int out_dim,
                 Rng& rng);  // {prefix}.w trunc-normal(0.02), {prefix}.b zeros
Var linear(Tape& tape, Var x, ParamStore& store, const std::string& prefix);

void init_layer_norm(ParamStore& store, const std::string& prefix, int dim);
Var layer_norm(Tape& tape, Var x, ParamStore& store, const std::string& prefix);

void init_attention(ParamStore& store, const std::string& prefix, int dim, Rng& rng);
void init_mlp(ParamStore& store, const std::string& prefix, int dim, double ratio, Rng& rng);

// Multi-head attention with queries from `query_src` and keys/values from
// `kv_src`. `mask` is an additive [Tq, Tk] matrix (0 / -inf); `head_bias`
// optionally adds one [Tq, Tk] term per head. Post-softmax weights are
// appended to `probe` when given.
Var multi_head_attention(Tape& tape, Var query_src, Var kv_src, ParamStore& store,
                         const std::string& prefix, int num_heads,
                         const Matrix* mask = nullptr,
                         const std::vector<Var>* head_bias = nullptr,
                         AttnProbe* probe = nullptr);

Var mlp_block(Tape& tape, Var x, ParamStore& store, const std::string& prefix);

void fill_trunc_normal(Matrix& m, Rng& rng, double stddev = 0.02);

// Throws a numeric error naming `where` if any value is non-finite.
void check_finite(const Matrix& m, const std::string& where);

}  // namespace rrg
