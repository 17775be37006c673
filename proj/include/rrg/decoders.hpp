#pragma once

#include <string>
#include <vector>

#include "rrg/autodiff.hpp"
#include "rrg/encoders.hpp"
#include "rrg/vocab.hpp"

namespace rrg {

enum class DecoderKind { gpt2, bart };

// The two decoder styles share the block structure (causal self-attention,
// cross-attention over the visual memory, MLP); they differ in position
// encoding (learned absolute vs sinusoidal) and residual norm placement
// (pre-norm vs post-norm with a final layer norm).
struct DecoderConfig {
  DecoderKind kind = DecoderKind::gpt2;
  int vocab_size = 0;
  int model_dim = 64;
  int depth = 2;
  int num_heads = 4;
  int max_len = 60;
  double mlp_ratio = 4.0;

  void validate() const;
};

struct GenerationConfig {
  enum class Strategy { greedy, beam };
  Strategy strategy = Strategy::greedy;
  int beam_width = 1;
  int max_len = 60;
  bool fixed_length = true;

  void validate() const;
};

// Additive causal mask: 0 on and below the diagonal, -inf above.
Matrix causal_mask(int t);

Matrix sinusoidal_positions(int max_len, int dim);

void init_decoder_params(const DecoderConfig& cfg, ParamStore& store,
                         const std::string& prefix, Rng& rng);

// Teacher-forced forward over one token sequence; memory is the encoder
// output [S, model_dim]. Returns logits [T, vocab_size] with the output
// projection tied to the token embedding.
Var decoder_forward(Tape& tape, const std::vector<int>& token_ids, Var memory,
                    const DecoderConfig& cfg, ParamStore& store, const std::string& prefix,
                    AttnProbe* self_probe = nullptr, AttnProbe* cross_probe = nullptr);

// Batched value-only forward, one logits matrix per sequence.
std::vector<Matrix> decoder_forward_batch(const std::vector<TokenSequence>& batch,
                                          const std::vector<VisualMemory>& memories,
                                          const DecoderConfig& cfg, ParamStore& store,
                                          const std::string& prefix);

TokenSequence generate(const VisualMemory& memory, const DecoderConfig& cfg,
                       ParamStore& store, const std::string& prefix,
                       const GenerationConfig& gen);

}  // namespace rrg
