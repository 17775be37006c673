#include "rrg/decoders.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rrg/layers.hpp"

namespace rrg {

void DecoderConfig::validate() const {
  if (vocab_size < 5) throw std::invalid_argument("decoder config: vocab_size must cover the specials");
  if (model_dim <= 0 || num_heads <= 0 || model_dim % num_heads != 0) {
    throw std::invalid_argument("decoder config: model_dim must be a positive multiple of num_heads");
  }
  if (depth < 1) throw std::invalid_argument("decoder config: depth must be >= 1");
  if (max_len < 3) throw std::invalid_argument("decoder config: max_len must be >= 3");
  if (mlp_ratio <= 0) throw std::invalid_argument("decoder config: mlp_ratio must be positive");
}

void GenerationConfig::validate() const {
  if (max_len < 3) throw std::invalid_argument("generation config: max_len must be >= 3");
  if (beam_width < 1) throw std::invalid_argument("generation config: beam_width must be >= 1");
  if (strategy == Strategy::greedy && beam_width != 1) {
    throw std::invalid_argument("generation config: greedy requires beam_width 1");
  }
}

Matrix causal_mask(int t) {
  if (t < 1) throw std::invalid_argument("causal_mask: size must be >= 1");
  const double ninf = -std::numeric_limits<double>::infinity();
  Matrix m = Matrix::Zero(t, t);
  for (int i = 0; i < t; ++i) {
    for (int j = i + 1; j < t; ++j) m(i, j) = ninf;
  }
  return m;
}

Matrix sinusoidal_positions(int max_len, int dim) {
  Matrix pos(max_len, dim);
  for (int p = 0; p < max_len; ++p) {
    for (int i = 0; i < dim; ++i) {
      const double angle = p * std::exp(-std::log(10000.0) * (2 * (i / 2)) / dim);
      pos(p, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pos;
}

void init_decoder_params(const DecoderConfig& cfg, ParamStore& store,
                         const std::string& prefix, Rng& rng) {
  cfg.validate();
  fill_trunc_normal(store.add(prefix + "wte", cfg.vocab_size, cfg.model_dim).value, rng);
  if (cfg.kind == DecoderKind::gpt2) {
    fill_trunc_normal(store.add(prefix + "wpe", cfg.max_len, cfg.model_dim).value, rng);
  }
  for (int i = 0; i < cfg.depth; ++i) {
    const std::string blk = prefix + "blk" + std::to_string(i);
    init_layer_norm(store, blk + ".ln1", cfg.model_dim);
    init_attention(store, blk + ".self", cfg.model_dim, rng);
    init_layer_norm(store, blk + ".ln2", cfg.model_dim);
    init_attention(store, blk + ".cross", cfg.model_dim, rng);
    init_layer_norm(store, blk + ".ln3", cfg.model_dim);
    init_mlp(store, blk + ".mlp", cfg.model_dim, cfg.mlp_ratio, rng);
  }
  init_layer_norm(store, prefix + "lnf", cfg.model_dim);
}

Var decoder_forward(Tape& tape, const std::vector<int>& token_ids, Var memory,
                    const DecoderConfig& cfg, ParamStore& store, const std::string& prefix,
                    AttnProbe* self_probe, AttnProbe* cross_probe) {
  cfg.validate();
  const int t = static_cast<int>(token_ids.size());
  if (t < 1) throw std::invalid_argument("decoder_forward: empty token sequence");
  if (t > cfg.max_len) {
    throw std::invalid_argument("decoder_forward: sequence length " + std::to_string(t) +
                                " exceeds max_len " + std::to_string(cfg.max_len));
  }
  if (memory.value().cols() != cfg.model_dim) {
    throw std::invalid_argument("decoder_forward: memory dim " +
                                std::to_string(memory.value().cols()) + " != model_dim " +
                                std::to_string(cfg.model_dim));
  }
  for (int id : token_ids) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw std::out_of_range("decoder_forward: token id " + std::to_string(id) +
                              " out of range for vocab " + std::to_string(cfg.vocab_size));
    }
  }

  Var wte = tape.leaf(store.at(prefix + "wte"));
  Var x = gather_rows(wte, token_ids);
  if (cfg.kind == DecoderKind::gpt2) {
    std::vector<int> positions(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) positions[static_cast<std::size_t>(i)] = i;
    x = add(x, gather_rows(tape.leaf(store.at(prefix + "wpe")), positions));
  } else {
    x = add_const(x, sinusoidal_positions(cfg.max_len, cfg.model_dim).topRows(t));
  }

  const Matrix mask = causal_mask(t);
  const bool pre_norm = cfg.kind == DecoderKind::gpt2;
  for (int i = 0; i < cfg.depth; ++i) {
    const std::string blk = prefix + "blk" + std::to_string(i);
    if (pre_norm) {
      Var h = layer_norm(tape, x, store, blk + ".ln1");
      x = add(x, multi_head_attention(tape, h, h, store, blk + ".self", cfg.num_heads,
                                      &mask, nullptr, self_probe));
      Var h2 = layer_norm(tape, x, store, blk + ".ln2");
      x = add(x, multi_head_attention(tape, h2, memory, store, blk + ".cross",
                                      cfg.num_heads, nullptr, nullptr, cross_probe));
      Var h3 = layer_norm(tape, x, store, blk + ".ln3");
      x = add(x, mlp_block(tape, h3, store, blk + ".mlp"));
    } else {
      x = add(x, multi_head_attention(tape, x, x, store, blk + ".self", cfg.num_heads,
                                      &mask, nullptr, self_probe));
      x = layer_norm(tape, x, store, blk + ".ln1");
      x = add(x, multi_head_attention(tape, x, memory, store, blk + ".cross",
                                      cfg.num_heads, nullptr, nullptr, cross_probe));
      x = layer_norm(tape, x, store, blk + ".ln2");
      x = add(x, mlp_block(tape, x, store, blk + ".mlp"));
      x = layer_norm(tape, x, store, blk + ".ln3");
    }
    check_finite(x.value(), "decoder block " + std::to_string(i));
  }
  x = layer_norm(tape, x, store, prefix + "lnf");
  // output projection tied to the embedding table
  return matmul(x, wte, false, true);
}

std::vector<Matrix> decoder_forward_batch(const std::vector<TokenSequence>& batch,
                                          const std::vector<VisualMemory>& memories,
                                          const DecoderConfig& cfg, ParamStore& store,
                                          const std::string& prefix) {
  if (batch.size() != memories.size()) {
    throw std::invalid_argument("decoder_forward_batch: batch/memory size mismatch");
  }
  std::vector<Matrix> logits;
  logits.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tape tape;
    Var memory = tape.constant(memories[i]);
    logits.push_back(
        decoder_forward(tape, batch[i].ids, memory, cfg, store, prefix).value());
  }
  return logits;
}

namespace {

// Log-softmax of the final logits row for the given prefix of tokens.
Eigen::VectorXd next_token_logprobs(const std::vector<int>& prefix_ids,
                                    const VisualMemory& memory, const DecoderConfig& cfg,
                                    ParamStore& store, const std::string& prefix) {
  Tape tape;
  Var mem = tape.constant(memory);
  const Matrix logits = decoder_forward(tape, prefix_ids, mem, cfg, store, prefix).value();
  const Eigen::Index last = logits.rows() - 1;
  const double m = logits.row(last).maxCoeff();
  const double lse = m + std::log((logits.row(last).array() - m).exp().sum());
  return (logits.row(last).array() - lse).transpose();
}

int argmax_lowest_id(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;  // strict: ties keep the lowest id
  }
  return best;
}

TokenSequence finish_sequence(std::vector<int> ids, int max_len) {
  if (static_cast<int>(ids.size()) > max_len) ids.resize(static_cast<std::size_t>(max_len));
  if (ids.back() != Vocab::kEos) {
    if (static_cast<int>(ids.size()) == max_len) ids.back() = Vocab::kEos;
    else ids.push_back(Vocab::kEos);
  }
  TokenSequence seq;
  seq.true_length = static_cast<int>(ids.size());
  ids.resize(static_cast<std::size_t>(max_len), Vocab::kPad);
  seq.ids = std::move(ids);
  return seq;
}

}  // namespace

TokenSequence generate(const VisualMemory& memory, const DecoderConfig& cfg,
                       ParamStore& store, const std::string& prefix,
                       const GenerationConfig& gen) {
  gen.validate();
  if (gen.max_len > cfg.max_len) {
    throw std::invalid_argument("generate: gen.max_len " + std::to_string(gen.max_len) +
                                " exceeds decoder max_len " + std::to_string(cfg.max_len));
  }

  if (gen.strategy == GenerationConfig::Strategy::greedy) {
    std::vector<int> ids = {Vocab::kBos};
    while (static_cast<int>(ids.size()) < gen.max_len) {
      const bool last_slot = static_cast<int>(ids.size()) == gen.max_len - 1;
      if (gen.fixed_length && last_slot) {
        ids.push_back(Vocab::kEos);
        break;
      }
      if (!gen.fixed_length && last_slot) {
        ids.push_back(Vocab::kEos);  // out of room: terminate
        break;
      }
      const auto logprobs = next_token_logprobs(ids, memory, cfg, store, prefix);
      const int next = argmax_lowest_id(logprobs);
      ids.push_back(next);
      if (!gen.fixed_length && next == Vocab::kEos) break;
    }
    return finish_sequence(std::move(ids), gen.max_len);
  }

  // beam search, ranked by length-normalized log-probability
  struct Hypothesis {
    std::vector<int> ids;
    double logprob = 0;
    bool done = false;
    double score() const {
      return logprob / static_cast<double>(std::max<std::size_t>(ids.size() - 1, 1));
    }
  };
  std::vector<Hypothesis> beams = {{{Vocab::kBos}, 0.0, false}};
  for (int step = 1; step < gen.max_len; ++step) {
    const bool last_slot = step == gen.max_len - 1;
    std::vector<Hypothesis> candidates;
    for (const auto& hyp : beams) {
      if (hyp.done) {
        candidates.push_back(hyp);
        continue;
      }
      if (gen.fixed_length && last_slot) {
        Hypothesis ext = hyp;
        ext.ids.push_back(Vocab::kEos);
        ext.done = true;
        candidates.push_back(std::move(ext));
        continue;
      }
      const auto logprobs = next_token_logprobs(hyp.ids, memory, cfg, store, prefix);
      if (!gen.fixed_length && last_slot) {
        // only termination fits in the remaining slot
        Hypothesis ext = hyp;
        ext.ids.push_back(Vocab::kEos);
        ext.logprob += logprobs(Vocab::kEos);
        ext.done = true;
        candidates.push_back(std::move(ext));
        continue;
      }
      for (int tok = 0; tok < logprobs.size(); ++tok) {
        Hypothesis ext = hyp;
        ext.ids.push_back(tok);
        ext.logprob += logprobs(tok);
        if (!gen.fixed_length && tok == Vocab::kEos) ext.done = true;
        candidates.push_back(std::move(ext));
      }
    }
    // deterministic order: score desc, then shorter, then lexicographic ids
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
      if (a.score() != b.score()) return a.score() > b.score();
      if (a.ids.size() != b.ids.size()) return a.ids.size() < b.ids.size();
      return a.ids < b.ids;
    });
    if (candidates.size() > static_cast<std::size_t>(gen.beam_width)) {
      candidates.resize(static_cast<std::size_t>(gen.beam_width));
    }
    beams = std::move(candidates);
    if (std::all_of(beams.begin(), beams.end(), [](const auto& h) { return h.done; })) break;
  }
  return finish_sequence(std::move(beams.front().ids), gen.max_len);
}

}  // namespace rrg
