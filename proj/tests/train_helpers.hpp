#pragma once

// Tiny end-to-end model fixtures shared by the training unit tests and the
// acceptance suite: pairing configs under 5k parameters, deterministic
// synthetic inputs, a finite-difference probe and a one-pair overfit run.

#include <cmath>
#include <string>
#include <vector>

#include "rrg/training.hpp"

namespace trainfix {

inline rrg::RunConfig tiny_run(rrg::EncoderKind enc, rrg::DecoderKind dec,
                               std::uint64_t seed = 7, int dim = 8) {
  rrg::RunConfig cfg;
  cfg.encoder.kind = enc;
  if (enc == rrg::EncoderKind::vit) {
    cfg.encoder.image_size = 8;
    cfg.encoder.patch_size = 4;
    cfg.encoder.depths = {1};
  } else {
    cfg.encoder.image_size = 8;
    cfg.encoder.patch_size = 2;
    cfg.encoder.depths = {2};
    cfg.encoder.window_size = 2;
  }
  cfg.encoder.embed_dim = dim;
  cfg.encoder.num_heads = 2;
  cfg.encoder.model_dim = dim;
  cfg.encoder.mlp_ratio = 2.0;
  cfg.decoder.kind = dec;
  cfg.decoder.model_dim = dim;
  cfg.decoder.depth = 1;
  cfg.decoder.num_heads = 2;
  cfg.decoder.mlp_ratio = 2.0;
  cfg.max_len = 8;
  cfg.decoder.max_len = 8;
  cfg.batch_size = 1;
  cfg.seed = seed;
  cfg.name = std::string(enc == rrg::EncoderKind::vit ? "vit" : "swin") + "-" +
             (dec == rrg::DecoderKind::gpt2 ? "gpt2" : "bart");
  return cfg;
}

inline rrg::ImageTensor synth_image(int side, std::uint64_t seed) {
  rrg::Rng rng(seed);
  rrg::ImageTensor img = rrg::ImageTensor::zero(1, side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) img.planes[0](y, x) = rng.uniform();
  }
  return img;
}

inline rrg::Vocab tiny_vocab() {
  rrg::CorpusManifest m;
  m.root = ".";
  m.records.push_back({"s0", "x.png", "the heart is normal", rrg::Split::train});
  m.records.push_back({"s1", "x.png", "no acute disease seen today", rrg::Split::train});
  m.records.push_back({"s2", "x.png", "lungs are clear", rrg::Split::train});
  return rrg::build_vocab(m, 1);
}

struct TinyModel {
  rrg::Model model;
  rrg::TrainingExample example;
};

inline TinyModel tiny_model(rrg::EncoderKind enc, rrg::DecoderKind dec,
                            const std::string& report = "the heart is normal",
                            std::uint64_t seed = 7, int dim = 8) {
  const rrg::RunConfig cfg = tiny_run(enc, dec, seed, dim);
  rrg::Model model = rrg::Model::build(cfg, tiny_vocab());
  rrg::TrainingExample ex;
  ex.image = synth_image(cfg.encoder.image_size, seed + 1);
  ex.tokens = rrg::encode(report, model.vocab, cfg.max_len);
  return {std::move(model), std::move(ex)};
}

// Token-mean NLL of the model on one example, forward only.
inline double forward_loss(rrg::Model& model, const rrg::TrainingExample& ex) {
  return rrg::batch_loss(model, {&ex}, false);
}

struct GradCheckResult {
  double max_rel_err = 0;
  int probes = 0;
};

// Analytic gradient of the token-mean NLL versus central finite differences
// on `probes` randomly chosen parameters. Relative error uses a floored
// denominator so near-zero gradients compare by absolute difference.
inline GradCheckResult gradient_check(rrg::Model& model, const rrg::TrainingExample& ex,
                                      int probes, double h = 1e-5,
                                      std::uint64_t seed = 99) {
  model.params.zero_grads();
  (void)rrg::batch_loss(model, {&ex}, true);

  rrg::Rng rng(seed);
  GradCheckResult result;
  auto& entries = model.params.entries();
  for (int p = 0; p < probes; ++p) {
    auto& entry = entries[rng.next_u64() % entries.size()];
    const Eigen::Index flat =
        static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(entry.value.size()));
    const Eigen::Index i = flat / entry.value.cols();
    const Eigen::Index j = flat % entry.value.cols();

    const double saved = entry.value(i, j);
    entry.value(i, j) = saved + h;
    const double up = forward_loss(model, ex);
    entry.value(i, j) = saved - h;
    const double down = forward_loss(model, ex);
    entry.value(i, j) = saved;

    const double numeric = (up - down) / (2 * h);
    const double analytic = entry.grad(i, j);
    const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
    result.max_rel_err = std::max(result.max_rel_err, std::abs(numeric - analytic) / denom);
    ++result.probes;
  }
  return result;
}

struct OverfitResult {
  double final_loss = 0;
  std::string generated;
};

// Up to `max_steps` single-example AdamW steps; returns the final loss and
// the greedy decode (stop at EOS) of the trained model.
inline OverfitResult overfit_single_pair(rrg::EncoderKind enc, rrg::DecoderKind dec,
                                         int max_steps = 300, double lr = 1e-3,
                                         const std::string& report = "the heart is normal") {
  TinyModel fix = tiny_model(enc, dec, report, 7, 32);
  fix.model.config.learning_rate = lr;
  fix.model.config.weight_decay = 0.01;
  rrg::OptState opt = rrg::OptState::init(fix.model.params);
  for (int step = 0; step < max_steps; ++step) {
    fix.model.params.zero_grads();
    (void)rrg::batch_loss(fix.model, {&fix.example}, true);
    rrg::adamw_step(fix.model.params, opt, fix.model.config.learning_rate,
                    fix.model.config.weight_decay);
  }
  OverfitResult result;
  result.final_loss = forward_loss(fix.model, fix.example);

  const rrg::VisualMemory memory = rrg::encode_image_value(
      fix.example.image, fix.model.config.encoder, fix.model.params, "enc.");
  rrg::GenerationConfig gen;
  gen.max_len = fix.model.config.max_len;
  gen.fixed_length = false;
  const rrg::TokenSequence seq =
      rrg::generate(memory, fix.model.config.decoder, fix.model.params, "dec.", gen);
  result.generated = rrg::decode(seq.ids, fix.model.vocab);
  return result;
}

}  // namespace trainfix
