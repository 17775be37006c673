#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "rrg/autodiff.hpp"
#include "rrg/corpus.hpp"
#include "rrg/decoders.hpp"
#include "rrg/encoders.hpp"
#include "rrg/vocab.hpp"

namespace rrg {

// Full training recipe for one encoder-decoder combination.
struct RunConfig {
  std::string name = "run";
  EncoderConfig encoder;
  DecoderConfig decoder;
  int epochs = 0;  // 0 = per-decoder default: 5 for gpt2, 8 for bart
  int batch_size = 8;
  double learning_rate = 5e-5;
  double weight_decay = 0.01;
  std::uint64_t seed = 42;
  int max_len = 60;
  int min_freq = 1;
  bool freeze_encoder = false;
  double grad_clip = 0.0;  // 0 = off; otherwise global-norm clip

  int resolved_epochs() const;
  void validate() const;
};

RunConfig desk_run_config(EncoderKind enc, DecoderKind dec);

// AdamW state: first/second moments per parameter plus the shared step count.
struct OptState {
  struct Slot {
    Matrix m, v;
  };
  std::vector<Slot> slots;  // parallel to ParamStore::entries()
  long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  static OptState init(const ParamStore& params);
};

struct RunResult {
  std::vector<double> train_loss;   // one entry per epoch
  std::vector<double> val_loss;
  std::vector<double> epoch_seconds;
  int best_epoch = -1;              // lowest validation loss
  std::filesystem::path best_checkpoint;
  std::vector<std::filesystem::path> checkpoints;
};

// The trained model bundle: parameters plus everything needed to run them.
struct Model {
  RunConfig config;
  Vocab vocab;
  ParamStore params;

  static Model build(const RunConfig& config, Vocab vocab);
};

// Mean negative log-likelihood over non-PAD target positions, computed from
// plain logits (no tape). Targets are inputs shifted left by one.
double xent_loss(const std::vector<Matrix>& logits,
                 const std::vector<std::vector<int>>& targets, int pad_id);

// One decoupled-weight-decay Adam step over all parameters. With zero
// gradients and wd > 0 every parameter scales by exactly (1 - lr*wd).
void adamw_step(ParamStore& params, OptState& state, double lr, double wd,
                bool skip_frozen_encoder = false, double grad_clip = 0.0);

// Preloaded training example: image already resized and normalized.
struct TrainingExample {
  ImageTensor image;
  TokenSequence tokens;
};

std::vector<TrainingExample> load_examples(const CorpusManifest& manifest, Split split,
                                           const Model& model);

// Forward + loss for one batch; gradients accumulate into model.params when
// `backward` is set. Returns token-weighted mean NLL over the batch.
double batch_loss(Model& model, const std::vector<const TrainingExample*>& batch,
                  bool backward);

double train_epoch(Model& model, const std::vector<TrainingExample>& data, OptState& opt,
                   std::uint64_t shuffle_seed);

double eval_loss(Model& model, const std::vector<TrainingExample>& data);

RunResult fit(const RunConfig& config, const CorpusManifest& manifest,
              const std::filesystem::path& out_dir);

std::string export_loss_curves(const RunResult& result);  // CSV epoch,train_loss,val_loss
std::vector<std::array<double, 3>> parse_loss_curves(const std::string& csv);

}  // namespace rrg
