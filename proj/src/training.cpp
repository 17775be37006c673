#include "rrg/training.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "rrg/checkpoint.hpp"
#include "rrg/image.hpp"
#include "rrg/layers.hpp"
#include "rrg/text.hpp"

namespace rrg {

int RunConfig::resolved_epochs() const {
  if (epochs > 0) return epochs;
  return decoder.kind == DecoderKind::bart ? 8 : 5;
}

void RunConfig::validate() const {
  if (resolved_epochs() < 1) throw std::invalid_argument("run config: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("run config: batch_size must be >= 1");
  if (learning_rate <= 0) throw std::invalid_argument("run config: learning_rate must be > 0");
  if (weight_decay < 0) throw std::invalid_argument("run config: weight_decay must be >= 0");
  if (max_len < 3) throw std::invalid_argument("run config: max_len must be >= 3");
  if (min_freq < 1) throw std::invalid_argument("run config: min_freq must be >= 1");
  if (grad_clip < 0) throw std::invalid_argument("run config: grad_clip must be >= 0");
  encoder.validate();
}

RunConfig desk_run_config(EncoderKind enc, DecoderKind dec) {
  RunConfig cfg;
  cfg.encoder = enc == EncoderKind::vit ? desk_vit_config() : desk_swin_config();
  cfg.decoder.kind = dec;
  cfg.decoder.model_dim = cfg.encoder.model_dim;
  cfg.decoder.max_len = cfg.max_len;
  cfg.name = std::string(enc == EncoderKind::vit ? "vit" : "swin") + "-" +
             (dec == DecoderKind::gpt2 ? "gpt2" : "bart");
  return cfg;
}

OptState OptState::init(const ParamStore& params) {
  OptState state;
  state.slots.reserve(params.entries().size());
  for (const auto& e : params.entries()) {
    state.slots.push_back({Matrix::Zero(e.value.rows(), e.value.cols()),
                           Matrix::Zero(e.value.rows(), e.value.cols())});
  }
  return state;
}

Model Model::build(const RunConfig& config, Vocab vocab) {
  config.validate();
  Model model{config, std::move(vocab), {}};
  model.config.decoder.vocab_size = model.vocab.size();
  model.config.decoder.max_len = model.config.max_len;
  model.config.decoder.validate();
  Rng rng(config.seed);
  init_encoder_params(model.config.encoder, model.params, "enc.", rng);
  init_decoder_params(model.config.decoder, model.params, "dec.", rng);
  return model;
}

double xent_loss(const std::vector<Matrix>& logits,
                 const std::vector<std::vector<int>>& targets, int pad_id) {
  if (logits.size() != targets.size()) {
    throw std::invalid_argument("xent_loss: logits/targets size mismatch");
  }
  double sum = 0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < logits.size(); ++s) {
    const Matrix& x = logits[s];
    const auto& tgt = targets[s];
    if (tgt.size() != static_cast<std::size_t>(x.rows())) {
      throw std::invalid_argument("xent_loss: target length mismatch at sequence " +
                                  std::to_string(s));
    }
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const int t = tgt[static_cast<std::size_t>(i)];
      if (t == pad_id) continue;
      if (t < 0 || t >= x.cols()) {
        throw std::out_of_range("xent_loss: target id " + std::to_string(t) + " out of range");
      }
      const double m = x.row(i).maxCoeff();
      sum += m + std::log((x.row(i).array() - m).exp().sum()) - x(i, t);
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("xent_loss: no supervised positions");
  return sum / static_cast<double>(count);
}

void adamw_step(ParamStore& params, OptState& state, double lr, double wd,
                bool skip_frozen_encoder, double grad_clip) {
  if (state.slots.size() != params.entries().size()) {
    throw std::invalid_argument("adamw_step: optimizer state does not match parameters");
  }
  for (const auto& e : params.entries()) {
    if (!e.grad.allFinite()) {
      throw std::runtime_error("adamw_step: non-finite gradient in parameter " + e.name);
    }
  }
  if (grad_clip > 0) {
    double norm_sq = 0;
    for (const auto& e : params.entries()) norm_sq += e.grad.squaredNorm();
    const double norm = std::sqrt(norm_sq);
    if (norm > grad_clip) {
      const double s = grad_clip / norm;
      for (auto& e : params.entries()) e.grad *= s;
    }
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  const double decay = 1.0 - lr * wd;
  for (std::size_t i = 0; i < params.entries().size(); ++i) {
    auto& e = params.entries()[i];
    if (skip_frozen_encoder && e.name.rfind("enc.", 0) == 0) continue;
    auto& slot = state.slots[i];
    slot.m = state.beta1 * slot.m + (1.0 - state.beta1) * e.grad;
    slot.v.array() = state.beta2 * slot.v.array() + (1.0 - state.beta2) * e.grad.array().square();
    // decoupled weight decay applied as a pure scale so the zero-gradient
    // step contracts parameters by exactly (1 - lr*wd)
    e.value *= decay;
    e.value.array() -=
        lr * (slot.m.array() / bc1) / ((slot.v.array() / bc2).sqrt() + state.eps);
  }
}

std::vector<TrainingExample> load_examples(const CorpusManifest& manifest, Split split,
                                           const Model& model) {
  const auto records = manifest.split_records(split);
  std::vector<TrainingExample> out;
  out.reserve(records.size());
  for (const auto* r : records) {
    TrainingExample ex;
    ex.image = load_image(manifest.image_path(*r), model.config.encoder.image_size,
                          model.config.encoder.channels);
    ex.tokens = encode(r->report_text, model.vocab, model.config.max_len);
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

// Next-token targets and the active (non-PAD target) mask for one sequence.
void shifted_targets(const TokenSequence& seq, std::vector<int>& targets,
                     std::vector<char>& active) {
  const std::size_t t = seq.ids.size();
  targets.assign(t, Vocab::kPad);
  active.assign(t, 0);
  for (std::size_t i = 0; i + 1 < t; ++i) {
    targets[i] = seq.ids[i + 1];
    active[i] = targets[i] != Vocab::kPad ? 1 : 0;
  }
}

}  // namespace

double batch_loss(Model& model, const std::vector<const TrainingExample*>& batch,
                  bool backward) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  double loss_sum = 0;
  std::size_t token_count = 0;
  std::vector<int> targets;
  std::vector<char> active;
  for (const auto* ex : batch) {
    shifted_targets(ex->tokens, targets, active);
    std::size_t n = 0;
    for (char a : active) n += a != 0;
    if (n == 0) continue;

    Tape tape;
    Var memory = encode_image(tape, ex->image, model.config.encoder, model.params, "enc.");
    Var logits = decoder_forward(tape, ex->tokens.ids, memory, model.config.decoder,
                                 model.params, "dec.");
    Var nll = cross_entropy_sum(logits, targets, active);
    loss_sum += nll.value()(0, 0);
    token_count += n;
    if (backward) tape.backward(nll);
  }
  if (token_count == 0) throw std::invalid_argument("batch_loss: no supervised positions");
  // gradients were accumulated for the sum; rescale to the token mean
  if (backward) model.params.scale_grads(1.0 / static_cast<double>(token_count));
  return loss_sum / static_cast<double>(token_count);
}

double train_epoch(Model& model, const std::vector<TrainingExample>& data, OptState& opt,
                   std::uint64_t shuffle_seed) {
  if (data.empty()) throw std::invalid_argument("train_epoch: no data");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(shuffle_seed);
  rng.shuffle(order);

  const std::size_t bs = static_cast<std::size_t>(model.config.batch_size);
  double loss_total = 0;
  std::size_t batches = 0;
  for (std::size_t at = 0; at < order.size(); at += bs) {
    std::vector<const TrainingExample*> batch;
    for (std::size_t i = at; i < std::min(at + bs, order.size()); ++i) {
      batch.push_back(&data[order[i]]);
    }
    model.params.zero_grads();
    double loss;
    try {
      loss = batch_loss(model, batch, true);
    } catch (const std::exception& e) {
      throw std::runtime_error("batch " + std::to_string(batches) + ": " + e.what());
    }
    adamw_step(model.params, opt, model.config.learning_rate, model.config.weight_decay,
               model.config.freeze_encoder, model.config.grad_clip);
    loss_total += loss;
    ++batches;
  }
  return loss_total / static_cast<double>(batches);
}

double eval_loss(Model& model, const std::vector<TrainingExample>& data) {
  if (data.empty()) throw std::invalid_argument("eval_loss: no data");
  const std::size_t bs = static_cast<std::size_t>(model.config.batch_size);
  double loss_total = 0;
  std::size_t batches = 0;
  for (std::size_t at = 0; at < data.size(); at += bs) {
    std::vector<const TrainingExample*> batch;
    for (std::size_t i = at; i < std::min(at + bs, data.size()); ++i) batch.push_back(&data[i]);
    loss_total += batch_loss(model, batch, false);
    ++batches;
  }
  return loss_total / static_cast<double>(batches);
}

RunResult fit(const RunConfig& config, const CorpusManifest& manifest,
              const std::filesystem::path& out_dir) {
  config.validate();
  const auto report = validate_manifest(manifest);
  if (!report.ok()) {
    std::string first = !report.missing_files.empty() ? report.missing_files.front()
                                                      : report.empty_reports.front();
    throw std::runtime_error("fit: manifest failed validation (first problem: " + first + ")");
  }
  std::filesystem::create_directories(out_dir);

  Model model = Model::build(config, build_vocab(manifest, config.min_freq));
  OptState opt = OptState::init(model.params);
  auto train_data = load_examples(manifest, Split::train, model);
  auto val_data = load_examples(manifest, Split::validation, model);

  RunResult result;
  double best_val = std::numeric_limits<double>::infinity();
  const int epochs = config.resolved_epochs();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double train = train_epoch(model, train_data, opt, config.seed + static_cast<std::uint64_t>(epoch));
    const double val = eval_loss(model, val_data);
    const auto seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    result.train_loss.push_back(train);
    result.val_loss.push_back(val);
    result.epoch_seconds.push_back(seconds);

    const auto ckpt = out_dir / ("epoch_" + std::to_string(epoch + 1) + ".ckpt");
    save_checkpoint(ckpt, model, epoch + 1, &opt);
    result.checkpoints.push_back(ckpt);
    if (val < best_val) {
      best_val = val;
      result.best_epoch = epoch + 1;
      result.best_checkpoint = out_dir / "best.ckpt";
      save_checkpoint(result.best_checkpoint, model, epoch + 1, &opt);
    }
  }
  return result;
}

std::string export_loss_curves(const RunResult& result) {
  if (result.train_loss.empty()) throw std::invalid_argument("export_loss_curves: empty result");
  std::ostringstream os;
  os << "epoch,train_loss,val_loss\n";
  for (std::size_t i = 0; i < result.train_loss.size(); ++i) {
    os << (i + 1) << ',' << format_double(result.train_loss[i]) << ','
       << format_double(result.val_loss[i]) << '\n';
  }
  return os.str();
}

std::vector<std::array<double, 3>> parse_loss_curves(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<std::array<double, 3>> rows;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (header) {
      if (line != "epoch,train_loss,val_loss") {
        throw std::runtime_error("loss curve CSV: unexpected header '" + line + "'");
      }
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::array<double, 3> row{};
    std::size_t at = 0;
    for (int f = 0; f < 3; ++f) {
      std::size_t end = f < 2 ? line.find(',', at) : line.size();
      if (end == std::string::npos) throw std::runtime_error("loss curve CSV: short row");
      row[static_cast<std::size_t>(f)] = parse_double(std::string_view(line).substr(at, end - at));
      at = end + 1;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace rrg
