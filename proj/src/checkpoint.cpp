#include "rrg/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace rrg {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'R', 'R', 'G', 'C', 'K', 'P', 'T', '\0'};

json encoder_config_json(const EncoderConfig& cfg) {
  return {{"kind", cfg.kind == EncoderKind::vit ? "vit" : "swin"},
          {"image_size", cfg.image_size},
          {"patch_size", cfg.patch_size},
          {"channels", cfg.channels},
          {"embed_dim", cfg.embed_dim},
          {"depths", cfg.depths},
          {"num_heads", cfg.num_heads},
          {"window_size", cfg.window_size},
          {"mlp_ratio", cfg.mlp_ratio},
          {"model_dim", cfg.model_dim},
          {"relative_bias", cfg.relative_bias}};
}

EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig cfg;
  cfg.kind = j.at("kind").get<std::string>() == "vit" ? EncoderKind::vit : EncoderKind::swin;
  cfg.image_size = j.at("image_size").get<int>();
  cfg.patch_size = j.at("patch_size").get<int>();
  cfg.channels = j.at("channels").get<int>();
  cfg.embed_dim = j.at("embed_dim").get<int>();
  cfg.depths = j.at("depths").get<std::vector<int>>();
  cfg.num_heads = j.at("num_heads").get<int>();
  cfg.window_size = j.at("window_size").get<int>();
  cfg.mlp_ratio = j.at("mlp_ratio").get<double>();
  cfg.model_dim = j.at("model_dim").get<int>();
  cfg.relative_bias = j.at("relative_bias").get<bool>();
  return cfg;
}

json run_config_json(const RunConfig& cfg) {
  return {{"name", cfg.name},
          {"encoder", encoder_config_json(cfg.encoder)},
          {"decoder",
           {{"kind", cfg.decoder.kind == DecoderKind::gpt2 ? "gpt2" : "bart"},
            {"vocab_size", cfg.decoder.vocab_size},
            {"model_dim", cfg.decoder.model_dim},
            {"depth", cfg.decoder.depth},
            {"num_heads", cfg.decoder.num_heads},
            {"max_len", cfg.decoder.max_len},
            {"mlp_ratio", cfg.decoder.mlp_ratio}}},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate},
          {"weight_decay", cfg.weight_decay},
          {"seed", cfg.seed},
          {"max_len", cfg.max_len},
          {"min_freq", cfg.min_freq},
          {"freeze_encoder", cfg.freeze_encoder},
          {"grad_clip", cfg.grad_clip}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  cfg.name = j.at("name").get<std::string>();
  cfg.encoder = encoder_config_from_json(j.at("encoder"));
  const json& d = j.at("decoder");
  cfg.decoder.kind = d.at("kind").get<std::string>() == "gpt2" ? DecoderKind::gpt2
                                                               : DecoderKind::bart;
  cfg.decoder.vocab_size = d.at("vocab_size").get<int>();
  cfg.decoder.model_dim = d.at("model_dim").get<int>();
  cfg.decoder.depth = d.at("depth").get<int>();
  cfg.decoder.num_heads = d.at("num_heads").get<int>();
  cfg.decoder.max_len = d.at("max_len").get<int>();
  cfg.decoder.mlp_ratio = d.at("mlp_ratio").get<double>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.weight_decay = j.at("weight_decay").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.max_len = j.at("max_len").get<int>();
  cfg.min_freq = j.at("min_freq").get<int>();
  cfg.freeze_encoder = j.at("freeze_encoder").get<bool>();
  cfg.grad_clip = j.at("grad_clip").get<double>();
  return cfg;
}

void write_matrix(std::ofstream& out, const Matrix& m) {
  // row-major doubles, little-endian host assumed
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
}

void read_matrix(std::ifstream& in, Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      double v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      m(i, j) = v;
    }
  }
  if (!in) throw std::runtime_error("checkpoint: truncated array data");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& file, const Model& model, int epoch,
                     const OptState* opt) {
  json header;
  header["version"] = kCheckpointVersion;
  header["run_config"] = run_config_json(model.config);
  header["vocab"] = model.vocab.tokens();
  header["epoch"] = epoch;
  header["dtype"] = "f64";
  json params = json::array();
  for (const auto& e : model.params.entries()) {
    params.push_back({{"name", e.name}, {"rows", e.value.rows()}, {"cols", e.value.cols()}});
  }
  header["params"] = std::move(params);
  header["has_opt_state"] = opt != nullptr;
  if (opt) {
    header["opt"] = {{"t", opt->t}, {"beta1", opt->beta1}, {"beta2", opt->beta2},
                     {"eps", opt->eps}};
  }
  const std::string header_bytes = header.dump();

  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + file.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t len = header_bytes.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
  for (const auto& e : model.params.entries()) write_matrix(out, e.value);
  if (opt) {
    for (const auto& slot : opt->slots) {
      write_matrix(out, slot.m);
      write_matrix(out, slot.v);
    }
  }
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + file.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(file.string() + ": not a checkpoint file");
  }
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kCheckpointVersion) {
    throw std::runtime_error(file.string() + ": checkpoint version " +
                             std::to_string(version) + " unsupported (expected " +
                             std::to_string(kCheckpointVersion) + ")");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header_bytes(len, '\0');
  in.read(header_bytes.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error(file.string() + ": truncated header");
  const json header = json::parse(header_bytes);
  if (header.at("version").get<std::uint32_t>() != kCheckpointVersion) {
    throw std::runtime_error(file.string() + ": header/container version mismatch");
  }

  LoadedCheckpoint loaded{
      Model::build(run_config_from_json(header.at("run_config")),
                   Vocab(header.at("vocab").get<std::vector<std::string>>())),
      header.at("epoch").get<int>(),
      std::nullopt};

  const json& params = header.at("params");
  if (params.size() != loaded.model.params.entries().size()) {
    throw std::runtime_error(file.string() + ": parameter count mismatch (" +
                             std::to_string(params.size()) + " in file, " +
                             std::to_string(loaded.model.params.entries().size()) +
                             " expected)");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& e = loaded.model.params.entries()[i];
    const json& p = params[i];
    if (p.at("name").get<std::string>() != e.name ||
        p.at("rows").get<Eigen::Index>() != e.value.rows() ||
        p.at("cols").get<Eigen::Index>() != e.value.cols()) {
      throw std::runtime_error(file.string() + ": shape mismatch for parameter " + e.name);
    }
    read_matrix(in, e.value);
  }
  if (header.at("has_opt_state").get<bool>()) {
    OptState opt = OptState::init(loaded.model.params);
    opt.t = header.at("opt").at("t").get<long>();
    opt.beta1 = header.at("opt").at("beta1").get<double>();
    opt.beta2 = header.at("opt").at("beta2").get<double>();
    opt.eps = header.at("opt").at("eps").get<double>();
    for (auto& slot : opt.slots) {
      read_matrix(in, slot.m);
      read_matrix(in, slot.v);
    }
    loaded.opt = std::move(opt);
  }
  return loaded;
}

}  // namespace rrg
