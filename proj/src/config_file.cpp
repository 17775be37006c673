#include "rrg/config_file.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rrg/text.hpp"

namespace rrg {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': not an integer: '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw std::runtime_error("config key '" + key + "': not a boolean: '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) out.push_back(to_int(key, trim(item)));
  if (out.empty()) throw std::runtime_error("config key '" + key + "': empty list");
  return out;
}

}  // namespace

ParsedConfig parse_config_text(const std::string& text) {
  ParsedConfig parsed;
  std::map<std::string, std::string>* current = &parsed.defaults;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": unterminated section header");
      }
      std::string header = trim(line.substr(1, line.size() - 2));
      std::string name = header;
      if (header.rfind("run", 0) == 0) name = trim(header.substr(3));
      if (name.empty()) name = "run" + std::to_string(parsed.sections.size() + 1);
      parsed.sections.emplace_back(name, std::map<std::string, std::string>{});
      current = &parsed.sections.back().second;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key=value, got '" + line + "'");
    }
    (*current)[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return parsed;
}

ParsedConfig parse_config_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config file: " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

RunConfig run_config_from_keys(const std::string& name,
                               const std::map<std::string, std::string>& keys) {
  RunConfig cfg;
  cfg.name = name;
  auto get = [&](const char* key) -> const std::string* {
    auto it = keys.find(key);
    return it == keys.end() ? nullptr : &it->second;
  };

  if (const auto* v = get("encoder")) {
    if (*v == "vit") cfg.encoder = desk_vit_config();
    else if (*v == "swin") cfg.encoder = desk_swin_config();
    else throw std::runtime_error("config: encoder must be vit or swin, got '" + *v + "'");
  }
  if (const auto* v = get("decoder")) {
    if (*v == "gpt2") cfg.decoder.kind = DecoderKind::gpt2;
    else if (*v == "bart") cfg.decoder.kind = DecoderKind::bart;
    else throw std::runtime_error("config: decoder must be gpt2 or bart, got '" + *v + "'");
  }
  if (const auto* v = get("epochs")) cfg.epochs = to_int("epochs", *v);
  if (const auto* v = get("batch_size")) cfg.batch_size = to_int("batch_size", *v);
  if (const auto* v = get("learning_rate")) cfg.learning_rate = parse_double(*v);
  if (const auto* v = get("weight_decay")) cfg.weight_decay = parse_double(*v);
  if (const auto* v = get("seed")) cfg.seed = static_cast<std::uint64_t>(to_int("seed", *v));
  if (const auto* v = get("max_len")) cfg.max_len = to_int("max_len", *v);
  if (const auto* v = get("min_freq")) cfg.min_freq = to_int("min_freq", *v);
  if (const auto* v = get("freeze_encoder")) cfg.freeze_encoder = to_bool("freeze_encoder", *v);
  if (const auto* v = get("grad_clip")) cfg.grad_clip = parse_double(*v);

  if (const auto* v = get("image_size")) cfg.encoder.image_size = to_int("image_size", *v);
  if (const auto* v = get("patch_size")) cfg.encoder.patch_size = to_int("patch_size", *v);
  if (const auto* v = get("channels")) cfg.encoder.channels = to_int("channels", *v);
  if (const auto* v = get("embed_dim")) cfg.encoder.embed_dim = to_int("embed_dim", *v);
  if (const auto* v = get("encoder_depths")) cfg.encoder.depths = to_int_list("encoder_depths", *v);
  if (const auto* v = get("encoder_heads")) cfg.encoder.num_heads = to_int("encoder_heads", *v);
  if (const auto* v = get("window_size")) cfg.encoder.window_size = to_int("window_size", *v);
  if (const auto* v = get("mlp_ratio")) {
    cfg.encoder.mlp_ratio = parse_double(*v);
    cfg.decoder.mlp_ratio = cfg.encoder.mlp_ratio;
  }
  if (const auto* v = get("model_dim")) {
    cfg.encoder.model_dim = to_int("model_dim", *v);
    cfg.decoder.model_dim = cfg.encoder.model_dim;
  }
  if (const auto* v = get("relative_bias")) cfg.encoder.relative_bias = to_bool("relative_bias", *v);
  if (const auto* v = get("decoder_depth")) cfg.decoder.depth = to_int("decoder_depth", *v);
  if (const auto* v = get("decoder_heads")) cfg.decoder.num_heads = to_int("decoder_heads", *v);

  cfg.decoder.model_dim = cfg.encoder.model_dim;
  cfg.decoder.max_len = cfg.max_len;
  return cfg;
}

ExperimentSpec experiment_from_config(const ParsedConfig& parsed) {
  ExperimentSpec spec;
  if (parsed.sections.empty()) {
    spec.runs.push_back(run_config_from_keys("run", parsed.defaults));
    return spec;
  }
  for (const auto& [name, keys] : parsed.sections) {
    std::map<std::string, std::string> merged = parsed.defaults;
    for (const auto& [k, v] : keys) merged[k] = v;
    spec.runs.push_back(run_config_from_keys(name, merged));
  }
  return spec;
}

ExperimentSpec default_experiment() {
  ExperimentSpec spec;
  spec.runs = {desk_run_config(EncoderKind::vit, DecoderKind::gpt2),
               desk_run_config(EncoderKind::vit, DecoderKind::bart),
               desk_run_config(EncoderKind::swin, DecoderKind::bart),
               desk_run_config(EncoderKind::swin, DecoderKind::gpt2)};
  return spec;
}

}  // namespace rrg
