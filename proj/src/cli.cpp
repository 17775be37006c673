#include "rrg/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "rrg/checkpoint.hpp"
#include "rrg/config_file.hpp"
#include "rrg/corpus.hpp"
#include "rrg/metrics.hpp"
#include "rrg/plot.hpp"
#include "rrg/text.hpp"
#include "rrg/training.hpp"

namespace rrg {

namespace {

void write_file(const std::filesystem::path& file, const std::string& content) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << content;
}

std::map<std::string, std::string> read_tsv_pairs(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(file.string() + ": line " + std::to_string(line_no) +
                               ": expected id<TAB>text");
    }
    out[line.substr(0, tab)] = unescape_tsv(line.substr(tab + 1));
  }
  if (out.empty()) throw std::runtime_error(file.string() + ": no rows");
  return out;
}

std::string tsv_pairs_text(const std::map<std::string, std::string>& pairs) {
  std::string out;
  for (const auto& [id, text] : pairs) {
    out += id;
    out += '\t';
    out += escape_tsv(text);
    out += '\n';
  }
  return out;
}

// Flags shared by train/compare that override config-file values.
struct Overrides {
  std::optional<int> epochs, batch_size, max_len;
  std::optional<double> lr, weight_decay;
  std::optional<std::uint64_t> seed;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--epochs", epochs, "override epochs");
    cmd->add_option("--batch-size", batch_size, "override batch size");
    cmd->add_option("--max-len", max_len, "override max sequence length");
    cmd->add_option("--lr", lr, "override learning rate");
    cmd->add_option("--weight-decay", weight_decay, "override weight decay");
    cmd->add_option("--seed", seed, "override RNG seed");
  }
  void apply(RunConfig& cfg) const {
    if (epochs) cfg.epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (max_len) {
      cfg.max_len = *max_len;
      cfg.decoder.max_len = *max_len;
    }
    if (lr) cfg.learning_rate = *lr;
    if (weight_decay) cfg.weight_decay = *weight_decay;
    if (seed) cfg.seed = *seed;
  }
};

CorpusManifest load_data(const std::string& data_root, const std::string& manifest_name) {
  const std::filesystem::path root(data_root);
  return load_manifest(root, root / manifest_name);
}

ExperimentSpec load_experiment(const std::string& config_path, const Overrides& over) {
  ExperimentSpec spec = config_path.empty()
                            ? default_experiment()
                            : experiment_from_config(parse_config_file(config_path));
  for (auto& run : spec.runs) over.apply(run);
  return spec;
}

std::map<std::string, std::string> generate_split_predictions(Model& model,
                                                              const CorpusManifest& manifest,
                                                              Split split,
                                                              const GenerationConfig& gen) {
  std::map<std::string, std::string> preds;
  for (const auto* rec : manifest.split_records(split)) {
    const ImageTensor image = load_image(manifest.image_path(*rec),
                                         model.config.encoder.image_size,
                                         model.config.encoder.channels);
    const VisualMemory memory =
        encode_image_value(image, model.config.encoder, model.params, "enc.");
    const TokenSequence seq = generate(memory, model.config.decoder, model.params, "dec.", gen);
    preds[rec->study_id] = decode(seq.ids, model.vocab);
  }
  return preds;
}

GenerationConfig make_gen_config(const Model& model, int beam, bool fixed_length,
                                 std::optional<int> max_len) {
  GenerationConfig gen;
  gen.strategy = beam > 1 ? GenerationConfig::Strategy::beam : GenerationConfig::Strategy::greedy;
  gen.beam_width = beam;
  gen.max_len = max_len.value_or(model.config.max_len);
  gen.fixed_length = fixed_length;
  return gen;
}

// One fit + loss-curve artifacts under out_dir/<run name>.
RunResult run_training(const RunConfig& cfg, const CorpusManifest& manifest,
                       const std::filesystem::path& out_dir) {
  const auto run_dir = out_dir / cfg.name;
  const RunResult result = fit(cfg, manifest, run_dir);
  const std::string csv = export_loss_curves(result);
  write_file(run_dir / "loss.csv", csv);
  render_loss_curves(parse_loss_curves(csv), cfg.name + " train/validation loss",
                     run_dir / "loss.png");
  std::ostringstream summary;
  summary << "run: " << cfg.name << "\n";
  summary << "epochs: " << result.train_loss.size() << "\n";
  summary << "best epoch: " << result.best_epoch << "\n";
  summary << "best checkpoint: " << result.best_checkpoint.string() << "\n";
  for (std::size_t i = 0; i < result.train_loss.size(); ++i) {
    summary << "epoch " << (i + 1) << ": train " << format_double(result.train_loss[i])
            << " val " << format_double(result.val_loss[i]) << " ("
            << format_double(result.epoch_seconds[i]) << "s)\n";
  }
  write_file(run_dir / "summary.txt", summary.str());
  return result;
}

int cmd_ingest(const std::string& data, const std::string& manifest_name, bool strict) {
  const CorpusManifest manifest = load_data(data, manifest_name);
  const ValidationReport report = validate_manifest(manifest);
  std::cout << report.to_text();
  if (strict && !report.ok()) {
    std::cerr << "error: manifest has missing files or empty reports\n";
    return 1;
  }
  return 0;
}

int cmd_stats(const std::string& data, const std::string& manifest_name,
              const std::string& split, const std::string& out,
              const std::string& rule_name, const std::string& std_name) {
  const CorpusManifest manifest = load_data(data, manifest_name);
  const CountRule rule = rule_name == "whitespace" ? CountRule::whitespace : CountRule::words;
  const StdMode mode = std_name == "population" ? StdMode::population : StdMode::sample;
  std::vector<std::pair<std::string, ReportLengthStats>> rows;
  if (split == "each") {
    for (const char* s : {"train", "test", "validation"}) {
      rows.emplace_back(s, report_length_stats(manifest, s, rule, mode));
    }
  } else {
    rows.emplace_back(split, report_length_stats(manifest, split, rule, mode));
  }
  std::cout << stats_table(rows);
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    write_file(std::filesystem::path(out) / "report_length_stats.csv", stats_csv(rows));
  }
  return 0;
}

int cmd_wordcloud(const std::string& data, const std::string& manifest_name,
                  const std::string& split, bool keep_stopwords,
                  const std::string& stopword_file, std::size_t top, const std::string& out,
                  bool png) {
  const CorpusManifest manifest = load_data(data, manifest_name);
  const std::set<std::string> stopwords =
      stopword_file.empty() ? english_stopwords() : load_stopwords(stopword_file);
  const WordFrequencyTable table =
      word_frequencies(manifest, split, !keep_stopwords, stopwords);
  const std::string csv = frequency_csv(table, top);
  std::cout << csv;
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    const auto base = std::filesystem::path(out);
    write_file(base / ("word_frequencies_" + split + ".csv"), frequency_csv(table));
    if (png) {
      std::vector<std::pair<std::string, std::size_t>> top_words;
      std::istringstream in(csv);
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line) && !line.empty()) {
        const auto comma = line.rfind(',');
        top_words.emplace_back(line.substr(0, comma),
                               static_cast<std::size_t>(std::stoull(line.substr(comma + 1))));
      }
      render_frequency_chart(top_words, "word frequencies (" + split + ")",
                             base / ("word_frequencies_" + split + ".png"));
    }
  }
  return 0;
}

int cmd_train(const std::string& data, const std::string& manifest_name,
              const std::string& config_path, const std::string& run_name,
              const std::string& out, const Overrides& over) {
  const CorpusManifest manifest = load_data(data, manifest_name);
  ExperimentSpec spec = load_experiment(config_path, over);
  const RunConfig* chosen = nullptr;
  if (run_name.empty()) {
    chosen = &spec.runs.front();
  } else {
    for (const auto& run : spec.runs) {
      if (run.name == run_name) chosen = &run;
    }
    if (!chosen) throw std::runtime_error("no run named '" + run_name + "' in config");
  }
  const RunResult result = run_training(*chosen, manifest, out);
  std::cout << "trained " << chosen->name << ": best epoch " << result.best_epoch
            << ", final train loss " << format_double(result.train_loss.back()) << "\n";
  return 0;
}

int cmd_generate(const std::string& checkpoint, const std::string& image_path,
                 const std::string& data, const std::string& manifest_name,
                 const std::string& split, const std::string& out, int beam,
                 bool fixed_length, std::optional<int> max_len) {
  Model model = load_checkpoint(checkpoint).model;
  const GenerationConfig gen = make_gen_config(model, beam, fixed_length, max_len);
  if (!image_path.empty()) {
    const ImageTensor image = load_image(image_path, model.config.encoder.image_size,
                                         model.config.encoder.channels);
    const VisualMemory memory =
        encode_image_value(image, model.config.encoder, model.params, "enc.");
    const TokenSequence seq = generate(memory, model.config.decoder, model.params, "dec.", gen);
    std::cout << decode(seq.ids, model.vocab) << "\n";
    return 0;
  }
  if (data.empty()) throw std::runtime_error("generate needs --image or --data with --split");
  const CorpusManifest manifest = load_data(data, manifest_name);
  const auto preds = generate_split_predictions(model, manifest, parse_split(split), gen);
  const std::string tsv = tsv_pairs_text(preds);
  if (out.empty()) {
    std::cout << tsv;
  } else {
    std::filesystem::create_directories(out);
    write_file(std::filesystem::path(out) / ("predictions_" + split + ".tsv"), tsv);
  }
  return 0;
}

int cmd_evaluate(const std::string& pred, const std::string& ref, const std::string& name,
                 const std::string& out) {
  const auto predictions = read_tsv_pairs(pred);
  const auto references = read_tsv_pairs(ref);
  const HashEmbedder embedder;
  MetricReport report;
  report.rows.emplace_back(name, evaluate_corpus(predictions, references, embedder));
  std::cout << report.rouge_bleu_table() << "\n" << report.bertscore_table();
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    const auto base = std::filesystem::path(out);
    write_file(base / "metrics_rouge_bleu.csv", report.rouge_bleu_csv());
    write_file(base / "metrics_bertscore.csv", report.bertscore_csv());
  }
  return 0;
}

int cmd_compare(const std::string& data, const std::string& manifest_name,
                const std::string& config_path, const std::string& out, int beam,
                bool fixed_length, const Overrides& over) {
  const CorpusManifest manifest = load_data(data, manifest_name);
  const ExperimentSpec spec = load_experiment(config_path, over);
  const std::filesystem::path out_dir(out);
  std::filesystem::create_directories(out_dir);

  std::map<std::string, std::string> references;
  for (const auto* rec : manifest.split_records(Split::test)) {
    references[rec->study_id] = rec->report_text;
  }

  const HashEmbedder embedder;
  MetricReport report;
  for (const auto& run : spec.runs) {
    run_training(run, manifest, out_dir);
    // score the checkpoint that minimized validation loss
    Model best = load_checkpoint(out_dir / run.name / "best.ckpt").model;
    const GenerationConfig gen = make_gen_config(best, beam, fixed_length, std::nullopt);
    const auto preds = generate_split_predictions(best, manifest, Split::test, gen);
    write_file(out_dir / run.name / "predictions_test.tsv", tsv_pairs_text(preds));
    report.rows.emplace_back(run.name, evaluate_corpus(preds, references, embedder));
  }

  const std::string text = report.rouge_bleu_table() + "\n" + report.bertscore_table();
  std::cout << text;
  write_file(out_dir / "metrics_rouge_bleu.csv", report.rouge_bleu_csv());
  write_file(out_dir / "metrics_bertscore.csv", report.bertscore_csv());
  write_file(out_dir / "report.txt", text);
  return 0;
}

int cmd_plot_loss(const std::string& curves, const std::string& out,
                  const std::string& title) {
  std::ifstream in(curves);
  if (!in) throw std::runtime_error("cannot open " + curves);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto rows = parse_loss_curves(buf.str());
  if (rows.empty()) throw std::runtime_error(curves + ": no data rows");
  std::filesystem::create_directories(out);
  const auto file = std::filesystem::path(out) /
                    (std::filesystem::path(curves).stem().string() + ".png");
  render_loss_curves(rows, title, file);
  std::cout << "wrote " << file.string() << "\n";
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& argv) {
  CLI::App app{"chest x-ray report generation: data analysis, training, evaluation"};
  app.require_subcommand(1);

  std::string data, manifest_name = "manifest.tsv", out, config_path, split = "train";
  std::string checkpoint, pred, ref, image_path, run_name, stopword_file;
  std::string name = "model", title = "training loss", rule_name = "words",
              std_name = "sample";
  bool strict = false, keep_stopwords = false, png = false;
  bool fixed_length = true;
  int beam = 1;
  std::size_t top = 40;
  Overrides over;

  auto* ingest = app.add_subcommand("ingest", "load and validate a dataset manifest");
  ingest->add_option("--data", data, "dataset root directory")->required();
  ingest->add_option("--manifest", manifest_name, "manifest file name");
  ingest->add_flag("--strict", strict, "exit nonzero when validation finds problems");

  auto* stats = app.add_subcommand("stats", "report length statistics per split");
  stats->add_option("--data", data)->required();
  stats->add_option("--manifest", manifest_name);
  stats->add_option("--split", split, "train|test|validation|all|each");
  stats->add_option("--out", out, "directory for the CSV copy");
  stats->add_option("--count-rule", rule_name, "words|whitespace");
  stats->add_option("--std", std_name, "sample|population");

  auto* wordcloud = app.add_subcommand("wordcloud", "word frequency table for a split");
  wordcloud->add_option("--data", data)->required();
  wordcloud->add_option("--manifest", manifest_name);
  wordcloud->add_option("--split", split);
  wordcloud->add_flag("--keep-stopwords", keep_stopwords, "skip stopword removal");
  wordcloud->add_option("--stopwords", stopword_file, "custom stopword list file");
  wordcloud->add_option("--top", top, "rows to print");
  wordcloud->add_option("--out", out);
  wordcloud->add_flag("--png", png, "also render a frequency chart");

  auto* train = app.add_subcommand("train", "train one encoder-decoder run");
  train->add_option("--data", data)->required();
  train->add_option("--manifest", manifest_name);
  train->add_option("--config", config_path, "experiment config file");
  train->add_option("--run", run_name, "run section to train (default: first)");
  train->add_option("--out", out)->required();
  over.add_flags(train);

  auto* generate_cmd = app.add_subcommand("generate", "generate reports from a checkpoint");
  generate_cmd->add_option("--checkpoint", checkpoint)->required();
  generate_cmd->add_option("--image", image_path, "single image file");
  generate_cmd->add_option("--data", data, "dataset root (with --split)");
  generate_cmd->add_option("--manifest", manifest_name);
  generate_cmd->add_option("--split", split);
  generate_cmd->add_option("--out", out);
  generate_cmd->add_option("--beam", beam, "beam width (1 = greedy)");
  generate_cmd->add_flag("--fixed-length,!--no-fixed-length", fixed_length,
                         "always generate to max length");
  generate_cmd->add_option("--max-len", over.max_len, "generation length cap");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "score predictions against references");
  evaluate_cmd->add_option("--pred", pred)->required();
  evaluate_cmd->add_option("--ref", ref)->required();
  evaluate_cmd->add_option("--name", name, "row label");
  evaluate_cmd->add_option("--out", out);

  auto* compare = app.add_subcommand("compare", "train and evaluate all configured runs");
  compare->add_option("--data", data)->required();
  compare->add_option("--manifest", manifest_name);
  compare->add_option("--config", config_path, "experiment config file");
  compare->add_option("--out", out)->required();
  compare->add_option("--beam", beam);
  compare->add_flag("--fixed-length,!--no-fixed-length", fixed_length);
  over.add_flags(compare);

  auto* plot_loss = app.add_subcommand("plot-loss", "render a loss-curve CSV as PNG");
  plot_loss->add_option("--curves", pred, "loss CSV file")->required();
  plot_loss->add_option("--out", out)->required();
  plot_loss->add_option("--title", title);

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(data, manifest_name, strict);
    if (stats->parsed()) {
      return cmd_stats(data, manifest_name, split == "all" ? "all" : split, out, rule_name,
                       std_name);
    }
    if (wordcloud->parsed()) {
      return cmd_wordcloud(data, manifest_name, split, keep_stopwords, stopword_file, top,
                           out, png);
    }
    if (train->parsed()) return cmd_train(data, manifest_name, config_path, run_name, out, over);
    if (generate_cmd->parsed()) {
      return cmd_generate(checkpoint, image_path, data, manifest_name, split, out, beam,
                          fixed_length, over.max_len);
    }
    if (evaluate_cmd->parsed()) return cmd_evaluate(pred, ref, name, out);
    if (compare->parsed()) {
      return cmd_compare(data, manifest_name, config_path, out, beam, fixed_length, over);
    }
    if (plot_loss->parsed()) return cmd_plot_loss(pred, out, title);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "usage error: no subcommand\n";
  return 2;
}

}  // namespace rrg
