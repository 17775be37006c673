#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rrg/checkpoint.hpp"
#include "rrg/cli.hpp"
#include "rrg/config_file.hpp"
#include "rrg/corpus.hpp"
#include "rrg/image.hpp"

using namespace rrg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& file) {
  std::ifstream in(file);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void put(const fs::path& file, const std::string& content) {
  std::ofstream out(file);
  out << content;
}

// 16-pair synthetic dataset: 8x8 grayscale PNGs plus manifest.tsv
fs::path make_dataset(const char* tag) {
  const fs::path root = fs::temp_directory_path() / (std::string("rrg_cli_") + tag);
  fs::remove_all(root);
  fs::create_directories(root / "images");

  const char* texts[4] = {
      "the heart is normal in size",
      "no acute cardiopulmonary disease seen",
      "lungs are clear without effusion",
      "stable chest with no focal opacity",
  };
  std::ostringstream manifest;
  manifest << "study_id\timage_relpath\tsplit\treport_text\n";
  for (int i = 0; i < 16; ++i) {
    PixelBuffer px;
    px.channels = 1;
    px.width = 8;
    px.height = 8;
    px.data.resize(64);
    for (int p = 0; p < 64; ++p) {
      px.data[static_cast<std::size_t>(p)] = static_cast<std::uint8_t>((p * (i + 3)) % 256);
    }
    const std::string rel = "images/img" + std::to_string(i) + ".png";
    write_png(root / rel, px);
    const char* split = i < 11 ? "train" : (i < 14 ? "test" : "validation");
    manifest << "s" << i << '\t' << rel << '\t' << split << '\t' << texts[i % 4] << '\n';
  }
  put(root / "manifest.tsv", manifest.str());
  return root;
}

const char* kTinyConfig = R"(
# desk-scale smoke configuration
seed = 5
epochs = 2
batch_size = 4
learning_rate = 0.001
weight_decay = 0.01
max_len = 10
embed_dim = 8
model_dim = 8
encoder_heads = 2
decoder_heads = 2
decoder_depth = 1
mlp_ratio = 2
image_size = 8

[run tiny-vit-gpt2]
encoder = vit
decoder = gpt2
patch_size = 4
encoder_depths = 1

[run tiny-swin-bart]
encoder = swin
decoder = bart
patch_size = 2
encoder_depths = 2
window_size = 2
)";

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("config parser: defaults, sections, comments, errors") {
  const ParsedConfig parsed = parse_config_text(kTinyConfig);
  CHECK(parsed.defaults.at("epochs") == "2");
  REQUIRE(parsed.sections.size() == 2);
  CHECK(parsed.sections[0].first == "tiny-vit-gpt2");
  CHECK(parsed.sections[1].second.at("decoder") == "bart");

  const ExperimentSpec spec = experiment_from_config(parsed);
  REQUIRE(spec.runs.size() == 2);
  CHECK(spec.runs[0].name == "tiny-vit-gpt2");
  CHECK(spec.runs[0].encoder.kind == EncoderKind::vit);
  CHECK(spec.runs[0].decoder.kind == DecoderKind::gpt2);
  CHECK(spec.runs[0].epochs == 2);
  CHECK(spec.runs[0].batch_size == 4);
  CHECK(spec.runs[0].learning_rate == 0.001);
  CHECK(spec.runs[1].encoder.kind == EncoderKind::swin);
  CHECK(spec.runs[1].encoder.depths == std::vector<int>{2});
  CHECK(spec.runs[1].decoder.model_dim == 8);

  CHECK_THROWS(parse_config_text("key_without_value\n"));
  CHECK_THROWS(parse_config_text("[run broken\n"));
  CHECK_THROWS(experiment_from_config(parse_config_text("encoder = resnet\n")));
  CHECK_THROWS(experiment_from_config(parse_config_text("epochs = soon\n")));

  // table 2 defaults survive when keys are omitted
  const ExperimentSpec defaults = default_experiment();
  REQUIRE(defaults.runs.size() == 4);
  CHECK(defaults.runs[0].learning_rate == 5e-5);
  CHECK(defaults.runs[0].weight_decay == 0.01);
  CHECK(defaults.runs[0].batch_size == 8);
  CHECK(defaults.runs[0].decoder.kind == DecoderKind::gpt2);
  CHECK(defaults.runs[0].resolved_epochs() == 5);
  CHECK(defaults.runs[1].decoder.kind == DecoderKind::bart);
  CHECK(defaults.runs[1].resolved_epochs() == 8);
}

TEST_CASE("ingest and stats on a synthetic dataset") {
  const fs::path root = make_dataset("ingest");
  CHECK(run_command({"ingest", "--data", root.string()}) == 0);

  const fs::path out = root / "statsout";
  CHECK(run_command({"stats", "--data", root.string(), "--split", "each", "--out",
                     out.string()}) == 0);
  const std::string csv = slurp(out / "report_length_stats.csv");
  CHECK(csv.rfind("split,count,mean,std,min,max,q25,q50,q75\n", 0) == 0);
  CHECK(csv.find("train,11,") != std::string::npos);

  CHECK(run_command({"stats", "--data", root.string(), "--split", "all"}) == 0);
  // unknown split is a runtime failure, exit 1
  CHECK(run_command({"stats", "--data", root.string(), "--split", "bogus"}) == 1);
}

TEST_CASE("wordcloud emits frequencies and honors stopword flags") {
  const fs::path root = make_dataset("wordcloud");
  const fs::path out = root / "wc";
  CHECK(run_command({"wordcloud", "--data", root.string(), "--split", "train", "--out",
                     out.string(), "--png"}) == 0);
  const std::string csv = slurp(out / "word_frequencies_train.csv");
  CHECK(csv.rfind("word,count\n", 0) == 0);
  CHECK(csv.find("heart") != std::string::npos);
  CHECK(csv.find("the,") == std::string::npos);  // stopword removed by default
  CHECK(fs::exists(out / "word_frequencies_train.png"));

  const fs::path out2 = root / "wc_keep";
  CHECK(run_command({"wordcloud", "--data", root.string(), "--split", "train",
                     "--keep-stopwords", "--out", out2.string()}) == 0);
  CHECK(slurp(out2 / "word_frequencies_train.csv").find("the,") != std::string::npos);
}

TEST_CASE("evaluate: identical prediction and reference files score 1.0") {
  const fs::path root = fs::temp_directory_path() / "rrg_cli_eval";
  fs::remove_all(root);
  fs::create_directories(root);
  put(root / "p.tsv",
      "a\tno acute cardiopulmonary disease\nb\tthe lungs are clear today\n");
  put(root / "r.tsv",
      "a\tno acute cardiopulmonary disease\nb\tthe lungs are clear today\n");
  const fs::path out = root / "metrics";
  CHECK(run_command({"evaluate", "--pred", (root / "p.tsv").string(), "--ref",
                     (root / "r.tsv").string(), "--out", out.string()}) == 0);
  const std::string rouge_csv = slurp(out / "metrics_rouge_bleu.csv");
  CHECK(rouge_csv.rfind("Model,ROUGE1 F1,ROUGE2 F1,ROUGE3 F1,ROUGE4 F1,ROUGEL F1,BLEU\n",
                        0) == 0);
  CHECK(rouge_csv.find("model,1,1,1,1,1,1") != std::string::npos);
  const std::string bert_csv = slurp(out / "metrics_bertscore.csv");
  CHECK(bert_csv.rfind("Model,BERTScore Precision,BERTScore Recall,BERTScore F1\n", 0) == 0);
  CHECK(bert_csv.find("model,1,1,1") != std::string::npos);

  // mismatched ids fail with exit 1
  put(root / "bad.tsv", "zz\tsome text\n");
  CHECK(run_command({"evaluate", "--pred", (root / "bad.tsv").string(), "--ref",
                     (root / "r.tsv").string()}) == 1);
}

TEST_CASE("train, generate and plot-loss round trip") {
  const fs::path root = make_dataset("train");
  put(root / "exp.cfg", kTinyConfig);
  const fs::path out = root / "runout";

  CHECK(run_command({"train", "--data", root.string(), "--config",
                     (root / "exp.cfg").string(), "--run", "tiny-vit-gpt2", "--out",
                     out.string()}) == 0);
  const fs::path run_dir = out / "tiny-vit-gpt2";
  CHECK(fs::exists(run_dir / "loss.csv"));
  CHECK(fs::exists(run_dir / "loss.png"));
  CHECK(fs::exists(run_dir / "best.ckpt"));
  CHECK(fs::exists(run_dir / "epoch_1.ckpt"));
  CHECK(fs::exists(run_dir / "epoch_2.ckpt"));
  const std::string csv = slurp(run_dir / "loss.csv");
  CHECK(csv.rfind("epoch,train_loss,val_loss\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  // flag overrides beat the config file
  const fs::path out1 = root / "runout_short";
  CHECK(run_command({"train", "--data", root.string(), "--config",
                     (root / "exp.cfg").string(), "--run", "tiny-vit-gpt2", "--out",
                     out1.string(), "--epochs", "1"}) == 0);
  const std::string csv1 = slurp(out1 / "tiny-vit-gpt2" / "loss.csv");
  CHECK(std::count(csv1.begin(), csv1.end(), '\n') == 2);

  // generate a single report from the checkpoint
  CHECK(run_command({"generate", "--checkpoint", (run_dir / "best.ckpt").string(),
                     "--image", (root / "images/img0.png").string()}) == 0);
  // and a whole split as TSV
  const fs::path gen_out = root / "genout";
  CHECK(run_command({"generate", "--checkpoint", (run_dir / "best.ckpt").string(),
                     "--data", root.string(), "--split", "test", "--out",
                     gen_out.string()}) == 0);
  const std::string preds = slurp(gen_out / "predictions_test.tsv");
  CHECK(preds.find("s11\t") != std::string::npos);
  CHECK(preds.find("s13\t") != std::string::npos);

  CHECK(run_command({"plot-loss", "--curves", (run_dir / "loss.csv").string(), "--out",
                     (root / "plots").string()}) == 0);
  CHECK(fs::exists(root / "plots" / "loss.png"));
}

TEST_CASE("compare produces both tables with one row per run") {
  const fs::path root = make_dataset("compare");
  put(root / "exp.cfg", kTinyConfig);
  const fs::path out = root / "cmp";
  CHECK(run_command({"compare", "--data", root.string(), "--config",
                     (root / "exp.cfg").string(), "--out", out.string()}) == 0);

  const std::string rouge_csv = slurp(out / "metrics_rouge_bleu.csv");
  CHECK(rouge_csv.rfind("Model,ROUGE1 F1,ROUGE2 F1,ROUGE3 F1,ROUGE4 F1,ROUGEL F1,BLEU\n",
                        0) == 0);
  CHECK(rouge_csv.find("tiny-vit-gpt2,") != std::string::npos);
  CHECK(rouge_csv.find("tiny-swin-bart,") != std::string::npos);
  CHECK(slurp(out / "metrics_bertscore.csv")
            .rfind("Model,BERTScore Precision,BERTScore Recall,BERTScore F1\n", 0) == 0);
  CHECK(fs::exists(out / "report.txt"));
  CHECK(fs::exists(out / "tiny-vit-gpt2" / "predictions_test.tsv"));
  CHECK(fs::exists(out / "tiny-swin-bart" / "loss.png"));

  // all emitted metric values parse and sit in [0,1]
  std::istringstream rows(rouge_csv);
  std::string line;
  std::getline(rows, line);
  while (std::getline(rows, line)) {
    std::size_t at = line.find(',');
    while (at != std::string::npos) {
      const std::size_t next = line.find(',', at + 1);
      const std::string field = line.substr(at + 1, next == std::string::npos
                                                        ? std::string::npos
                                                        : next - at - 1);
      const double v = std::stod(field);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      at = next;
    }
  }
}

TEST_CASE("usage errors exit 2, runtime failures exit 1") {
  CHECK(run_command({"no-such-command"}) == 2);
  CHECK(run_command({}) == 2);
  CHECK(run_command({"stats"}) == 2);                        // missing --data
  CHECK(run_command({"stats", "--data", "/nonexistent"}) == 1);
  CHECK(run_command({"ingest", "--data", "/nonexistent", "--bogus-flag"}) == 2);
}

TEST_SUITE_END();
