#pragma once

// Synthetic 16-pair image-report dataset written to disk for integration and
// acceptance runs: 8x8 grayscale PNGs plus manifest.tsv, split 11/3/2.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rrg/image.hpp"

namespace synth {

inline std::filesystem::path make_dataset(const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / ("rrg_data_" + tag);
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
    rrg::PixelBuffer px;
    px.channels = 1;
    px.width = 8;
    px.height = 8;
    px.data.resize(64);
    for (int p = 0; p < 64; ++p) {
      px.data[static_cast<std::size_t>(p)] = static_cast<std::uint8_t>((p * (i + 3)) % 256);
    }
    const std::string rel = "images/img" + std::to_string(i) + ".png";
    rrg::write_png(root / rel, px);
    const char* split = i < 11 ? "train" : (i < 14 ? "test" : "validation");
    manifest << "s" << i << '\t' << rel << '\t' << split << '\t' << texts[i % 4] << '\n';
  }
  std::ofstream out(root / "manifest.tsv");
  out << manifest.str();
  return root;
}

// All four encoder-decoder pairings at desk-smoke scale, 2 epochs.
inline const char* four_run_config() {
  return R"(
seed = 5
epochs = 2
batch_size = 8
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

[run vit-gpt2]
encoder = vit
decoder = gpt2
patch_size = 4
encoder_depths = 1

[run vit-bart]
encoder = vit
decoder = bart
patch_size = 4
encoder_depths = 1

[run swin-bart]
encoder = swin
decoder = bart
patch_size = 2
encoder_depths = 2
window_size = 2

[run swin-gpt2]
encoder = swin
decoder = gpt2
patch_size = 2
encoder_depths = 2
window_size = 2
)";
}

}  // namespace synth
