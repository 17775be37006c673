#pragma once

#include <string>
#include <vector>

#include "rrg/autodiff.hpp"
#include "rrg/image.hpp"

namespace rrg {

// Sequence of visual feature vectors, [num_tokens, model_dim]; the
// cross-attention memory consumed by the decoders.
using VisualMemory = Matrix;

enum class EncoderKind { vit, swin };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::vit;
  int image_size = 64;
  int patch_size = 8;
  int channels = 1;
  int embed_dim = 64;
  std::vector<int> depths = {2};  // vit: single entry; swin: one per stage
  int num_heads = 4;
  int window_size = 2;            // swin only
  double mlp_ratio = 4.0;
  int model_dim = 64;             // memory width shared with the decoder
  bool relative_bias = true;      // swin; switchable off for testing

  int grid_side() const { return image_size / patch_size; }
  int num_tokens() const;         // tokens in the final memory
  int final_dim() const;          // channel width after the last stage
  void validate() const;          // throws on violated invariants
};

EncoderConfig desk_vit_config();
EncoderConfig desk_swin_config();
// Canonical published geometries, expressible but far beyond desk scale.
EncoderConfig canonical_vit_b16_config();
EncoderConfig canonical_swin_config();

// Row-major index maps between an h x w grid flattened to rows and its
// window layout [num_windows * window^2 rows].
std::vector<int> window_partition_map(int h, int w, int window);
std::vector<int> window_reverse_map(int h, int w, int window);
// Cyclic roll of the flattened grid by (dy, dx).
std::vector<int> roll_map(int h, int w, int dy, int dx);

// Grid-shaped values [h*w, dim] carried through the swin stages.
struct FeatureGrid {
  int h = 0, w = 0;
  Var features;
};

Matrix window_partition(const Matrix& grid, int h, int w, int window);
Matrix window_reverse(const Matrix& windows, int h, int w, int window);

// Additive mask [window^2, window^2] per window forbidding attention across
// regions that were not adjacent before the cyclic shift. Entries are 0 or
// -infinity.
std::vector<Matrix> shifted_window_masks(int h, int w, int window, int shift);

// Collects attention weight matrices (post-softmax) when non-null.
struct AttnProbe {
  std::vector<Matrix> maps;
};

void init_encoder_params(const EncoderConfig& cfg, ParamStore& store,
                         const std::string& prefix, Rng& rng);

// Patch embedding: flatten patch pixels (channel, then row, then column),
// project to embed_dim; ViT additionally adds its learned position table.
Var patch_embed(Tape& tape, const ImageTensor& image, const EncoderConfig& cfg,
                ParamStore& store, const std::string& prefix);

Var vit_encode(Tape& tape, const ImageTensor& image, const EncoderConfig& cfg,
               ParamStore& store, const std::string& prefix, AttnProbe* probe = nullptr);

FeatureGrid swin_block(Tape& tape, FeatureGrid grid, bool shift, const EncoderConfig& cfg,
                       ParamStore& store, const std::string& block_prefix,
                       AttnProbe* probe = nullptr);

FeatureGrid patch_merge(Tape& tape, FeatureGrid grid, ParamStore& store,
                        const std::string& prefix);

Var swin_encode(Tape& tape, const ImageTensor& image, const EncoderConfig& cfg,
                ParamStore& store, const std::string& prefix, AttnProbe* probe = nullptr);

// Dispatch on cfg.kind; value-only convenience wrapper below.
Var encode_image(Tape& tape, const ImageTensor& image, const EncoderConfig& cfg,
                 ParamStore& store, const std::string& prefix, AttnProbe* probe = nullptr);

VisualMemory encode_image_value(const ImageTensor& image, const EncoderConfig& cfg,
                                ParamStore& store, const std::string& prefix,
                                AttnProbe* probe = nullptr);

}  // namespace rrg
