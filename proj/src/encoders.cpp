#include "rrg/encoders.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "rrg/layers.hpp"

namespace rrg {

int EncoderConfig::num_tokens() const {
  int side = grid_side();
  if (kind == EncoderKind::swin) side >>= (depths.size() - 1);
  return side * side;
}

int EncoderConfig::final_dim() const {
  return kind == EncoderKind::swin ? embed_dim << (depths.size() - 1) : embed_dim;
}

void EncoderConfig::validate() const {
  if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0) {
    throw std::invalid_argument("encoder config: image_size " + std::to_string(image_size) +
                                " must be a positive multiple of patch_size " +
                                std::to_string(patch_size));
  }
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("encoder config: channels must be 1 or 3");
  }
  if (embed_dim <= 0 || num_heads <= 0 || embed_dim % num_heads != 0) {
    throw std::invalid_argument("encoder config: embed_dim must be a positive multiple of num_heads");
  }
  if (model_dim <= 0) throw std::invalid_argument("encoder config: model_dim must be positive");
  if (depths.empty()) throw std::invalid_argument("encoder config: depths must be non-empty");
  for (int d : depths) {
    if (d < 1) throw std::invalid_argument("encoder config: every stage depth must be >= 1");
  }
  if (mlp_ratio <= 0) throw std::invalid_argument("encoder config: mlp_ratio must be positive");
  if (kind == EncoderKind::vit) {
    if (depths.size() != 1) {
      throw std::invalid_argument("encoder config: vit takes a single depth entry");
    }
  } else {
    if (window_size < 1) throw std::invalid_argument("encoder config: window_size must be >= 1");
    int side = grid_side();
    for (std::size_t s = 0; s < depths.size(); ++s) {
      if (side % window_size != 0) {
        throw std::invalid_argument("encoder config: grid side " + std::to_string(side) +
                                    " at stage " + std::to_string(s) +
                                    " is not divisible by window " + std::to_string(window_size));
      }
      if (s + 1 < depths.size()) {
        if (side % 2 != 0) {
          throw std::invalid_argument("encoder config: grid side " + std::to_string(side) +
                                      " at stage " + std::to_string(s) + " must be even to merge");
        }
        side /= 2;
      }
    }
  }
}

EncoderConfig desk_vit_config() {
  EncoderConfig cfg;
  cfg.kind = EncoderKind::vit;
  cfg.image_size = 64;
  cfg.patch_size = 8;
  cfg.embed_dim = 64;
  cfg.depths = {2};
  cfg.num_heads = 4;
  cfg.model_dim = 64;
  return cfg;
}

EncoderConfig desk_swin_config() {
  EncoderConfig cfg;
  cfg.kind = EncoderKind::swin;
  cfg.image_size = 64;
  cfg.patch_size = 4;
  cfg.embed_dim = 64;
  cfg.depths = {2, 2};
  cfg.num_heads = 4;
  cfg.window_size = 2;
  cfg.model_dim = 64;
  return cfg;
}

EncoderConfig canonical_vit_b16_config() {
  EncoderConfig cfg;
  cfg.kind = EncoderKind::vit;
  cfg.image_size = 224;
  cfg.patch_size = 16;
  cfg.channels = 3;
  cfg.embed_dim = 768;
  cfg.depths = {12};
  cfg.num_heads = 12;
  cfg.model_dim = 768;
  return cfg;
}

EncoderConfig canonical_swin_config() {
  EncoderConfig cfg;
  cfg.kind = EncoderKind::swin;
  cfg.image_size = 224;
  cfg.patch_size = 4;
  cfg.channels = 3;
  cfg.embed_dim = 96;
  cfg.depths = {2, 2, 6, 2};
  cfg.num_heads = 3;
  cfg.window_size = 7;
  cfg.model_dim = 768;
  return cfg;
}

// -- window bookkeeping --------------------------------------------------------

std::vector<int> window_partition_map(int h, int w, int window) {
  if (window < 1 || h % window != 0 || w % window != 0) {
    throw std::invalid_argument("window_partition: grid " + std::to_string(h) + "x" +
                                std::to_string(w) + " not divisible by window " +
                                std::to_string(window));
  }
  const int nwx = w / window;
  std::vector<int> map(static_cast<std::size_t>(h) * w);
  std::size_t out = 0;
  for (int wy = 0; wy < h / window; ++wy) {
    for (int wx = 0; wx < nwx; ++wx) {
      for (int iy = 0; iy < window; ++iy) {
        for (int ix = 0; ix < window; ++ix) {
          map[out++] = (wy * window + iy) * w + (wx * window + ix);
        }
      }
    }
  }
  return map;
}

std::vector<int> window_reverse_map(int h, int w, int window) {
  const auto fwd = window_partition_map(h, w, window);
  std::vector<int> inv(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) inv[static_cast<std::size_t>(fwd[i])] = static_cast<int>(i);
  return inv;
}

std::vector<int> roll_map(int h, int w, int dy, int dx) {
  std::vector<int> map(static_cast<std::size_t>(h) * w);
  const int my = ((dy % h) + h) % h;
  const int mx = ((dx % w) + w) % w;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      map[static_cast<std::size_t>(i) * w + j] = ((i + my) % h) * w + ((j + mx) % w);
    }
  }
  return map;
}

Matrix window_partition(const Matrix& grid, int h, int w, int window) {
  if (grid.rows() != static_cast<Eigen::Index>(h) * w) {
    throw std::invalid_argument("window_partition: grid has " + std::to_string(grid.rows()) +
                                " rows, expected " + std::to_string(h * w));
  }
  const auto map = window_partition_map(h, w, window);
  Matrix out(grid.rows(), grid.cols());
  for (std::size_t i = 0; i < map.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = grid.row(map[i]);
  return out;
}

Matrix window_reverse(const Matrix& windows, int h, int w, int window) {
  if (windows.rows() != static_cast<Eigen::Index>(h) * w) {
    throw std::invalid_argument("window_reverse: layout has " + std::to_string(windows.rows()) +
                                " rows, expected " + std::to_string(h * w));
  }
  const auto map = window_reverse_map(h, w, window);
  Matrix out(windows.rows(), windows.cols());
  for (std::size_t i = 0; i < map.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = windows.row(map[i]);
  return out;
}

std::vector<Matrix> shifted_window_masks(int h, int w, int window, int shift) {
  const double ninf = -std::numeric_limits<double>::infinity();
  // region ids in shifted coordinates; the boundary slices hold content that
  // was not adjacent before the cyclic roll
  auto region_of = [&](int idx, int extent) {
    if (idx < extent - window) return 0;
    return idx < extent - shift ? 1 : 2;
  };
  std::vector<int> region(static_cast<std::size_t>(h) * w);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      region[static_cast<std::size_t>(i) * w + j] = region_of(i, h) * 3 + region_of(j, w);
    }
  }
  const auto perm = window_partition_map(h, w, window);
  const int win_tokens = window * window;
  const int num_windows = (h / window) * (w / window);
  std::vector<Matrix> masks;
  masks.reserve(static_cast<std::size_t>(num_windows));
  for (int n = 0; n < num_windows; ++n) {
    Matrix m = Matrix::Zero(win_tokens, win_tokens);
    for (int a = 0; a < win_tokens; ++a) {
      for (int b = 0; b < win_tokens; ++b) {
        const int ra = region[static_cast<std::size_t>(perm[static_cast<std::size_t>(n * win_tokens + a)])];
        const int rb = region[static_cast<std::size_t>(perm[static_cast<std::size_t>(n * win_tokens + b)])];
        if (ra != rb) m(a, b) = ninf;
      }
    }
    masks.push_back(std::move(m));
  }
  return masks;
}

// -- parameters ----------------------------------------------------------------

static void init_encoder_block(ParamStore& store, const std::string& prefix, int dim,
                               double mlp_ratio, Rng& rng) {
  init_layer_norm(store, prefix + ".ln1", dim);
  init_attention(store, prefix + ".attn", dim, rng);
  init_layer_norm(store, prefix + ".ln2", dim);
  init_mlp(store, prefix + ".mlp", dim, mlp_ratio, rng);
}

void init_encoder_params(const EncoderConfig& cfg, ParamStore& store,
                         const std::string& prefix, Rng& rng) {
  cfg.validate();
  const int patch_in = cfg.channels * cfg.patch_size * cfg.patch_size;
  init_linear(store, prefix + "patch", patch_in, cfg.embed_dim, rng);
  if (cfg.kind == EncoderKind::vit) {
    const int n = cfg.grid_side() * cfg.grid_side();
    fill_trunc_normal(store.add(prefix + "pos", n, cfg.embed_dim).value, rng);
    for (int i = 0; i < cfg.depths[0]; ++i) {
      init_encoder_block(store, prefix + "blk" + std::to_string(i), cfg.embed_dim,
                         cfg.mlp_ratio, rng);
    }
  } else {
    int dim = cfg.embed_dim;
    const int bias_rows = (2 * cfg.window_size - 1) * (2 * cfg.window_size - 1);
    for (std::size_t s = 0; s < cfg.depths.size(); ++s) {
      const std::string stage = prefix + "s" + std::to_string(s);
      for (int i = 0; i < cfg.depths[s]; ++i) {
        const std::string blk = stage + ".blk" + std::to_string(i);
        init_encoder_block(store, blk, dim, cfg.mlp_ratio, rng);
        if (cfg.relative_bias) store.add(blk + ".relbias", bias_rows, cfg.num_heads);
      }
      if (s + 1 < cfg.depths.size()) {
        init_layer_norm(store, stage + ".merge.ln", 4 * dim);
        init_linear(store, stage + ".merge", 4 * dim, 2 * dim, rng);
        dim *= 2;
      }
    }
  }
  init_layer_norm(store, prefix + "lnf", cfg.final_dim());
  init_linear(store, prefix + "out", cfg.final_dim(), cfg.model_dim, rng);
}

// -- forward -------------------------------------------------------------------

Var patch_embed(Tape& tape, const ImageTensor& image, const EncoderConfig& cfg,
                ParamStore& store, const std::string& prefix) {
  if (image.height != cfg.image_size || image.width != cfg.image_size ||
      image.channels != cfg.channels) {
    throw std::invalid_argument(
        "patch_embed: image is " + std::to_string(image.channels) + "x" +
        std::to_string(image.height) + "x" + std::to_string(image.width) + ", expected " +
        std::to_string(cfg.channels) + "x" + std::to_string(cfg.image_size) + "x" +
        std::to_string(cfg.image_size));
  }
  if (image.height % cfg.patch_size != 0 || image.width % cfg.patch_size != 0) {
    throw std::invalid_argument("patch_embed: image side " + std::to_string(image.height) +
                                " not divisible by patch " + std::to_string(cfg.patch_size));
  }
  const int side = cfg.grid_side();
  const int p = cfg.patch_size;
  Matrix patches(side * side, cfg.channels * p * p);
  for (int py = 0; py < side; ++py) {
    for (int px = 0; px < side; ++px) {
      Eigen::Index col = 0;
      for (int c = 0; c < cfg.channels; ++c) {
        const auto& plane = image.planes[static_cast<std::size_t>(c)];
        for (int iy = 0; iy < p; ++iy) {
          for (int ix = 0; ix < p; ++ix) {
            patches(py * side + px, col++) = plane(py * p + iy, px * p + ix);
          }
        }
      }
    }
  }
  Var x = linear(tape, tape.constant(std::move(patches)), store, prefix + "patch");
  if (store.has(prefix + "pos")) {
    x = add(x, tape.leaf(store.at(prefix + "pos")));
  }
  return x;
}

Var vit_encode(Tape& tape, const ImageTensor& image, const EncoderConfig& cfg,
               ParamStore& store, const std::string& prefix, AttnProbe* probe) {
  if (cfg.kind != EncoderKind::vit) throw std::invalid_argument("vit_encode: config kind is not vit");
  cfg.validate();
  Var x = patch_embed(tape, image, cfg, store, prefix);
  for (int i = 0; i < cfg.depths[0]; ++i) {
    const std::string blk = prefix + "blk" + std::to_string(i);
    Var h = layer_norm(tape, x, store, blk + ".ln1");
    x = add(x, multi_head_attention(tape, h, h, store, blk + ".attn", cfg.num_heads,
                                    nullptr, nullptr, probe));
    Var h2 = layer_norm(tape, x, store, blk + ".ln2");
    x = add(x, mlp_block(tape, h2, store, blk + ".mlp"));
    check_finite(x.value(), "vit block " + std::to_string(i));
  }
  x = layer_norm(tape, x, store, prefix + "lnf");
  return linear(tape, x, store, prefix + "out");
}

static std::vector<Var> relative_bias_terms(Tape& tape, ParamStore& store,
                                            const std::string& name, int window,
                                            int num_heads) {
  const int tokens = window * window;
  std::vector<int> flat;
  flat.reserve(static_cast<std::size_t>(tokens) * tokens);
  for (int a = 0; a < tokens; ++a) {
    for (int b = 0; b < tokens; ++b) {
      const int dy = a / window - b / window + window - 1;
      const int dx = a % window - b % window + window - 1;
      flat.push_back(dy * (2 * window - 1) + dx);
    }
  }
  Var rows = gather_rows(tape.leaf(store.at(name)), flat);
  std::vector<Var> per_head;
  per_head.reserve(static_cast<std::size_t>(num_heads));
  for (int h = 0; h < num_heads; ++h) {
    per_head.push_back(reshape_rm(slice_cols(rows, h, 1), tokens, tokens));
  }
  return per_head;
}

FeatureGrid swin_block(Tape& tape, FeatureGrid grid, bool shift, const EncoderConfig& cfg,
                       ParamStore& store, const std::string& block_prefix, AttnProbe* probe) {
  const int h = grid.h, w = grid.w;
  const int window = cfg.window_size;
  if (h % window != 0 || w % window != 0) {
    throw std::invalid_argument("swin_block: grid " + std::to_string(h) + "x" +
                                std::to_string(w) + " not divisible by window " +
                                std::to_string(window));
  }
  const int dim = static_cast<int>(grid.features.value().cols());
  const int head_dim = dim / cfg.num_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  // shifting a grid no larger than one window would only cut connectivity
  const int s_eff = shift && window < std::min(h, w) ? window / 2 : 0;

  Var x = grid.features;
  Var hnorm = layer_norm(tape, x, store, block_prefix + ".ln1");
  if (s_eff > 0) hnorm = gather_rows(hnorm, roll_map(h, w, s_eff, s_eff));
  Var windows = gather_rows(hnorm, window_partition_map(h, w, window));

  std::vector<Var> head_bias;
  if (cfg.relative_bias && store.has(block_prefix + ".relbias")) {
    head_bias = relative_bias_terms(tape, store, block_prefix + ".relbias", window,
                                    cfg.num_heads);
  }
  std::vector<Matrix> masks;
  if (s_eff > 0) masks = shifted_window_masks(h, w, window, s_eff);

  Var q = linear(tape, windows, store, block_prefix + ".attn.q");
  Var k = linear(tape, windows, store, block_prefix + ".attn.k");
  Var v = linear(tape, windows, store, block_prefix + ".attn.v");

  const int win_tokens = window * window;
  const int num_windows = (h / window) * (w / window);
  std::vector<Var> outputs;
  outputs.reserve(static_cast<std::size_t>(num_windows));
  for (int n = 0; n < num_windows; ++n) {
    Var qw = slice_rows(q, n * win_tokens, win_tokens);
    Var kw = slice_rows(k, n * win_tokens, win_tokens);
    Var vw = slice_rows(v, n * win_tokens, win_tokens);
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(cfg.num_heads));
    for (int hd = 0; hd < cfg.num_heads; ++hd) {
      Var qh = slice_cols(qw, hd * head_dim, head_dim);
      Var kh = slice_cols(kw, hd * head_dim, head_dim);
      Var vh = slice_cols(vw, hd * head_dim, head_dim);
      Var scores = scale(matmul(qh, kh, false, true), inv_sqrt);
      if (!head_bias.empty()) scores = add(scores, head_bias[static_cast<std::size_t>(hd)]);
      if (!masks.empty()) scores = add_const(scores, masks[static_cast<std::size_t>(n)]);
      Var attn = softmax_rows(scores);
      if (probe) probe->maps.push_back(attn.value());
      heads.push_back(matmul(attn, vh));
    }
    outputs.push_back(concat_cols(heads));
  }
  Var merged = linear(tape, concat_rows(outputs), store, block_prefix + ".attn.o");
  merged = gather_rows(merged, window_reverse_map(h, w, window));
  if (s_eff > 0) merged = gather_rows(merged, roll_map(h, w, -s_eff, -s_eff));
  x = add(x, merged);

  Var h2 = layer_norm(tape, x, store, block_prefix + ".ln2");
  x = add(x, mlp_block(tape, h2, store, block_prefix + ".mlp"));
  return {h, w, x};
}

FeatureGrid patch_merge(Tape& tape, FeatureGrid grid, ParamStore& store,
                        const std::string& prefix) {
  const int h = grid.h, w = grid.w;
  if (h % 2 != 0 || w % 2 != 0) {
    throw std::invalid_argument("patch_merge: grid " + std::to_string(h) + "x" +
                                std::to_string(w) + " must have even sides");
  }
  const int oh = h / 2, ow = w / 2;
  std::vector<int> tl, tr, bl, br;
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      tl.push_back((2 * i) * w + 2 * j);
      tr.push_back((2 * i) * w + 2 * j + 1);
      bl.push_back((2 * i + 1) * w + 2 * j);
      br.push_back((2 * i + 1) * w + 2 * j + 1);
    }
  }
  Var cat = concat_cols({gather_rows(grid.features, tl), gather_rows(grid.features, tr),
                         gather_rows(grid.features, bl), gather_rows(grid.features, br)});
  cat = layer_norm(tape, cat, store, prefix + ".ln");
  return {oh, ow, linear(tape, cat, store, prefix)};
}

Var swin_encode(Tape& tape, const ImageTensor& image, const EncoderConfig& cfg,
                ParamStore& store, const std::string& prefix, AttnProbe* probe) {
  if (cfg.kind != EncoderKind::swin) throw std::invalid_argument("swin_encode: config kind is not swin");
  cfg.validate();
  FeatureGrid grid{cfg.grid_side(), cfg.grid_side(),
                   patch_embed(tape, image, cfg, store, prefix)};
  for (std::size_t s = 0; s < cfg.depths.size(); ++s) {
    const std::string stage = prefix + "s" + std::to_string(s);
    for (int i = 0; i < cfg.depths[s]; ++i) {
      grid = swin_block(tape, grid, i % 2 == 1, cfg, store,
                        stage + ".blk" + std::to_string(i), probe);
      check_finite(grid.features.value(),
                   "swin stage " + std::to_string(s) + " block " + std::to_string(i));
    }
    if (s + 1 < cfg.depths.size()) grid = patch_merge(tape, grid, store, stage + ".merge");
  }
  Var x = layer_norm(tape, grid.features, store, prefix + "lnf");
  return linear(tape, x, store, prefix + "out");
}

Var encode_image(Tape& tape, const ImageTensor& image, const EncoderConfig& cfg,
                 ParamStore& store, const std::string& prefix, AttnProbe* probe) {
  return cfg.kind == EncoderKind::vit ? vit_encode(tape, image, cfg, store, prefix, probe)
                                      : swin_encode(tape, image, cfg, store, prefix, probe);
}

VisualMemory encode_image_value(const ImageTensor& image, const EncoderConfig& cfg,
                                ParamStore& store, const std::string& prefix,
                                AttnProbe* probe) {
  Tape tape;
  VisualMemory memory = encode_image(tape, image, cfg, store, prefix, probe).value();
  check_finite(memory, "visual memory");
  if (memory.rows() < 1) throw std::runtime_error("visual memory has no tokens");
  return memory;
}

}  // namespace rrg
