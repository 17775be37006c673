#include "rrg/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <stdexcept>

namespace rrg {

Canvas::Canvas(int width, int height, Color background) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw std::invalid_argument("canvas size must be positive");
  rgb_.resize(static_cast<std::size_t>(width) * height * 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) set(x, y, background);
  }
}

void Canvas::set(int x, int y, Color c) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  const std::size_t at = (static_cast<std::size_t>(y) * width_ + x) * 3;
  rgb_[at] = c.r;
  rgb_[at + 1] = c.g;
  rgb_[at + 2] = c.b;
}

void Canvas::line(int x0, int y0, int x1, int y1, Color c) {
  // Bresenham
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    set(x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void Canvas::fill_rect(int x0, int y0, int w, int h, Color c) {
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) set(x, y, c);
  }
}

namespace {

// 5x7 glyphs, one byte per row, low 5 bits used (MSB side left).
const std::map<char, std::array<std::uint8_t, 7>>& font() {
  static const std::map<char, std::array<std::uint8_t, 7>> glyphs = {
      {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
      {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
      {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
      {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
      {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
      {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
      {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
      {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
      {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
      {'a', {0x00, 0x00, 0x0e, 0x01, 0x0f, 0x11, 0x0f}},
      {'b', {0x10, 0x10, 0x1e, 0x11, 0x11, 0x11, 0x1e}},
      {'c', {0x00, 0x00, 0x0e, 0x11, 0x10, 0x11, 0x0e}},
      {'d', {0x01, 0x01, 0x0f, 0x11, 0x11, 0x11, 0x0f}},
      {'e', {0x00, 0x00, 0x0e, 0x11, 0x1f, 0x10, 0x0e}},
      {'f', {0x06, 0x09, 0x08, 0x1c, 0x08, 0x08, 0x08}},
      {'g', {0x00, 0x0f, 0x11, 0x11, 0x0f, 0x01, 0x0e}},
      {'h', {0x10, 0x10, 0x1e, 0x11, 0x11, 0x11, 0x11}},
      {'i', {0x04, 0x00, 0x0c, 0x04, 0x04, 0x04, 0x0e}},
      {'j', {0x02, 0x00, 0x06, 0x02, 0x02, 0x12, 0x0c}},
      {'k', {0x10, 0x10, 0x12, 0x14, 0x18, 0x14, 0x12}},
      {'l', {0x0c, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
      {'m', {0x00, 0x00, 0x1a, 0x15, 0x15, 0x15, 0x15}},
      {'n', {0x00, 0x00, 0x1e, 0x11, 0x11, 0x11, 0x11}},
      {'o', {0x00, 0x00, 0x0e, 0x11, 0x11, 0x11, 0x0e}},
      {'p', {0x00, 0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10}},
      {'q', {0x00, 0x0f, 0x11, 0x11, 0x0f, 0x01, 0x01}},
      {'r', {0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10}},
      {'s', {0x00, 0x00, 0x0f, 0x10, 0x0e, 0x01, 0x1e}},
      {'t', {0x08, 0x08, 0x1c, 0x08, 0x08, 0x09, 0x06}},
      {'u', {0x00, 0x00, 0x11, 0x11, 0x11, 0x13, 0x0d}},
      {'v', {0x00, 0x00, 0x11, 0x11, 0x11, 0x0a, 0x04}},
      {'w', {0x00, 0x00, 0x15, 0x15, 0x15, 0x15, 0x0a}},
      {'x', {0x00, 0x00, 0x11, 0x0a, 0x04, 0x0a, 0x11}},
      {'y', {0x00, 0x11, 0x11, 0x0f, 0x01, 0x11, 0x0e}},
      {'z', {0x00, 0x00, 0x1f, 0x02, 0x04, 0x08, 0x1f}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
      {',', {0x00, 0x00, 0x00, 0x00, 0x0c, 0x04, 0x08}},
      {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
      {'+', {0x00, 0x04, 0x04, 0x1f, 0x04, 0x04, 0x00}},
      {':', {0x00, 0x0c, 0x0c, 0x00, 0x0c, 0x0c, 0x00}},
      {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
      {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
      {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
      {'=', {0x00, 0x00, 0x1f, 0x00, 0x1f, 0x00, 0x00}},
      {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}},
      {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
  };
  return glyphs;
}

}  // namespace

int Canvas::text_width(const std::string& s, int scale) {
  return static_cast<int>(s.size()) * 6 * scale;
}

void Canvas::text(int x, int y, const std::string& s, Color c, int scale) {
  int cx = x;
  for (char raw : s) {
    char ch = raw;
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    auto it = font().find(ch);
    if (it == font().end()) it = font().find('.');
    const auto& glyph = it->second;
    for (int row = 0; row < 7; ++row) {
      for (int col = 0; col < 5; ++col) {
        if (glyph[static_cast<std::size_t>(row)] & (1 << (4 - col))) {
          fill_rect(cx + col * scale, y + row * scale, scale, scale, c);
        }
      }
    }
    cx += 6 * scale;
  }
}

void Canvas::save_png(const std::filesystem::path& file) const {
  PixelBuffer px;
  px.channels = 3;
  px.width = width_;
  px.height = height_;
  px.data = rgb_;
  write_png(file, px);
}

void render_loss_curves(const std::vector<std::array<double, 3>>& rows,
                        const std::string& title, const std::filesystem::path& file) {
  if (rows.empty()) throw std::invalid_argument("render_loss_curves: no rows");
  const int W = 640, H = 480;
  const int left = 70, right = 20, top = 40, bottom = 50;
  Canvas canvas(W, H);
  const Color black{0, 0, 0}, grid{220, 220, 220};
  const Color train_color{31, 119, 180}, val_color{255, 127, 14};

  double lo = rows[0][1], hi = rows[0][1];
  for (const auto& r : rows) {
    lo = std::min({lo, r[1], r[2]});
    hi = std::max({hi, r[1], r[2]});
  }
  if (hi - lo < 1e-12) {
    hi += 0.5;
    lo -= 0.5;
  }
  const double margin = 0.05 * (hi - lo);
  lo -= margin;
  hi += margin;

  const double x_min = rows.front()[0], x_max = std::max(rows.back()[0], x_min + 1e-9);
  auto px = [&](double epoch) {
    return left + static_cast<int>((epoch - x_min) / (x_max - x_min) * (W - left - right));
  };
  auto py = [&](double loss) {
    return top + static_cast<int>((hi - loss) / (hi - lo) * (H - top - bottom));
  };

  // horizontal grid + y tick labels
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    const int y = py(v);
    canvas.line(left, y, W - right, y, grid);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    canvas.text(6, y - 3, buf, black);
  }
  // x ticks, one per epoch (thinned if crowded)
  const std::size_t step = std::max<std::size_t>(1, rows.size() / 10);
  for (std::size_t i = 0; i < rows.size(); i += step) {
    const int x = px(rows[i][0]);
    canvas.line(x, H - bottom, x, H - bottom + 4, black);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%d", static_cast<int>(rows[i][0]));
    canvas.text(x - 3, H - bottom + 8, buf, black);
  }
  canvas.line(left, top, left, H - bottom, black);
  canvas.line(left, H - bottom, W - right, H - bottom, black);

  for (std::size_t i = 1; i < rows.size(); ++i) {
    canvas.line(px(rows[i - 1][0]), py(rows[i - 1][1]), px(rows[i][0]), py(rows[i][1]),
                train_color);
    canvas.line(px(rows[i - 1][0]), py(rows[i - 1][2]), px(rows[i][0]), py(rows[i][2]),
                val_color);
  }
  for (const auto& r : rows) {
    canvas.fill_rect(px(r[0]) - 1, py(r[1]) - 1, 3, 3, train_color);
    canvas.fill_rect(px(r[0]) - 1, py(r[2]) - 1, 3, 3, val_color);
  }

  canvas.text(left, 12, title, black);
  canvas.fill_rect(left, 26, 10, 4, train_color);
  canvas.text(left + 14, 22, "train", black);
  canvas.fill_rect(left + 80, 26, 10, 4, val_color);
  canvas.text(left + 94, 22, "validation", black);
  canvas.text(W / 2 - 18, H - 14, "epoch", black);

  canvas.save_png(file);
}

void render_frequency_chart(const std::vector<std::pair<std::string, std::size_t>>& words,
                            const std::string& title, const std::filesystem::path& file) {
  if (words.empty()) throw std::invalid_argument("render_frequency_chart: no words");
  const int row_h = 14, left = 110, right = 60;
  const int W = 640, H = 40 + row_h * static_cast<int>(words.size());
  Canvas canvas(W, H);
  const Color black{0, 0, 0}, bar{31, 119, 180};
  canvas.text(10, 10, title, black);
  std::size_t max_count = 1;
  for (const auto& [w, c] : words) max_count = std::max(max_count, c);
  for (std::size_t i = 0; i < words.size(); ++i) {
    const int y = 30 + static_cast<int>(i) * row_h;
    canvas.text(8, y + 2, words[i].first.substr(0, 16), black);
    const int len = static_cast<int>(static_cast<double>(words[i].second) / max_count *
                                     (W - left - right));
    canvas.fill_rect(left, y, std::max(len, 1), row_h - 4, bar);
    canvas.text(left + len + 4, y + 2, std::to_string(words[i].second), black);
  }
  canvas.save_png(file);
}

}  // namespace rrg
