#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rrg/image.hpp"

namespace rrg {

struct Color {
  std::uint8_t r = 0, g = 0, b = 0;
};

// Minimal RGB raster canvas with a built-in 5x7 font; enough for the loss
// curves and frequency charts the CLI emits.
class Canvas {
 public:
  Canvas(int width, int height, Color background = {255, 255, 255});

  int width() const { return width_; }
  int height() const { return height_; }

  void set(int x, int y, Color c);
  void line(int x0, int y0, int x1, int y1, Color c);
  void fill_rect(int x0, int y0, int w, int h, Color c);
  // scale multiplies the 5x7 glyph cells
  void text(int x, int y, const std::string& s, Color c, int scale = 1);
  static int text_width(const std::string& s, int scale = 1);

  void save_png(const std::filesystem::path& file) const;

 private:
  int width_, height_;
  std::vector<std::uint8_t> rgb_;
};

// Two-line training/validation loss plot; rows are (epoch, train, val).
void render_loss_curves(const std::vector<std::array<double, 3>>& rows,
                        const std::string& title, const std::filesystem::path& file);

// Horizontal bar chart of the top word frequencies.
void render_frequency_chart(const std::vector<std::pair<std::string, std::size_t>>& words,
                            const std::string& title, const std::filesystem::path& file);

}  // namespace rrg
