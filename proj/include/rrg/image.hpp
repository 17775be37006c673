#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace rrg {

// Channel-planar image, values in [0,1].
struct ImageTensor {
  int channels = 0, height = 0, width = 0;
  std::vector<Eigen::MatrixXd> planes;  // one H x W matrix per channel

  static ImageTensor zero(int channels, int height, int width);
};

// 8-bit interleaved pixel buffer as read from / written to PNG files.
struct PixelBuffer {
  int channels = 0, height = 0, width = 0;  // channels: 1 (gray) or 3 (rgb)
  std::vector<std::uint8_t> data;           // row-major, interleaved
  std::uint8_t& at(int y, int x, int c) { return data[static_cast<std::size_t>((y * width + x) * channels + c)]; }
  std::uint8_t at(int y, int x, int c) const { return data[static_cast<std::size_t>((y * width + x) * channels + c)]; }
};

PixelBuffer read_png(const std::filesystem::path& file);
void write_png(const std::filesystem::path& file, const PixelBuffer& pixels);

ImageTensor to_tensor(const PixelBuffer& pixels);
PixelBuffer to_pixels(const ImageTensor& image);

ImageTensor resize_bilinear(const ImageTensor& image, int out_height, int out_width);

// Loader used by the encoders: read PNG, resize to side x side, normalize to
// [0,1] and replicate grayscale across `channels` planes.
ImageTensor load_image(const std::filesystem::path& file, int side, int channels);

}  // namespace rrg
