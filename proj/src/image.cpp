#include "rrg/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace rrg {

ImageTensor ImageTensor::zero(int channels, int height, int width) {
  ImageTensor img;
  img.channels = channels;
  img.height = height;
  img.width = width;
  img.planes.assign(static_cast<std::size_t>(channels), Eigen::MatrixXd::Zero(height, width));
  return img;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

PixelBuffer read_png(const std::filesystem::path& file) {
  FilePtr fp(std::fopen(file.string().c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open image file: " + file.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("failed to decode PNG: " + file.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  PixelBuffer out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = static_cast<int>(png_get_channels(png, info));
  if (out.channels != 1 && out.channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unsupported PNG channel layout in " + file.string());
  }
  out.data.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
  std::vector<png_bytep> rows(static_cast<std::size_t>(out.height));
  const std::size_t stride = static_cast<std::size_t>(out.width) * out.channels;
  for (int y = 0; y < out.height; ++y) rows[static_cast<std::size_t>(y)] = out.data.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png(const std::filesystem::path& file, const PixelBuffer& pixels) {
  if (pixels.channels != 1 && pixels.channels != 3) {
    throw std::invalid_argument("write_png: channels must be 1 or 3");
  }
  FilePtr fp(std::fopen(file.string().c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot write image file: " + file.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed to encode PNG: " + file.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(pixels.width),
               static_cast<png_uint_32>(pixels.height), 8,
               pixels.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(pixels.width) * pixels.channels;
  for (int y = 0; y < pixels.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data.data() + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageTensor to_tensor(const PixelBuffer& pixels) {
  ImageTensor img = ImageTensor::zero(pixels.channels, pixels.height, pixels.width);
  for (int c = 0; c < pixels.channels; ++c) {
    for (int y = 0; y < pixels.height; ++y) {
      for (int x = 0; x < pixels.width; ++x) {
        img.planes[static_cast<std::size_t>(c)](y, x) = pixels.at(y, x, c) / 255.0;
      }
    }
  }
  return img;
}

PixelBuffer to_pixels(const ImageTensor& image) {
  PixelBuffer out;
  out.channels = image.channels;
  out.height = image.height;
  out.width = image.width;
  out.data.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
  for (int c = 0; c < out.channels; ++c) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        const double v = std::min(1.0, std::max(0.0, image.planes[static_cast<std::size_t>(c)](y, x)));
        out.at(y, x, c) = static_cast<std::uint8_t>(v * 255.0 + 0.5);
      }
    }
  }
  return out;
}

ImageTensor resize_bilinear(const ImageTensor& image, int out_height, int out_width) {
  if (out_height < 1 || out_width < 1) {
    throw std::invalid_argument("resize_bilinear: output size must be positive");
  }
  ImageTensor out = ImageTensor::zero(image.channels, out_height, out_width);
  const double sy = static_cast<double>(image.height) / out_height;
  const double sx = static_cast<double>(image.width) / out_width;
  for (int c = 0; c < image.channels; ++c) {
    const auto& src = image.planes[static_cast<std::size_t>(c)];
    auto& dst = out.planes[static_cast<std::size_t>(c)];
    for (int y = 0; y < out_height; ++y) {
      // pixel centers; clamped at the borders
      const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
      const int y0 = std::min(static_cast<int>(fy), image.height - 1);
      const int y1 = std::min(y0 + 1, image.height - 1);
      const double wy = fy - y0;
      for (int x = 0; x < out_width; ++x) {
        const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
        const int x0 = std::min(static_cast<int>(fx), image.width - 1);
        const int x1 = std::min(x0 + 1, image.width - 1);
        const double wx = fx - x0;
        dst(y, x) = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                    wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
      }
    }
  }
  return out;
}

ImageTensor load_image(const std::filesystem::path& file, int side, int channels) {
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("load_image: channels must be 1 or 3");
  }
  ImageTensor img = to_tensor(read_png(file));
  if (img.height != side || img.width != side) {
    img = resize_bilinear(img, side, side);
  }
  if (img.channels != channels) {
    ImageTensor converted = ImageTensor::zero(channels, img.height, img.width);
    if (img.channels == 1) {
      for (int c = 0; c < channels; ++c) converted.planes[static_cast<std::size_t>(c)] = img.planes[0];
    } else {
      // luma average when collapsing rgb to gray
      Eigen::MatrixXd gray = (img.planes[0] + img.planes[1] + img.planes[2]) / 3.0;
      for (int c = 0; c < channels; ++c) converted.planes[static_cast<std::size_t>(c)] = gray;
    }
    img = std::move(converted);
  }
  return img;
}

}  // namespace rrg
