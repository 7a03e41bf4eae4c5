#include "scenediff/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "scenediff/errors.hpp"

namespace scenediff {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
  (void)png;
  throw FormatError(std::string("png: ") + msg);
}

void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace

Image Image::make(int height, int width, int channels, float fill) {
  if (height < 0 || width < 0 || channels < 1)
    throw ShapeError("image dimensions must be non-negative with >= 1 channel");
  Image img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.pixels.assign(static_cast<size_t>(height) * width * channels, fill);
  return img;
}

Image load_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                           png_warning_handler);
  if (!png) throw IoError("png: failed to allocate read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png: failed to allocate info struct");
  }

  try {
    png_init_io(png, file.get());
    png_read_info(png, info);

    png_set_expand(png);  // palette -> rgb, gray<8 -> 8, tRNS -> alpha
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    png_read_update_info(png, info);

    const int height = static_cast<int>(png_get_image_height(png, info));
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int channels = static_cast<int>(png_get_channels(png, info));

    std::vector<uint8_t> row(static_cast<size_t>(width) * channels);
    Image img = Image::make(height, width, channels);
    for (int y = 0; y < height; ++y) {
      png_read_row(png, row.data(), nullptr);
      float* dst = img.pixels.data() + static_cast<int64_t>(y) * width * channels;
      for (size_t i = 0; i < row.size(); ++i) dst[i] = static_cast<float>(row[i]) / 255.0f;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
}

void save_png(const Image& img, const std::filesystem::path& path) {
  int color_type;
  switch (img.channels) {
    case 1: color_type = PNG_COLOR_TYPE_GRAY; break;
    case 3: color_type = PNG_COLOR_TYPE_RGB; break;
    case 4: color_type = PNG_COLOR_TYPE_RGBA; break;
    default:
      throw ValueError("save_png: unsupported channel count " + std::to_string(img.channels));
  }
  if (img.height < 1 || img.width < 1) throw ValueError("save_png: empty image");

  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw IoError("cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                            png_warning_handler);
  if (!png) throw IoError("png: failed to allocate write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png: failed to allocate info struct");
  }

  try {
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> row(static_cast<size_t>(img.width) * img.channels);
    for (int y = 0; y < img.height; ++y) {
      const float* src = img.pixels.data() + static_cast<int64_t>(y) * img.width * img.channels;
      for (size_t i = 0; i < row.size(); ++i) {
        const float v = std::clamp(src[i], 0.0f, 1.0f);
        row[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
}

Image resize_bilinear(const Image& img, int out_height, int out_width) {
  if (out_height < 1 || out_width < 1)
    throw ValueError("resize_bilinear: target dims must be >= 1");
  Image out = Image::make(out_height, out_width, img.channels);
  const double sy = static_cast<double>(img.height) / out_height;
  const double sx = static_cast<double>(img.width) / out_width;
  for (int oy = 0; oy < out_height; ++oy) {
    const double src_y = (oy + 0.5) * sy - 0.5;
    const int y0 = static_cast<int>(std::floor(src_y));
    const double dy = src_y - y0;
    const int y0c = std::clamp(y0, 0, img.height - 1);
    const int y1c = std::clamp(y0 + 1, 0, img.height - 1);
    for (int ox = 0; ox < out_width; ++ox) {
      const double src_x = (ox + 0.5) * sx - 0.5;
      const int x0 = static_cast<int>(std::floor(src_x));
      const double dx = src_x - x0;
      const int x0c = std::clamp(x0, 0, img.width - 1);
      const int x1c = std::clamp(x0 + 1, 0, img.width - 1);
      for (int c = 0; c < img.channels; ++c) {
        const double top = (1.0 - dx) * img.at(y0c, x0c, c) + dx * img.at(y0c, x1c, c);
        const double bottom = (1.0 - dx) * img.at(y1c, x0c, c) + dx * img.at(y1c, x1c, c);
        out.at(oy, ox, c) = static_cast<float>((1.0 - dy) * top + dy * bottom);
      }
    }
  }
  return out;
}

}  // namespace scenediff
