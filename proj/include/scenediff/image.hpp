#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace scenediff {

// Interleaved row-major (y, x, channel) float image with values in [0, 1].
// Channels: 1 = grayscale, 3 = RGB, 4 = RGBA.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> pixels;

  static Image make(int height, int width, int channels, float fill = 0.0f);

  int64_t index(int y, int x, int c) const {
    return (static_cast<int64_t>(y) * width + x) * channels + c;
  }
  float& at(int y, int x, int c) { return pixels[index(y, x, c)]; }
  float at(int y, int x, int c) const { return pixels[index(y, x, c)]; }

  bool operator==(const Image&) const = default;
};

// 8-bit PNG I/O. Loading expands palette/16-bit files to 8-bit and keeps the
// channel count of the file; values are normalized to [0, 1].
Image load_png(const std::filesystem::path& path);
void save_png(const Image& img, const std::filesystem::path& path);

Image resize_bilinear(const Image& img, int out_height, int out_width);

}  // namespace scenediff
