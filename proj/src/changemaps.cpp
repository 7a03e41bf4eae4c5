#include "scenediff/changemaps.hpp"

#include <algorithm>

#include "scenediff/errors.hpp"
#include "scenediff/image.hpp"

namespace scenediff {

ChangeMaps ChangeMaps::make(int height, int width) {
  if (height < 1 || width < 1) throw ShapeError("change maps need dims >= 1");
  ChangeMaps m;
  m.height = height;
  m.width = width;
  const size_t count = static_cast<size_t>(height) * width;
  for (auto& plane : m.maps) plane.assign(count, 0);
  m.map(MapChannel::notchanged).assign(count, 1);
  return m;
}

void ChangeMaps::derive_notchanged() {
  const auto& r = map(MapChannel::removed);
  const auto& a = map(MapChannel::added);
  const auto& c = map(MapChannel::changed);
  auto& n = map(MapChannel::notchanged);
  for (size_t i = 0; i < n.size(); ++i) n[i] = (r[i] | a[i] | c[i]) ? 0 : 1;
}

bool ChangeMaps::invariants_hold() const {
  const size_t count = static_cast<size_t>(height) * width;
  for (const auto& plane : maps) {
    if (plane.size() != count) return false;
    for (uint8_t v : plane)
      if (v > 1) return false;
  }
  const auto& r = map(MapChannel::removed);
  const auto& a = map(MapChannel::added);
  const auto& c = map(MapChannel::changed);
  const auto& n = map(MapChannel::notchanged);
  for (size_t i = 0; i < count; ++i)
    if (n[i] != (std::max({r[i], a[i], c[i]}) ? 0 : 1)) return false;
  return true;
}

void save_maps(const ChangeMaps& maps, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  for (size_t i = 0; i < maps.maps.size(); ++i) {
    Image img = Image::make(maps.height, maps.width, 1);
    const auto& plane = maps.maps[i];
    for (size_t j = 0; j < plane.size(); ++j) img.pixels[j] = plane[j] ? 1.0f : 0.0f;
    save_png(img, dir / (std::string(kMapNames[i]) + ".png"));
  }
}

ChangeMaps load_maps(const std::filesystem::path& dir) {
  ChangeMaps out;
  for (size_t i = 0; i < kMapNames.size(); ++i) {
    const auto path = dir / (std::string(kMapNames[i]) + ".png");
    if (!std::filesystem::exists(path)) throw IoError("missing map file " + path.string());
    const Image img = load_png(path);
    if (img.channels != 1)
      throw FormatError("map " + path.string() + " must be grayscale, has " +
                        std::to_string(img.channels) + " channels");
    if (i == 0) {
      out = ChangeMaps::make(img.height, img.width);
    } else if (img.height != out.height || img.width != out.width) {
      throw ShapeError("map " + path.string() + " dims disagree with removed.png");
    }
    auto& plane = out.maps[i];
    for (size_t j = 0; j < plane.size(); ++j)
      plane[j] = img.pixels[j] >= (128.0f / 255.0f) ? 1 : 0;
  }
  return out;
}

ChangeMaps resize_nearest(const ChangeMaps& maps, int out_height, int out_width) {
  ChangeMaps out = ChangeMaps::make(out_height, out_width);
  const double sy = static_cast<double>(maps.height) / out_height;
  const double sx = static_cast<double>(maps.width) / out_width;
  for (size_t m = 0; m < maps.maps.size(); ++m) {
    for (int oy = 0; oy < out_height; ++oy) {
      const int src_y = std::min(maps.height - 1, static_cast<int>((oy + 0.5) * sy));
      for (int ox = 0; ox < out_width; ++ox) {
        const int src_x = std::min(maps.width - 1, static_cast<int>((ox + 0.5) * sx));
        out.maps[m][static_cast<int64_t>(oy) * out_width + ox] =
            maps.maps[m][static_cast<int64_t>(src_y) * maps.width + src_x];
      }
    }
  }
  return out;
}

}  // namespace scenediff
