#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace scenediff {

// Fixed channel order of the four per-pixel change bitmaps.
enum class MapChannel { removed = 0, added = 1, changed = 2, notchanged = 3 };

inline constexpr std::array<const char*, 4> kMapNames{"removed", "added", "changed", "notchanged"};

// Four binary H x W maps. Invariants: values in {0,1}; notchanged is the
// complement 1 - max(removed, added, changed) at every pixel.
struct ChangeMaps {
  int height = 0;
  int width = 0;
  std::array<std::vector<uint8_t>, 4> maps;

  // removed/added/changed all 0, notchanged all 1
  static ChangeMaps make(int height, int width);

  std::vector<uint8_t>& map(MapChannel c) { return maps[static_cast<size_t>(c)]; }
  const std::vector<uint8_t>& map(MapChannel c) const { return maps[static_cast<size_t>(c)]; }

  uint8_t at(MapChannel c, int y, int x) const {
    return map(c)[static_cast<int64_t>(y) * width + x];
  }
  void set(MapChannel c, int y, int x, uint8_t v) {
    map(c)[static_cast<int64_t>(y) * width + x] = v;
  }

  // Recomputes notchanged = 1 - max(removed, added, changed).
  void derive_notchanged();
  // true iff all values are 0/1 and the complement invariant holds
  bool invariants_hold() const;

  bool operator==(const ChangeMaps&) const = default;
};

// Four 8-bit grayscale PNGs (removed.png, added.png, changed.png,
// notchanged.png) with 0 -> 0 and 1 -> 255; loading thresholds at 128.
void save_maps(const ChangeMaps& maps, const std::filesystem::path& dir);
ChangeMaps load_maps(const std::filesystem::path& dir);

ChangeMaps resize_nearest(const ChangeMaps& maps, int out_height, int out_width);

}  // namespace scenediff
