#pragma once

// Brute-force even-odd point-in-polygon test, evaluated independently per
// pixel. Oracle for the scanline rasterizer.

#include <array>
#include <span>
#include <vector>

#include "scenediff/labels.hpp"
#include "scenediff/rng.hpp"

namespace oracle {

inline bool point_in_polygon_evenodd(double px, double py,
                                     std::span<const std::array<float, 2>> pts) {
  bool inside = false;
  for (size_t i = 0; i < pts.size(); ++i) {
    const auto& p1 = pts[i];
    const auto& p2 = pts[(i + 1) % pts.size()];
    const double y1 = p1[1], y2 = p2[1];
    if ((y1 <= py && py < y2) || (y2 <= py && py < y1)) {
      const double xc = p1[0] + (py - y1) * (static_cast<double>(p2[0]) - p1[0]) / (y2 - y1);
      if (xc < px) inside = !inside;
    }
  }
  return inside;
}

inline scenediff::ChangeMaps rasterize_reference(
    std::span<const scenediff::PolygonLabel> labels, int height, int width) {
  auto out = scenediff::ChangeMaps::make(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (const auto& label : labels)
        if (point_in_polygon_evenodd(x + 0.5, y + 0.5, label.points))
          out.set(static_cast<scenediff::MapChannel>(static_cast<int>(label.cls)), y, x, 1);
  out.derive_notchanged();
  return out;
}

inline scenediff::PolygonLabel random_polygon(scenediff::Rng& rng, int height, int width) {
  scenediff::PolygonLabel label;
  label.cls = static_cast<scenediff::LabelClass>(rng.uniform_int(0, 2));
  const int n = static_cast<int>(rng.uniform_int(3, 8));
  for (int i = 0; i < n; ++i)
    label.points.push_back({static_cast<float>(rng.uniform(0.0, width)),
                            static_cast<float>(rng.uniform(0.0, height))});
  return label;
}

}  // namespace oracle
