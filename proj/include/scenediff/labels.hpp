#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scenediff/changemaps.hpp"

namespace scenediff {

enum class LabelClass { removed, added, changed };

LabelClass label_class_from_string(std::string_view name);
const char* to_string(LabelClass c);

// Class-tagged polygon in pixel coordinates of the registered pair's shared
// frame. At least 3 points.
struct PolygonLabel {
  LabelClass cls;
  std::vector<std::array<float, 2>> points;  // (x, y)
};

// Parses the labels JSON: {"version":1,"labels":[{"class":...,"points":[[x,y],...]}]}.
// Checks class names, point counts and coordinate finiteness.
std::vector<PolygonLabel> parse_labels(std::string_view json_text);
// Additionally rejects points outside [0, width] x [0, height].
std::vector<PolygonLabel> parse_labels(std::string_view json_text, int width, int height);

// Pixel-center even-odd fill: map_c(y,x) = 1 iff the center (x+0.5, y+0.5)
// lies inside some polygon of class c; a center exactly on a crossing follows
// the strict left-ray rule. notchanged is derived by complement.
ChangeMaps rasterize(std::span<const PolygonLabel> labels, int height, int width);

}  // namespace scenediff
