#include "scenediff/labels.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "scenediff/errors.hpp"

namespace scenediff {

LabelClass label_class_from_string(std::string_view name) {
  if (name == "removed") return LabelClass::removed;
  if (name == "added") return LabelClass::added;
  if (name == "changed") return LabelClass::changed;
  throw FormatError("unknown label class \"" + std::string(name) + "\"");
}

const char* to_string(LabelClass c) {
  switch (c) {
    case LabelClass::removed: return "removed";
    case LabelClass::added: return "added";
    case LabelClass::changed: return "changed";
  }
  return "?";
}

std::vector<PolygonLabel> parse_labels(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("labels json: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("labels") || !doc["labels"].is_array())
    throw FormatError("labels json: expected object with a \"labels\" array");
  if (doc.contains("version") && doc["version"] != 1)
    throw FormatError("labels json: unsupported version");

  std::vector<PolygonLabel> out;
  size_t idx = 0;
  for (const auto& entry : doc["labels"]) {
    if (!entry.is_object() || !entry.contains("class") || !entry.contains("points"))
      throw FormatError("labels json: label " + std::to_string(idx) +
                        " needs \"class\" and \"points\"");
    PolygonLabel label;
    label.cls = label_class_from_string(entry["class"].get<std::string>());
    const auto& pts = entry["points"];
    if (!pts.is_array() || pts.size() < 3)
      throw FormatError("labels json: label " + std::to_string(idx) +
                        " needs at least 3 points, has " + std::to_string(pts.size()));
    for (const auto& pt : pts) {
      if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
        throw FormatError("labels json: label " + std::to_string(idx) +
                          " has a malformed point (expected [x, y])");
      const float x = pt[0].get<float>();
      const float y = pt[1].get<float>();
      if (!std::isfinite(x) || !std::isfinite(y))
        throw FormatError("labels json: label " + std::to_string(idx) + " has non-finite point");
      label.points.push_back({x, y});
    }
    out.push_back(std::move(label));
    ++idx;
  }
  return out;
}

std::vector<PolygonLabel> parse_labels(std::string_view json_text, int width, int height) {
  auto labels = parse_labels(json_text);
  for (size_t li = 0; li < labels.size(); ++li) {
    const auto& pts = labels[li].points;
    for (size_t pi = 0; pi < pts.size(); ++pi) {
      const auto [x, y] = pts[pi];
      if (x < 0.0f || x > static_cast<float>(width) || y < 0.0f || y > static_cast<float>(height))
        throw FormatError("labels json: label " + std::to_string(li) + " point " +
                          std::to_string(pi) + " (" + std::to_string(x) + "," + std::to_string(y) +
                          ") outside [0," + std::to_string(width) + "]x[0," +
                          std::to_string(height) + "]");
    }
  }
  return labels;
}

ChangeMaps rasterize(std::span<const PolygonLabel> labels, int height, int width) {
  ChangeMaps out = ChangeMaps::make(height, width);
  std::vector<double> crossings;
  for (const auto& label : labels) {
    auto& plane = out.map(static_cast<MapChannel>(label.cls));
    const auto& pts = label.points;
    const size_t n = pts.size();
    for (int y = 0; y < height; ++y) {
      const double py = y + 0.5;
      crossings.clear();
      for (size_t i = 0; i < n; ++i) {
        const auto& p1 = pts[i];
        const auto& p2 = pts[(i + 1) % n];
        const double y1 = p1[1], y2 = p2[1];
        if ((y1 <= py && py < y2) || (y2 <= py && py < y1)) {
          const double x1 = p1[0], x2 = p2[0];
          crossings.push_back(x1 + (py - y1) * (x2 - x1) / (y2 - y1));
        }
      }
      if (crossings.empty()) continue;
      std::sort(crossings.begin(), crossings.end());
      for (int x = 0; x < width; ++x) {
        const double px = x + 0.5;
        // parity of crossings strictly left of the pixel center
        const auto count =
            std::lower_bound(crossings.begin(), crossings.end(), px) - crossings.begin();
        if (count & 1) plane[static_cast<int64_t>(y) * width + x] = 1;
      }
    }
  }
  out.derive_notchanged();
  return out;
}

}  // namespace scenediff
