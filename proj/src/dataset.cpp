#include "scenediff/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "scenediff/errors.hpp"
#include "scenediff/labels.hpp"

namespace scenediff {

namespace {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool has_complete_map_set(const std::filesystem::path& dir) {
  for (const char* name : kMapNames)
    if (!std::filesystem::exists(dir / (std::string(name) + ".png"))) return false;
  return true;
}

}  // namespace

PairRecord load_pair(const std::filesystem::path& pair_dir, bool prefer_labels) {
  const auto before_path = pair_dir / "before.png";
  const auto after_path = pair_dir / "after.png";
  if (!std::filesystem::exists(before_path)) throw IoError("missing file " + before_path.string());
  if (!std::filesystem::exists(after_path)) throw IoError("missing file " + after_path.string());

  PairRecord rec;
  rec.pair.before = load_png(before_path);
  rec.pair.after = load_png(after_path);
  rec.pair.id = pair_dir.filename().string();
  if (rec.pair.before.channels != 3 || rec.pair.after.channels != 3)
    throw FormatError("pair " + pair_dir.string() + ": before/after must be RGB PNGs");
  if (rec.pair.before.height != rec.pair.after.height ||
      rec.pair.before.width != rec.pair.after.width)
    throw ShapeError("pair " + pair_dir.string() + ": before is " +
                     std::to_string(rec.pair.before.height) + "x" +
                     std::to_string(rec.pair.before.width) + " but after is " +
                     std::to_string(rec.pair.after.height) + "x" +
                     std::to_string(rec.pair.after.width));

  const auto labels_path = pair_dir / "labels.json";
  const bool labels_exist = std::filesystem::exists(labels_path);
  const bool use_labels =
      labels_exist && (prefer_labels || !has_complete_map_set(pair_dir));
  if (use_labels) {
    const auto labels =
        parse_labels(read_text_file(labels_path), rec.pair.before.width, rec.pair.before.height);
    rec.maps = rasterize(labels, rec.pair.before.height, rec.pair.before.width);
  } else if (has_complete_map_set(pair_dir)) {
    // cached map PNGs win over labels.json unless re-derivation was asked for
    rec.maps = load_maps(pair_dir);
  } else {
    throw IoError("pair " + pair_dir.string() +
                  ": need labels.json or the four map PNGs (removed/added/changed/notchanged)");
  }

  if (rec.maps.height != rec.pair.before.height || rec.maps.width != rec.pair.before.width)
    throw ShapeError("pair " + pair_dir.string() + ": maps are " + std::to_string(rec.maps.height) +
                     "x" + std::to_string(rec.maps.width) + " but images are " +
                     std::to_string(rec.pair.before.height) + "x" +
                     std::to_string(rec.pair.before.width));
  return rec;
}

void save_pair(const std::filesystem::path& pair_dir, const ImagePair& pair,
               const ChangeMaps& maps) {
  std::error_code ec;
  std::filesystem::create_directories(pair_dir, ec);
  save_png(pair.before, pair_dir / "before.png");
  save_png(pair.after, pair_dir / "after.png");
  save_maps(maps, pair_dir);
}

std::vector<std::filesystem::path> list_pair_dirs(const std::filesystem::path& root) {
  const auto pairs_root = root / "pairs";
  if (!std::filesystem::is_directory(pairs_root))
    throw IoError("dataset root " + root.string() + " has no pairs/ directory");
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(pairs_root))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

std::vector<PairRecord> load_dataset(const std::filesystem::path& root, bool prefer_labels) {
  std::vector<PairRecord> out;
  for (const auto& dir : list_pair_dirs(root)) out.push_back(load_pair(dir, prefer_labels));
  return out;
}

std::pair<ImagePair, ChangeMaps> resize_pair(const ImagePair& pair, const ChangeMaps& maps,
                                             int height, int width) {
  ImagePair resized;
  resized.id = pair.id;
  resized.before = resize_bilinear(pair.before, height, width);
  resized.after = resize_bilinear(pair.after, height, width);
  return {std::move(resized), resize_nearest(maps, height, width)};
}

Tensor4 pairs_to_tensor(std::span<const ImagePair> pairs) {
  if (pairs.empty()) throw ValueError("pairs_to_tensor: empty batch");
  const int h = pairs[0].before.height, w = pairs[0].before.width;
  Tensor4 out(static_cast<int>(pairs.size()), 6, h, w);
  for (size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.before.height != h || p.before.width != w || p.before.channels != 3 ||
        p.after.channels != 3)
      throw ShapeError("pairs_to_tensor: pair " + p.id + " has inconsistent dims/channels");
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) {
          out.at(static_cast<int>(i), c, y, x) = p.before.at(y, x, c);
          out.at(static_cast<int>(i), c + 3, y, x) = p.after.at(y, x, c);
        }
  }
  return out;
}

Tensor4 maps_to_tensor(std::span<const ChangeMaps> maps) {
  if (maps.empty()) throw ValueError("maps_to_tensor: empty batch");
  const int h = maps[0].height, w = maps[0].width;
  Tensor4 out(static_cast<int>(maps.size()), 4, h, w);
  for (size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].height != h || maps[i].width != w)
      throw ShapeError("maps_to_tensor: inconsistent map dims in batch");
    for (int m = 0; m < 4; ++m) {
      const auto& plane = maps[i].maps[static_cast<size_t>(m)];
      float* dst = out.plane(static_cast<int>(i), m);
      for (size_t j = 0; j < plane.size(); ++j) dst[j] = plane[j] ? 1.0f : 0.0f;
    }
  }
  return out;
}

}  // namespace scenediff
