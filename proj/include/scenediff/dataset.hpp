#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scenediff/changemaps.hpp"
#include "scenediff/image.hpp"
#include "scenediff/tensor.hpp"

namespace scenediff {

// Two registered RGB photographs of one scene (before = x1, after = x2).
struct ImagePair {
  Image before;
  Image after;
  std::string id;
};

struct PairRecord {
  ImagePair pair;
  ChangeMaps maps;
};

// Dataset layout: <root>/pairs/<id>/{before.png, after.png,
// labels.json?, removed.png?, added.png?, changed.png?, notchanged.png?}.
// A complete set of map PNGs wins over labels.json; prefer_labels flips that
// precedence and re-rasterizes the annotations when they are present.
PairRecord load_pair(const std::filesystem::path& pair_dir, bool prefer_labels = false);
void save_pair(const std::filesystem::path& pair_dir, const ImagePair& pair,
               const ChangeMaps& maps);

// Sorted pair directories under <root>/pairs.
std::vector<std::filesystem::path> list_pair_dirs(const std::filesystem::path& root);
std::vector<PairRecord> load_dataset(const std::filesystem::path& root,
                                     bool prefer_labels = false);

// Images bilinear, maps nearest-neighbour (stays binary).
std::pair<ImagePair, ChangeMaps> resize_pair(const ImagePair& pair, const ChangeMaps& maps,
                                             int height, int width);

// (n, 6, h, w): before RGB in channels 0-2, after RGB in channels 3-5.
Tensor4 pairs_to_tensor(std::span<const ImagePair> pairs);
// (n, 4, h, w) float {0,1} in ChangeMaps channel order.
Tensor4 maps_to_tensor(std::span<const ChangeMaps> maps);

}  // namespace scenediff
