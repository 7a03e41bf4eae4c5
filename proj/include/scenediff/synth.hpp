#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "scenediff/dataset.hpp"
#include "scenediff/image.hpp"
#include "scenediff/rng.hpp"

namespace scenediff {

// Cut-out object with a straight-alpha mask, used for synthetic pasting.
struct ObjectSprite {
  Image rgb;                  // 3 channels
  std::vector<float> alpha;   // height*width, values in [0, 1]
  std::string name;

  int height() const { return rgb.height; }
  int width() const { return rgb.width; }
  void validate() const;
};

struct SynthSpec {
  uint64_t seed = 0;
  int objects_min = 1;
  int objects_max = 4;
  float brightness_lo = 0.7f;
  float brightness_hi = 1.3f;
  float noise_sigma_lo = 0.0f;
  float noise_sigma_hi = 0.05f;
  int feather_radius = 2;
  float change_overlap_prob = 0.3f;

  void validate() const;
};

// Brightness scale (clamped to [0,1]), Gaussian pixel noise inside the alpha
// footprint (alpha >= 0.5), then a zero-padded box blur of the alpha edge.
ObjectSprite augment_sprite(const ObjectSprite& s, float brightness, float noise_sigma,
                            int feather, Rng& rng);

struct PasteResult {
  Image image;
  std::vector<uint8_t> footprint;  // height*width of the target image
};

// Alpha-composites the sprite with top-left anchor (x, y); the sprite may
// hang over the frame. Footprint marks in-frame pixels with alpha >= 0.5.
// A sprite fully outside the frame is an error.
PasteResult paste(const Image& img, const ObjectSprite& s, int x, int y);

// Builds one synthetic pair: objects pasted into the before image mark the
// removed map, objects pasted into the after image mark the added map,
// changed = removed AND added, notchanged the complement. Deterministic for
// fixed (base, bank, spec.seed). forced_sprite >= 0 pins the first object's
// bank index (used by generate_dataset for coverage).
std::pair<ImagePair, ChangeMaps> generate_pair(const ImagePair& base,
                                               std::span<const ObjectSprite> bank,
                                               const SynthSpec& spec, int forced_sprite = -1);

struct ManifestEntry {
  std::string id;
  uint64_t seed;
};

struct Manifest {
  SynthSpec spec;
  std::vector<ManifestEntry> pairs;
};

// Writes `count` pair directories in the dataset layout (map PNGs included)
// plus manifest.json. Pair i uses seed spec.seed ^ i and force-includes
// sprite i % bank_size, so every sprite appears once count reaches the bank
// size.
Manifest generate_dataset(std::span<const ImagePair> bases, std::span<const ObjectSprite> bank,
                          const SynthSpec& spec, int count, const std::filesystem::path& out_root);

// <bank>/<name>.png, RGBA (alpha = mask) or RGB (fully opaque); sorted by name.
std::vector<ObjectSprite> load_sprite_bank(const std::filesystem::path& dir);

}  // namespace scenediff
