#include "scenediff/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "scenediff/errors.hpp"

namespace scenediff {

void ObjectSprite::validate() const {
  if (rgb.channels != 3) throw ShapeError("sprite " + name + ": rgb must have 3 channels");
  if (static_cast<int64_t>(alpha.size()) != static_cast<int64_t>(rgb.height) * rgb.width)
    throw ShapeError("sprite " + name + ": alpha size does not match rgb dims");
  for (float a : alpha)
    if (!(a >= 0.0f && a <= 1.0f))
      throw ValueError("sprite " + name + ": alpha values must lie in [0,1]");
}

void SynthSpec::validate() const {
  if (objects_min < 0 || objects_max < objects_min)
    throw ValueError("synth spec: objects_per_pair range is not ordered");
  if (!(brightness_lo > 0.0f) || brightness_hi < brightness_lo)
    throw ValueError("synth spec: brightness range must be ordered and positive");
  if (noise_sigma_lo < 0.0f || noise_sigma_hi < noise_sigma_lo)
    throw ValueError("synth spec: noise sigma range is not ordered");
  if (feather_radius < 0) throw ValueError("synth spec: feather radius must be >= 0");
  if (change_overlap_prob < 0.0f || change_overlap_prob > 1.0f)
    throw ValueError("synth spec: change_overlap_prob must lie in [0,1]");
}

ObjectSprite augment_sprite(const ObjectSprite& s, float brightness, float noise_sigma,
                            int feather, Rng& rng) {
  if (!(brightness > 0.0f)) throw ValueError("augment_sprite: brightness must be positive");
  if (feather < 0) throw ValueError("augment_sprite: feather must be >= 0");
  ObjectSprite out = s;

  for (float& v : out.rgb.pixels) v = std::clamp(v * brightness, 0.0f, 1.0f);

  if (noise_sigma > 0.0f) {
    const int h = s.height(), w = s.width();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (s.alpha[static_cast<int64_t>(y) * w + x] < 0.5f) continue;
        for (int c = 0; c < 3; ++c) {
          float& v = out.rgb.at(y, x, c);
          v = std::clamp(v + static_cast<float>(rng.normal(0.0, noise_sigma)), 0.0f, 1.0f);
        }
      }
  }

  if (feather > 0) {
    const int h = s.height(), w = s.width();
    const double norm = 1.0 / ((2.0 * feather + 1) * (2.0 * feather + 1));
    std::vector<float> blurred(out.alpha.size());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;  // out-of-bounds taps count as 0
        for (int dy = -feather; dy <= feather; ++dy) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          for (int dx = -feather; dx <= feather; ++dx) {
            const int sx = x + dx;
            if (sx < 0 || sx >= w) continue;
            acc += out.alpha[static_cast<int64_t>(sy) * w + sx];
          }
        }
        blurred[static_cast<int64_t>(y) * w + x] = static_cast<float>(acc * norm);
      }
    out.alpha = std::move(blurred);
  }
  return out;
}

PasteResult paste(const Image& img, const ObjectSprite& s, int x, int y) {
  if (img.channels != 3) throw ShapeError("paste: target image must have 3 channels");
  const int sw = s.width(), sh = s.height();
  const int x_lo = std::max(0, x), x_hi = std::min(img.width, x + sw);
  const int y_lo = std::max(0, y), y_hi = std::min(img.height, y + sh);
  if (x_lo >= x_hi || y_lo >= y_hi)
    throw ValueError("paste: sprite " + s.name + " at (" + std::to_string(x) + "," +
                     std::to_string(y) + ") lies fully outside the frame");

  PasteResult res;
  res.image = img;
  res.footprint.assign(static_cast<size_t>(img.height) * img.width, 0);
  for (int iy = y_lo; iy < y_hi; ++iy) {
    const int sy = iy - y;
    for (int ix = x_lo; ix < x_hi; ++ix) {
      const int sx = ix - x;
      const float a = s.alpha[static_cast<int64_t>(sy) * sw + sx];
      for (int c = 0; c < 3; ++c) {
        const float bg = img.at(iy, ix, c);
        res.image.at(iy, ix, c) = a * s.rgb.at(sy, sx, c) + (1.0f - a) * bg;
      }
      if (a >= 0.5f) res.footprint[static_cast<int64_t>(iy) * img.width + ix] = 1;
    }
  }
  return res;
}

namespace {

struct Placement {
  int x;
  int y;
};

int64_t overlap_area(int x, int y, int sw, int sh, int frame_w, int frame_h) {
  const int64_t ox = std::max(0, std::min(frame_w, x + sw) - std::max(0, x));
  const int64_t oy = std::max(0, std::min(frame_h, y + sh) - std::max(0, y));
  return ox * oy;
}

// Uniform anchor keeping at least a quarter of the sprite in frame.
Placement place_sprite(Rng& rng, int sw, int sh, int frame_w, int frame_h) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    const int x = static_cast<int>(rng.uniform_int(-sw + 1, frame_w - 1));
    const int y = static_cast<int>(rng.uniform_int(-sh + 1, frame_h - 1));
    if (overlap_area(x, y, sw, sh, frame_w, frame_h) * 4 >= static_cast<int64_t>(sw) * sh)
      return {x, y};
  }
  throw ValueError("no valid sprite placement found in 100 attempts");
}

// Anchor near (x1, y1) whose rect intersects the first sprite's rect; falls
// back to a free placement if the overlap cannot be satisfied.
Placement place_overlapping(Rng& rng, int sw, int sh, int x1, int y1, int s1w, int s1h,
                            int frame_w, int frame_h) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    const int x = x1 + static_cast<int>(rng.uniform_int(-sw / 2, std::max(0, s1w - sw / 2)));
    const int y = y1 + static_cast<int>(rng.uniform_int(-sh / 2, std::max(0, s1h - sh / 2)));
    const bool rects_meet = x < x1 + s1w && x1 < x + sw && y < y1 + s1h && y1 < y + sh;
    if (rects_meet && overlap_area(x, y, sw, sh, frame_w, frame_h) * 4 >=
                          static_cast<int64_t>(sw) * sh)
      return {x, y};
  }
  return place_sprite(rng, sw, sh, frame_w, frame_h);
}

void or_into(std::vector<uint8_t>& dst, const std::vector<uint8_t>& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] |= src[i];
}

}  // namespace

std::pair<ImagePair, ChangeMaps> generate_pair(const ImagePair& base,
                                               std::span<const ObjectSprite> bank,
                                               const SynthSpec& spec, int forced_sprite) {
  spec.validate();
  if (bank.empty()) throw ValueError("generate_pair: sprite bank is empty");
  if (base.before.height != base.after.height || base.before.width != base.after.width)
    throw ShapeError("generate_pair: base images disagree in size");

  const int frame_w = base.before.width, frame_h = base.before.height;
  Rng rng(spec.seed);
  ImagePair out = base;
  ChangeMaps maps = ChangeMaps::make(frame_h, frame_w);
  auto& removed = maps.map(MapChannel::removed);
  auto& added = maps.map(MapChannel::added);

  const int n_objects = static_cast<int>(rng.uniform_int(spec.objects_min, spec.objects_max));
  for (int i = 0; i < n_objects; ++i) {
    const int idx = (i == 0 && forced_sprite >= 0)
                        ? forced_sprite % static_cast<int>(bank.size())
                        : static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(bank.size()) - 1));
    const ObjectSprite sprite =
        augment_sprite(bank[idx], static_cast<float>(rng.uniform(spec.brightness_lo, spec.brightness_hi)),
                       static_cast<float>(rng.uniform(spec.noise_sigma_lo, spec.noise_sigma_hi)),
                       spec.feather_radius, rng);

    const double mode = rng.uniform();
    if (mode < spec.change_overlap_prob) {
      // replaced object: one sprite leaves the scene, another lands on top of it
      const auto p1 = place_sprite(rng, sprite.width(), sprite.height(), frame_w, frame_h);
      auto res1 = paste(out.before, sprite, p1.x, p1.y);
      out.before = std::move(res1.image);
      or_into(removed, res1.footprint);

      const int idx2 = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(bank.size()) - 1));
      const ObjectSprite second = augment_sprite(
          bank[idx2], static_cast<float>(rng.uniform(spec.brightness_lo, spec.brightness_hi)),
          static_cast<float>(rng.uniform(spec.noise_sigma_lo, spec.noise_sigma_hi)),
          spec.feather_radius, rng);
      const auto p2 = place_overlapping(rng, second.width(), second.height(), p1.x, p1.y,
                                        sprite.width(), sprite.height(), frame_w, frame_h);
      auto res2 = paste(out.after, second, p2.x, p2.y);
      out.after = std::move(res2.image);
      or_into(added, res2.footprint);
    } else if (mode < spec.change_overlap_prob + (1.0 - spec.change_overlap_prob) * 0.5) {
      const auto p = place_sprite(rng, sprite.width(), sprite.height(), frame_w, frame_h);
      auto res = paste(out.before, sprite, p.x, p.y);
      out.before = std::move(res.image);
      or_into(removed, res.footprint);
    } else {
      const auto p = place_sprite(rng, sprite.width(), sprite.height(), frame_w, frame_h);
      auto res = paste(out.after, sprite, p.x, p.y);
      out.after = std::move(res.image);
      or_into(added, res.footprint);
    }
  }

  auto& changed = maps.map(MapChannel::changed);
  for (size_t i = 0; i < changed.size(); ++i) changed[i] = removed[i] & added[i];
  maps.derive_notchanged();
  return {std::move(out), std::move(maps)};
}

namespace {

nlohmann::json spec_to_json(const SynthSpec& spec) {
  return nlohmann::json{{"seed", spec.seed},
                        {"objects_per_pair", {spec.objects_min, spec.objects_max}},
                        {"brightness_range", {spec.brightness_lo, spec.brightness_hi}},
                        {"noise_sigma_range", {spec.noise_sigma_lo, spec.noise_sigma_hi}},
                        {"feather_radius", spec.feather_radius},
                        {"change_overlap_prob", spec.change_overlap_prob}};
}

}  // namespace

Manifest generate_dataset(std::span<const ImagePair> bases, std::span<const ObjectSprite> bank,
                          const SynthSpec& spec, int count,
                          const std::filesystem::path& out_root) {
  spec.validate();
  if (count < 1) throw ValueError("generate_dataset: count must be >= 1");
  if (bases.empty()) throw ValueError("generate_dataset: no base pairs");
  if (bank.empty()) throw ValueError("generate_dataset: sprite bank is empty");

  std::error_code ec;
  std::filesystem::create_directories(out_root / "pairs", ec);

  Manifest manifest;
  manifest.spec = spec;
  for (int i = 0; i < count; ++i) {
    SynthSpec pair_spec = spec;
    pair_spec.seed = spec.seed ^ static_cast<uint64_t>(i);

    Rng pick(pair_spec.seed ^ 0xba5eba11u);
    const int base_idx = static_cast<int>(pick.uniform_int(0, static_cast<int64_t>(bases.size()) - 1));
    const int forced = static_cast<int>(i % static_cast<int64_t>(bank.size()));

    char id[32];
    std::snprintf(id, sizeof id, "pair-%05d", i);
    auto [pair, maps] = generate_pair(bases[base_idx], bank, pair_spec, forced);
    pair.id = id;
    save_pair(out_root / "pairs" / id, pair, maps);
    manifest.pairs.push_back({id, pair_spec.seed});
  }

  nlohmann::json doc;
  doc["spec"] = spec_to_json(spec);
  doc["pairs"] = nlohmann::json::array();
  for (const auto& entry : manifest.pairs)
    doc["pairs"].push_back({{"id", entry.id}, {"seed", entry.seed}});
  std::ofstream out(out_root / "manifest.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + (out_root / "manifest.json").string());
  out << doc.dump(2) << "\n";
  return manifest;
}

std::vector<ObjectSprite> load_sprite_bank(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw IoError("sprite bank " + dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::vector<ObjectSprite> bank;
  for (const auto& file : files) {
    const Image img = load_png(file);
    ObjectSprite sprite;
    sprite.name = file.stem().string();
    sprite.rgb = Image::make(img.height, img.width, 3);
    sprite.alpha.assign(static_cast<size_t>(img.height) * img.width, 1.0f);
    if (img.channels == 4) {
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
          for (int c = 0; c < 3; ++c) sprite.rgb.at(y, x, c) = img.at(y, x, c);
          sprite.alpha[static_cast<int64_t>(y) * img.width + x] = img.at(y, x, 3);
        }
    } else if (img.channels == 3) {
      sprite.rgb = img;
    } else {
      throw FormatError("sprite " + file.string() + " must be RGB or RGBA");
    }
    sprite.validate();
    bank.push_back(std::move(sprite));
  }
  return bank;
}

}  // namespace scenediff
