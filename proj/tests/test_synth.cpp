#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "scenediff/errors.hpp"
#include "scenediff/synth.hpp"
#include "support/tempdir.hpp"

using namespace scenediff;
using testsupport::TempDir;

namespace {

ObjectSprite solid_sprite(int h, int w, float r, float g, float b, const std::string& name) {
  ObjectSprite s;
  s.name = name;
  s.rgb = Image::make(h, w, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      s.rgb.at(y, x, 0) = r;
      s.rgb.at(y, x, 1) = g;
      s.rgb.at(y, x, 2) = b;
    }
  s.alpha.assign(static_cast<size_t>(h) * w, 1.0f);
  return s;
}

ImagePair black_base(int h, int w) {
  ImagePair base;
  base.before = Image::make(h, w, 3, 0.0f);
  base.after = Image::make(h, w, 3, 0.0f);
  base.id = "base";
  return base;
}

std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool trees_identical(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::vector<std::filesystem::path> rel;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a))
    if (e.is_regular_file()) rel.push_back(std::filesystem::relative(e.path(), a));
  std::sort(rel.begin(), rel.end());
  for (const auto& r : rel) {
    if (!std::filesystem::exists(b / r)) return false;
    if (read_bytes(a / r) != read_bytes(b / r)) return false;
  }
  size_t count_b = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(b))
    if (e.is_regular_file()) ++count_b;
  return count_b == rel.size();
}

}  // namespace

TEST_CASE("augment_sprite with neutral settings is the identity") {
  const auto s = solid_sprite(6, 6, 0.2f, 0.4f, 0.6f, "s");
  Rng rng(1);
  const auto out = augment_sprite(s, 1.0f, 0.0f, 0, rng);
  CHECK(out.rgb == s.rgb);
  CHECK(out.alpha == s.alpha);
}

TEST_CASE("augment_sprite scales brightness linearly") {
  const auto s = solid_sprite(4, 4, 0.8f, 0.4f, 0.2f, "s");
  Rng rng(2);
  const auto out = augment_sprite(s, 0.5f, 0.0f, 0, rng);
  for (int y = 0; y < 4; ++y) {
    CHECK(out.rgb.at(y, 0, 0) == doctest::Approx(0.4f));
    CHECK(out.rgb.at(y, 0, 1) == doctest::Approx(0.2f));
    CHECK(out.rgb.at(y, 0, 2) == doctest::Approx(0.1f));
  }
}

TEST_CASE("augment_sprite noise has the requested magnitude") {
  const auto s = solid_sprite(64, 64, 0.5f, 0.5f, 0.5f, "gray");
  Rng rng(3);
  const auto out = augment_sprite(s, 1.0f, 0.1f, 0, rng);
  double sum = 0.0, sumsq = 0.0;
  const size_t n = out.rgb.pixels.size();
  for (size_t i = 0; i < n; ++i) {
    const double d = out.rgb.pixels[i] - s.rgb.pixels[i];
    sum += d;
    sumsq += d * d;
  }
  const double mean = sum / n;
  const double stddev = std::sqrt(sumsq / n - mean * mean);
  CHECK(stddev > 0.08);
  CHECK(stddev < 0.12);
}

TEST_CASE("augment_sprite feathering softens the mask edge") {
  auto s = solid_sprite(8, 8, 1.0f, 1.0f, 1.0f, "s");
  Rng rng(4);
  const auto out = augment_sprite(s, 1.0f, 0.0f, 2, rng);
  // interior keeps full opacity, corners fade
  CHECK(out.alpha[3 * 8 + 3] == doctest::Approx(1.0f));
  CHECK(out.alpha[0] < 0.5f);
  for (float a : out.alpha) {
    CHECK(a >= 0.0f);
    CHECK(a <= 1.0f);
  }
}

TEST_CASE("paste with a fully transparent sprite changes nothing") {
  Image img = Image::make(6, 6, 3, 0.25f);
  auto s = solid_sprite(3, 3, 1.0f, 0.0f, 0.0f, "t");
  std::fill(s.alpha.begin(), s.alpha.end(), 0.0f);
  const auto res = paste(img, s, 1, 1);
  CHECK(res.image == img);
  for (uint8_t f : res.footprint) CHECK(f == 0);
}

TEST_CASE("paste replaces pixels under an opaque sprite") {
  Image img = Image::make(6, 6, 3, 0.25f);
  const auto s = solid_sprite(2, 3, 0.0f, 1.0f, 0.0f, "o");
  const auto res = paste(img, s, 2, 3);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      const bool inside = y >= 3 && y < 5 && x >= 2 && x < 5;
      CHECK(res.footprint[y * 6 + x] == (inside ? 1 : 0));
      CHECK(res.image.at(y, x, 1) == (inside ? 1.0f : 0.25f));
    }
}

TEST_CASE("paste blends half-transparent pixels") {
  Image img = Image::make(2, 2, 3, 0.0f);
  auto s = solid_sprite(1, 1, 1.0f, 1.0f, 1.0f, "h");
  s.alpha[0] = 0.5f;
  const auto res = paste(img, s, 0, 0);
  CHECK(res.image.at(0, 0, 0) == doctest::Approx(0.5f));
  CHECK(res.footprint[0] == 1);
}

TEST_CASE("paste rejects sprites fully outside the frame") {
  Image img = Image::make(4, 4, 3);
  const auto s = solid_sprite(2, 2, 1.0f, 0.0f, 0.0f, "out");
  CHECK_THROWS_AS(paste(img, s, 10, 10), ValueError);
  CHECK_THROWS_AS(paste(img, s, -5, 0), ValueError);
}

TEST_CASE("generate_pair: an object only in the after image marks only the added map") {
  const std::vector<ObjectSprite> bank{solid_sprite(5, 5, 1.0f, 1.0f, 1.0f, "w")};
  const auto base = black_base(24, 32);
  SynthSpec spec;
  spec.objects_min = spec.objects_max = 1;
  spec.change_overlap_prob = 0.0f;
  spec.noise_sigma_lo = spec.noise_sigma_hi = 0.0f;
  spec.feather_radius = 0;

  bool found_added_only = false;
  for (uint64_t seed = 0; seed < 50 && !found_added_only; ++seed) {
    spec.seed = seed;
    const auto [pair, maps] = generate_pair(base, bank, spec);
    size_t added_count = 0;
    for (uint8_t v : maps.map(MapChannel::added)) added_count += v;
    bool removed_empty = true;
    for (uint8_t v : maps.map(MapChannel::removed)) removed_empty &= (v == 0);
    if (added_count == 0 || !removed_empty) continue;
    found_added_only = true;

    CHECK(maps.invariants_hold());
    for (uint8_t v : maps.map(MapChannel::changed)) CHECK(v == 0);
    // before image untouched, after differs exactly on the added footprint
    CHECK(pair.before == base.before);
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 32; ++x) {
        const bool marked = maps.at(MapChannel::added, y, x) == 1;
        const bool differs = pair.after.at(y, x, 0) != base.after.at(y, x, 0);
        CHECK(marked == differs);
      }
  }
  CHECK(found_added_only);
}

TEST_CASE("generate_pair: overlapping before/after objects yield changed = removed AND added") {
  const std::vector<ObjectSprite> bank{solid_sprite(7, 7, 0.9f, 0.2f, 0.2f, "r"),
                                       solid_sprite(6, 6, 0.2f, 0.9f, 0.2f, "g")};
  const auto base = black_base(32, 40);
  SynthSpec spec;
  spec.seed = 7;
  spec.objects_min = spec.objects_max = 1;
  spec.change_overlap_prob = 1.0f;  // always a replaced-object event
  spec.feather_radius = 0;

  const auto [pair, maps] = generate_pair(base, bank, spec);
  const auto& removed = maps.map(MapChannel::removed);
  const auto& added = maps.map(MapChannel::added);
  const auto& changed = maps.map(MapChannel::changed);
  size_t changed_count = 0;
  for (size_t i = 0; i < changed.size(); ++i) {
    CHECK(changed[i] == (removed[i] & added[i]));
    changed_count += changed[i];
  }
  CHECK(changed_count > 0);
  CHECK(maps.invariants_hold());
}

TEST_CASE("generate_pair with zero objects is a no-op") {
  const std::vector<ObjectSprite> bank{solid_sprite(3, 3, 1.0f, 0.0f, 0.0f, "x")};
  const auto base = black_base(10, 10);
  SynthSpec spec;
  spec.seed = 9;
  spec.objects_min = spec.objects_max = 0;
  const auto [pair, maps] = generate_pair(base, bank, spec);
  CHECK(pair.before == base.before);
  CHECK(pair.after == base.after);
  for (auto ch : {MapChannel::removed, MapChannel::added, MapChannel::changed})
    for (uint8_t v : maps.map(ch)) CHECK(v == 0);
  for (uint8_t v : maps.map(MapChannel::notchanged)) CHECK(v == 1);
}

TEST_CASE("generate_pair marked pixels always differ from the base") {
  const std::vector<ObjectSprite> bank{solid_sprite(6, 6, 1.0f, 1.0f, 1.0f, "w"),
                                       solid_sprite(4, 8, 0.8f, 0.8f, 0.1f, "y")};
  const auto base = black_base(28, 36);
  SynthSpec spec;
  spec.noise_sigma_lo = spec.noise_sigma_hi = 0.0f;
  spec.objects_min = 1;
  spec.objects_max = 3;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    spec.seed = seed;
    const auto [pair, maps] = generate_pair(base, bank, spec);
    for (int y = 0; y < 28; ++y)
      for (int x = 0; x < 36; ++x) {
        if (maps.at(MapChannel::removed, y, x))
          REQUIRE(pair.before.at(y, x, 0) != base.before.at(y, x, 0));
        if (maps.at(MapChannel::added, y, x))
          REQUIRE(pair.after.at(y, x, 0) != base.after.at(y, x, 0));
      }
  }
}

TEST_CASE("generate_pair is deterministic for a fixed seed") {
  const std::vector<ObjectSprite> bank{solid_sprite(5, 5, 0.3f, 0.5f, 0.7f, "b")};
  const auto base = black_base(20, 20);
  SynthSpec spec;
  spec.seed = 1234;
  const auto [pair1, maps1] = generate_pair(base, bank, spec);
  const auto [pair2, maps2] = generate_pair(base, bank, spec);
  CHECK(pair1.before == pair2.before);
  CHECK(pair1.after == pair2.after);
  CHECK(maps1 == maps2);
}

TEST_CASE("generate_dataset writes loadable pairs and a manifest") {
  TempDir tmp;
  const std::vector<ObjectSprite> bank{solid_sprite(4, 4, 1.0f, 0.2f, 0.2f, "a")};
  const std::vector<ImagePair> bases{black_base(16, 20)};
  SynthSpec spec;
  spec.seed = 5;
  const auto manifest = generate_dataset(bases, bank, spec, 1, tmp.path);
  REQUIRE(manifest.pairs.size() == 1);
  CHECK(manifest.pairs[0].seed == 5);  // seed ^ 0

  const auto rec = load_pair(tmp.path / "pairs" / manifest.pairs[0].id);
  CHECK(rec.maps.invariants_hold());
  CHECK(rec.pair.before.height == 16);
  CHECK(std::filesystem::exists(tmp.path / "manifest.json"));
}

TEST_CASE("generate_dataset is byte-deterministic under seed replay") {
  TempDir tmp;
  const std::vector<ObjectSprite> bank{solid_sprite(5, 5, 0.9f, 0.9f, 0.9f, "w"),
                                       solid_sprite(3, 6, 0.1f, 0.6f, 0.9f, "c")};
  const std::vector<ImagePair> bases{black_base(24, 24)};
  SynthSpec spec;
  spec.seed = 31;
  generate_dataset(bases, bank, spec, 4, tmp.path / "run1");
  generate_dataset(bases, bank, spec, 4, tmp.path / "run2");
  CHECK(trees_identical(tmp.path / "run1", tmp.path / "run2"));
}

TEST_CASE("generate_dataset uses every sprite once count reaches the bank size") {
  TempDir tmp;
  // solid primary colors are exactly recognizable in the output images
  const std::vector<ObjectSprite> bank{solid_sprite(4, 4, 1.0f, 0.0f, 0.0f, "red"),
                                       solid_sprite(4, 4, 0.0f, 1.0f, 0.0f, "green"),
                                       solid_sprite(4, 4, 0.0f, 0.0f, 1.0f, "blue")};
  const std::vector<ImagePair> bases{black_base(20, 20)};
  SynthSpec spec;
  spec.seed = 77;
  spec.objects_min = spec.objects_max = 1;
  spec.brightness_lo = spec.brightness_hi = 1.0f;
  spec.noise_sigma_lo = spec.noise_sigma_hi = 0.0f;
  spec.feather_radius = 0;
  spec.change_overlap_prob = 0.0f;

  const int count = 6;
  generate_dataset(bases, bank, spec, count, tmp.path);

  bool seen[3] = {false, false, false};
  for (const auto& dir : list_pair_dirs(tmp.path)) {
    const auto rec = load_pair(dir);
    for (const Image* img : {&rec.pair.before, &rec.pair.after})
      for (int y = 0; y < img->height; ++y)
        for (int x = 0; x < img->width; ++x) {
          if (img->at(y, x, 0) == 1.0f && img->at(y, x, 1) == 0.0f) seen[0] = true;
          if (img->at(y, x, 1) == 1.0f && img->at(y, x, 0) == 0.0f) seen[1] = true;
          if (img->at(y, x, 2) == 1.0f && img->at(y, x, 1) == 0.0f) seen[2] = true;
        }
  }
  CHECK(seen[0]);
  CHECK(seen[1]);
  CHECK(seen[2]);
}

TEST_CASE("sprite bank round-trips through RGBA png files") {
  TempDir tmp;
  Image rgba = Image::make(5, 4, 4);
  Rng rng(99);
  for (float& v : rgba.pixels) v = static_cast<float>(rng.uniform_int(0, 255)) / 255.0f;
  save_png(rgba, tmp.path / "thing.png");

  const auto bank = load_sprite_bank(tmp.path);
  REQUIRE(bank.size() == 1);
  CHECK(bank[0].name == "thing");
  CHECK(bank[0].rgb.channels == 3);
  CHECK(bank[0].height() == 5);
  CHECK(bank[0].alpha[0] == rgba.at(0, 0, 3));
}
