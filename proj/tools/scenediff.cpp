// scenediff: synthesize change-detection datasets, train the encoder-decoder
// on them, and run inference/evaluation producing the four change maps.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "scenediff/dataset.hpp"
#include "scenediff/errors.hpp"
#include "scenediff/eval.hpp"
#include "scenediff/synth.hpp"
#include "scenediff/trainer.hpp"
#include "scenediff/unet.hpp"

namespace {

constexpr const char* kVersion = "scenediff 1.0.0";

using namespace scenediff;
namespace fs = std::filesystem;

nlohmann::json load_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config " + path.string() + ": " + e.what());
  }
}

void require_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                  const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* name : allowed) ok |= key == name;
    if (!ok) throw FormatError("config: unknown key \"" + key + "\" in " + where);
  }
}

// Config file sections: {"synth": {...}, "train": {...}, "model": {...}}.
// Values fill in wherever the corresponding flag was not given.
struct RunConfig {
  nlohmann::json synth = nlohmann::json::object();
  nlohmann::json train = nlohmann::json::object();
  nlohmann::json model = nlohmann::json::object();
};

RunConfig parse_run_config(const fs::path& path) {
  const auto doc = load_json_file(path);
  if (!doc.is_object()) throw FormatError("config " + path.string() + ": expected a JSON object");
  require_keys(doc, {"synth", "train", "model"}, "top level");
  RunConfig rc;
  if (doc.contains("synth")) rc.synth = doc["synth"];
  if (doc.contains("train")) rc.train = doc["train"];
  if (doc.contains("model")) rc.model = doc["model"];
  require_keys(rc.synth,
               {"seed", "objects_per_pair", "brightness_range", "noise_sigma_range",
                "feather_radius", "change_overlap_prob"},
               "synth");
  require_keys(rc.train, {"lr", "epochs", "batch_size", "seed", "threshold", "checkpoint_every"},
               "train");
  require_keys(rc.model, {"preset", "input_size", "use_skip"}, "model");
  return rc;
}

SynthSpec synth_spec_from_config(const nlohmann::json& obj) {
  SynthSpec spec;
  try {
    if (obj.contains("seed")) spec.seed = obj["seed"].get<uint64_t>();
    if (obj.contains("objects_per_pair")) {
      spec.objects_min = obj["objects_per_pair"].at(0).get<int>();
      spec.objects_max = obj["objects_per_pair"].at(1).get<int>();
    }
    if (obj.contains("brightness_range")) {
      spec.brightness_lo = obj["brightness_range"].at(0).get<float>();
      spec.brightness_hi = obj["brightness_range"].at(1).get<float>();
    }
    if (obj.contains("noise_sigma_range")) {
      spec.noise_sigma_lo = obj["noise_sigma_range"].at(0).get<float>();
      spec.noise_sigma_hi = obj["noise_sigma_range"].at(1).get<float>();
    }
    if (obj.contains("feather_radius")) spec.feather_radius = obj["feather_radius"].get<int>();
    if (obj.contains("change_overlap_prob"))
      spec.change_overlap_prob = obj["change_overlap_prob"].get<float>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: bad synth section: ") + e.what());
  }
  return spec;
}

// Base scenes: either a dataset-style <dir>/pairs/<id>/{before,after}.png
// tree, or a flat directory of PNGs each serving as both frames.
std::vector<ImagePair> load_bases(const fs::path& dir) {
  std::vector<ImagePair> bases;
  if (fs::is_directory(dir / "pairs")) {
    for (const auto& pair_dir : list_pair_dirs(dir)) {
      ImagePair pair;
      pair.before = load_png(pair_dir / "before.png");
      pair.after = load_png(pair_dir / "after.png");
      pair.id = pair_dir.filename().string();
      bases.push_back(std::move(pair));
    }
  } else if (fs::is_directory(dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".png")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      ImagePair pair;
      pair.before = load_png(file);
      pair.after = pair.before;
      pair.id = file.stem().string();
      bases.push_back(std::move(pair));
    }
  } else {
    throw IoError("bases directory " + dir.string() + " does not exist");
  }
  if (bases.empty()) throw ValueError("no base images found under " + dir.string());
  return bases;
}

// ---- overlay rendering -----------------------------------------------------

std::vector<uint8_t> erode(const std::vector<uint8_t>& map, int h, int w) {
  std::vector<uint8_t> out(map.size(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      uint8_t keep = map[static_cast<size_t>(y) * w + x];
      for (int dy = -1; dy <= 1 && keep; ++dy)
        for (int dx = -1; dx <= 1 && keep; ++dx) {
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w || !map[static_cast<size_t>(ny) * w + nx])
            keep = 0;
        }
      out[static_cast<size_t>(y) * w + x] = keep;
    }
  return out;
}

// 2-pixel contour band of each connected region: the map minus its double
// erosion.
std::vector<uint8_t> contour_band(const std::vector<uint8_t>& map, int h, int w) {
  const auto inner = erode(erode(map, h, w), h, w);
  std::vector<uint8_t> band(map.size());
  for (size_t i = 0; i < map.size(); ++i) band[i] = map[i] && !inner[i];
  return band;
}

void draw_band(Image& img, const std::vector<uint8_t>& band, float r, float g, float b) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (band[static_cast<size_t>(y) * img.width + x]) {
        img.at(y, x, 0) = r;
        img.at(y, x, 1) = g;
        img.at(y, x, 2) = b;
      }
}

// Before frame on top (removed regions outlined in red), after frame below
// (added regions outlined in green).
Image render_overlay(const ImagePair& pair, const ChangeMaps& maps) {
  const int h = pair.before.height, w = pair.before.width;
  Image top = pair.before;
  draw_band(top, contour_band(maps.map(MapChannel::removed), h, w), 1.0f, 0.1f, 0.1f);
  Image bottom = pair.after;
  draw_band(bottom, contour_band(maps.map(MapChannel::added), h, w), 0.1f, 1.0f, 0.1f);

  Image out = Image::make(2 * h, w, 3);
  std::copy(top.pixels.begin(), top.pixels.end(), out.pixels.begin());
  std::copy(bottom.pixels.begin(), bottom.pixels.end(),
            out.pixels.begin() + static_cast<int64_t>(h) * w * 3);
  return out;
}

// ---- subcommands -------------------------------------------------------------

struct SynthArgs {
  std::string bases, bank, out, config;
  int count = 10;
  uint64_t seed = 0;
  bool seed_given = false, count_given = false;
};

int run_synth(const SynthArgs& args) {
  SynthSpec spec;
  if (!args.config.empty()) spec = synth_spec_from_config(parse_run_config(args.config).synth);
  if (args.seed_given) spec.seed = args.seed;
  const int count = args.count;

  const auto bases = load_bases(args.bases);
  const auto bank = load_sprite_bank(args.bank);
  if (bank.empty()) throw ValueError("sprite bank " + args.bank + " has no .png sprites");

  const auto manifest = generate_dataset(bases, bank, spec, count, args.out);
  std::cout << "wrote " << manifest.pairs.size() << " pairs to " << args.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data, preset_name = "A", out, config, val_root;
  TrainConfig train;
  int height = 0, width = 0;
  bool from_labels = false;
  bool lr_given = false, epochs_given = false, batch_given = false, seed_given = false;
};

void print_summary(const std::array<ConfusionCounts, 4>& counts) {
  for (size_t c = 0; c < 4; ++c) {
    const auto m = metrics(counts[c]);
    std::printf("%-10s precision=%.4f recall=%.4f accuracy=%.4f\n", kMapNames[c], m.precision,
                m.recall, m.accuracy);
  }
}

std::array<ConfusionCounts, 4> dataset_confusion(UNetModel& model,
                                                 std::span<const PairRecord> dataset,
                                                 float threshold) {
  const auto& cfg = model.config();
  std::array<ConfusionCounts, 4> counts{};
  for (const auto& rec : dataset) {
    auto [pair, maps] = resize_pair(rec.pair, rec.maps, cfg.input_height, cfg.input_width);
    const std::vector<ImagePair> one{std::move(pair)};
    const Tensor4 scores = model.forward(pairs_to_tensor(one), false);
    const auto conf = confusion(scores_to_maps(scores, 0, threshold), maps);
    for (size_t c = 0; c < 4; ++c) counts[c] += conf[c];
  }
  return counts;
}

int run_train(const TrainArgs& args) {
  TrainConfig tc = args.train;
  UNetConfig model_cfg = preset(args.preset_name);
  if (!args.config.empty()) {
    const auto rc = parse_run_config(args.config);
    try {
      if (rc.train.contains("lr") && !args.lr_given) tc.lr = rc.train["lr"].get<float>();
      if (rc.train.contains("epochs") && !args.epochs_given)
        tc.epochs = rc.train["epochs"].get<int>();
      if (rc.train.contains("batch_size") && !args.batch_given)
        tc.batch_size = rc.train["batch_size"].get<int>();
      if (rc.train.contains("seed") && !args.seed_given)
        tc.seed = rc.train["seed"].get<uint64_t>();
      if (rc.train.contains("threshold")) tc.threshold = rc.train["threshold"].get<float>();
      if (rc.train.contains("checkpoint_every"))
        tc.checkpoint_every = rc.train["checkpoint_every"].get<int>();
      if (rc.model.contains("preset")) model_cfg = preset(rc.model["preset"].get<std::string>());
      if (rc.model.contains("input_size")) {
        model_cfg.input_height = rc.model["input_size"].at(0).get<int>();
        model_cfg.input_width = rc.model["input_size"].at(1).get<int>();
      }
      if (rc.model.contains("use_skip")) model_cfg.use_skip = rc.model["use_skip"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("config: bad train/model section: ") + e.what());
    }
  }
  if (args.height > 0) model_cfg.input_height = args.height;
  if (args.width > 0) model_cfg.input_width = args.width;

  const auto dataset = load_dataset(args.data, args.from_labels);
  if (dataset.empty()) throw ValueError("dataset " + args.data + " has no pairs");

  UNetModel model = UNetModel::build(model_cfg, tc.seed);
  Trainer trainer(model, tc);
  const auto history = trainer.fit(dataset, args.out);
  std::printf("trained %d epochs (%d steps), final loss %.6f\n", tc.epochs,
              trainer.steps_taken(), history.epochs.back().mean_loss);

  if (!args.val_root.empty()) {
    const auto val = load_dataset(args.val_root);
    if (val.empty()) throw ValueError("validation dataset " + args.val_root + " has no pairs");
    std::printf("validation metrics at threshold %.2f:\n", tc.threshold);
    print_summary(dataset_confusion(model, val, tc.threshold));
  }
  return 0;
}

struct InferArgs {
  std::string ckpt, before, after, out;
  float threshold = 0.5f;
};

int run_infer(const InferArgs& args) {
  UNetModel model = load_checkpoint(args.ckpt);
  ImagePair pair;
  pair.before = load_png(args.before);
  pair.after = load_png(args.after);
  pair.id = "query";
  if (pair.before.height != pair.after.height || pair.before.width != pair.after.width)
    throw ShapeError("image sizes disagree: " + std::to_string(pair.before.height) + "x" +
                     std::to_string(pair.before.width) + " vs " +
                     std::to_string(pair.after.height) + "x" + std::to_string(pair.after.width));
  if (pair.before.channels != 3 || pair.after.channels != 3)
    throw FormatError("inference inputs must be RGB PNGs");

  ChangeMaps maps = predict(model, pair, args.threshold);
  if (maps.height != pair.before.height || maps.width != pair.before.width)
    maps = resize_nearest(maps, pair.before.height, pair.before.width);

  std::error_code ec;
  fs::create_directories(args.out, ec);
  save_maps(maps, args.out);
  save_png(render_overlay(pair, maps), fs::path(args.out) / "overlay.png");
  std::cout << "wrote change maps and overlay to " << args.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string ckpt, data, out, thresholds;
  bool from_labels = false;
};

std::vector<double> parse_threshold_grid(const std::string& text) {
  if (text.empty()) return default_threshold_grid();
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      grid.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValueError("bad threshold \"" + item + "\" in grid");
    }
  }
  return grid;
}

int run_eval(const EvalArgs& args) {
  UNetModel model = load_checkpoint(args.ckpt);
  const auto dataset = load_dataset(args.data, args.from_labels);
  if (dataset.empty()) throw ValueError("dataset " + args.data + " has no pairs");
  const auto& cfg = model.config();

  PrAccumulator acc(parse_threshold_grid(args.thresholds));
  std::array<ConfusionCounts, 4> summary{};
  for (const auto& rec : dataset) {
    auto [pair, maps] = resize_pair(rec.pair, rec.maps, cfg.input_height, cfg.input_width);
    const std::vector<ImagePair> one{std::move(pair)};
    const Tensor4 scores = model.forward(pairs_to_tensor(one), false);
    acc.add(scores, 0, maps);
    const auto conf = confusion(scores_to_maps(scores, 0, 0.5f), maps);
    for (size_t c = 0; c < 4; ++c) summary[c] += conf[c];
  }

  std::error_code ec;
  fs::create_directories(args.out, ec);
  const auto curve = acc.finalize();
  emit_csv(curve, fs::path(args.out) / "pr.csv");
  emit_svg(curve, fs::path(args.out) / "pr.svg");

  std::printf("evaluated %zu pairs; summary at threshold 0.50:\n", dataset.size());
  print_summary(summary);
  std::cout << "wrote pr.csv and pr.svg to " << args.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene change detection: synthetic data, training, inference, evaluation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->set_version_flag("--version", kVersion);
  synth_cmd->add_option("--bases", synth_args.bases, "Base scene images (dir of PNGs or dataset root)")
      ->required();
  synth_cmd->add_option("--bank", synth_args.bank, "Sprite bank directory (RGBA PNGs)")->required();
  synth_cmd->add_option("--out", synth_args.out, "Output dataset root")->required();
  auto* count_opt = synth_cmd->add_option("--count", synth_args.count, "Number of pairs");
  auto* seed_opt = synth_cmd->add_option("--seed", synth_args.seed, "Generator seed");
  synth_cmd->add_option("--config", synth_args.config, "JSON run config");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
  train_cmd->set_version_flag("--version", kVersion);
  train_cmd->add_option("--data", train_args.data, "Dataset root")->required();
  train_cmd->add_option("--preset", train_args.preset_name, "Model preset: A, B or C");
  train_cmd->add_option("--out", train_args.out, "Run directory for history + checkpoints")
      ->required();
  auto* lr_opt = train_cmd->add_option("--lr", train_args.train.lr, "Learning rate");
  auto* epochs_opt = train_cmd->add_option("--epochs", train_args.train.epochs, "Training epochs");
  auto* batch_opt = train_cmd->add_option("--batch", train_args.train.batch_size, "Batch size");
  auto* tseed_opt = train_cmd->add_option("--seed", train_args.train.seed, "Training seed");
  train_cmd->add_option("--threshold", train_args.train.threshold,
                        "Binarization threshold for history metrics");
  train_cmd->add_option("--checkpoint-every", train_args.train.checkpoint_every,
                        "Steps between checkpoints (0 = only final)");
  train_cmd->add_option("--height", train_args.height, "Model input height override");
  train_cmd->add_option("--width", train_args.width, "Model input width override");
  train_cmd->add_option("--val-root", train_args.val_root, "Validation dataset root");
  train_cmd->add_flag("--from-labels", train_args.from_labels,
                      "Re-rasterize labels.json even when cached map PNGs exist");
  train_cmd->add_option("--config", train_args.config, "JSON run config");

  InferArgs infer_args;
  auto* infer_cmd = app.add_subcommand("infer", "Run a checkpoint on one image pair");
  infer_cmd->set_version_flag("--version", kVersion);
  infer_cmd->add_option("--ckpt", infer_args.ckpt, "Checkpoint file")->required();
  infer_cmd->add_option("--before", infer_args.before, "Earlier photograph (PNG)")->required();
  infer_cmd->add_option("--after", infer_args.after, "Later photograph (PNG)")->required();
  infer_cmd->add_option("--out", infer_args.out, "Output directory")->required();
  infer_cmd->add_option("--threshold", infer_args.threshold, "Binarization threshold");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->set_version_flag("--version", kVersion);
  eval_cmd->add_option("--ckpt", eval_args.ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", eval_args.data, "Dataset root")->required();
  eval_cmd->add_option("--out", eval_args.out, "Output directory for pr.csv/pr.svg")->required();
  eval_cmd->add_option("--thresholds", eval_args.thresholds,
                       "Comma-separated threshold grid (default 0,0.05,...,1)");
  eval_cmd->add_flag("--from-labels", eval_args.from_labels,
                     "Re-rasterize labels.json even when cached map PNGs exist");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << app.help() << "\n";
    return 1;
  }

  synth_args.seed_given = seed_opt->count() > 0;
  synth_args.count_given = count_opt->count() > 0;
  train_args.lr_given = lr_opt->count() > 0;
  train_args.epochs_given = epochs_opt->count() > 0;
  train_args.batch_given = batch_opt->count() > 0;
  train_args.seed_given = tseed_opt->count() > 0;

  try {
    if (synth_cmd->parsed()) return run_synth(synth_args);
    if (train_cmd->parsed()) return run_train(train_args);
    if (infer_cmd->parsed()) return run_infer(infer_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand given\n";
  return 1;
}
