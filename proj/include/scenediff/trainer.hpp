#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "scenediff/adam.hpp"
#include "scenediff/dataset.hpp"
#include "scenediff/unet.hpp"

namespace scenediff {

struct TrainConfig {
  float lr = 1e-3f;
  int epochs = 50;
  int batch_size = 4;
  uint64_t seed = 0;
  float threshold = 0.5f;   // binarization used for the per-epoch metrics
  int checkpoint_every = 0;  // steps between checkpoints; 0 disables

  void validate() const;
};

struct MapMetricsRow {
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  std::optional<std::array<MapMetricsRow, 4>> eval;  // one row per map channel
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

// Joint MSE over the four map channels: target maps are lifted to a {0,1}
// float tensor of the prediction's shape.
LossResult map_loss(const Tensor4& pred, std::span<const ChangeMaps> targets);

// Owns the optimizer state for one model. Samples are resized to the model
// input size once, up front.
class Trainer {
 public:
  Trainer(UNetModel& model, TrainConfig cfg);

  // One forward/backward/optimizer cycle; returns the pre-step batch loss.
  float train_step(const Tensor4& input, const Tensor4& target);

  // Runs cfg.epochs over the dataset with a deterministic per-(seed, epoch)
  // shuffle. When run_dir is non-empty, writes history.csv there and
  // ckpt-<step>.sdck every cfg.checkpoint_every steps plus ckpt-final.sdck.
  TrainHistory fit(std::span<const PairRecord> dataset,
                   const std::filesystem::path& run_dir = {});

  int steps_taken() const { return step_; }

 private:
  UNetModel* model_;
  TrainConfig cfg_;
  Adam adam_;
  int step_ = 0;
};

// epoch,loss,then precision/recall/accuracy per map channel
void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);

// Deterministic shuffle order for one epoch.
std::vector<size_t> epoch_permutation(uint64_t seed, int epoch, size_t count);

}  // namespace scenediff
