#include "scenediff/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "scenediff/errors.hpp"
#include "scenediff/eval.hpp"
#include "scenediff/rng.hpp"

namespace scenediff {

void TrainConfig::validate() const {
  // lr 0 is allowed: it documents the optimizer no-op property
  if (lr < 0.0f) throw ValueError("train config: lr must be >= 0");
  if (epochs < 1) throw ValueError("train config: epochs must be >= 1");
  if (batch_size < 1) throw ValueError("train config: batch size must be >= 1");
  if (threshold < 0.0f || threshold > 1.0f)
    throw ValueError("train config: threshold must lie in [0,1]");
  if (checkpoint_every < 0) throw ValueError("train config: checkpoint_every must be >= 0");
}

LossResult map_loss(const Tensor4& pred, std::span<const ChangeMaps> targets) {
  return mse_loss(pred, maps_to_tensor(targets));
}

Trainer::Trainer(UNetModel& model, TrainConfig cfg) : model_(&model), cfg_(cfg) {
  cfg_.validate();
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg_.lr;
  adam_ = Adam(adam_cfg);
}

float Trainer::train_step(const Tensor4& input, const Tensor4& target) {
  if (input.shape().n == 0) throw ValueError("train_step: empty batch");
  model_->zero_grad();
  UNetModel::Trace trace;
  const Tensor4 pred = model_->forward(input, /*training=*/true, &trace);
  const LossResult loss = mse_loss(pred, target);
  (void)model_->backward(trace, loss.grad_pred);
  const auto params = model_->params();
  adam_.step(params, ++step_);
  return loss.loss;
}

TrainHistory Trainer::fit(std::span<const PairRecord> dataset,
                          const std::filesystem::path& run_dir) {
  if (dataset.empty()) throw ValueError("fit: empty dataset");
  const auto& cfg = model_->config();

  // resize everything to the model input size once
  std::vector<ImagePair> pairs;
  std::vector<ChangeMaps> maps;
  pairs.reserve(dataset.size());
  maps.reserve(dataset.size());
  for (const auto& rec : dataset) {
    auto [rp, rm] = resize_pair(rec.pair, rec.maps, cfg.input_height, cfg.input_width);
    pairs.push_back(std::move(rp));
    maps.push_back(std::move(rm));
  }

  if (!run_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(run_dir, ec);
  }

  TrainHistory history;
  for (int epoch = 1; epoch <= cfg_.epochs; ++epoch) {
    const auto order = epoch_permutation(cfg_.seed, epoch, dataset.size());
    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg_.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg_.batch_size));
      std::vector<ImagePair> batch_pairs;
      std::vector<ChangeMaps> batch_maps;
      for (size_t i = start; i < end; ++i) {
        batch_pairs.push_back(pairs[order[i]]);
        batch_maps.push_back(maps[order[i]]);
      }
      const float loss =
          train_step(pairs_to_tensor(batch_pairs), maps_to_tensor(batch_maps));
      loss_sum += static_cast<double>(loss) * static_cast<double>(end - start);

      if (!run_dir.empty() && cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0)
        save_checkpoint(*model_, run_dir / ("ckpt-" + std::to_string(step_) + ".sdck"));
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(dataset.size());

    std::array<ConfusionCounts, 4> counts{};
    for (size_t i = 0; i < pairs.size(); ++i) {
      const std::vector<ImagePair> one{pairs[i]};
      const Tensor4 scores = model_->forward(pairs_to_tensor(one), /*training=*/false);
      const auto conf = confusion(scores_to_maps(scores, 0, cfg_.threshold), maps[i]);
      for (size_t c = 0; c < 4; ++c) counts[c] += conf[c];
    }
    std::array<MapMetricsRow, 4> rows;
    for (size_t c = 0; c < 4; ++c) {
      const auto m = metrics(counts[c]);
      rows[c] = {m.precision, m.recall, m.accuracy};
    }
    stats.eval = rows;
    history.epochs.push_back(std::move(stats));
  }

  if (!run_dir.empty()) {
    write_history_csv(history, run_dir / "history.csv");
    save_checkpoint(*model_, run_dir / "ckpt-final.sdck");
  }
  return history;
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,loss";
  for (const char* name : kMapNames)
    out << ',' << name << "_precision," << name << "_recall," << name << "_accuracy";
  out << "\n";
  char buf[32];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << num(e.mean_loss);
    if (e.eval) {
      for (const auto& row : *e.eval)
        out << ',' << num(row.precision) << ',' << num(row.recall) << ',' << num(row.accuracy);
    } else {
      for (int i = 0; i < 12; ++i) out << ',';
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<size_t> epoch_permutation(uint64_t seed, int epoch, size_t count) {
  std::vector<size_t> order(count);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(mix_seed(seed) ^ mix_seed(0x514f71e5ULL + static_cast<uint64_t>(epoch)));
  for (size_t i = count; i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace scenediff
