#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "scenediff/changemaps.hpp"
#include "scenediff/tensor.hpp"

namespace scenediff {

struct ConfusionCounts {
  uint64_t tp = 0;
  uint64_t fp = 0;
  uint64_t tn = 0;
  uint64_t fn = 0;

  uint64_t total() const { return tp + fp + tn + fn; }
  void operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
  }
};

struct ChannelMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
};

// precision = tp/(tp+fp), recall = tp/(tp+fn), accuracy = (tp+tn)/total.
// Empty denominators score 1.0 so empty predictions on empty ground truth
// are perfect.
ChannelMetrics metrics(const ConfusionCounts& c);

// Per-pixel counts per map channel; positive class is 1.
std::array<ConfusionCounts, 4> confusion(const ChangeMaps& pred, const ChangeMaps& gt);

struct PRPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
};

struct PRCurve {
  std::array<std::vector<PRPoint>, 4> channels;
};

// 0.00, 0.05, ..., 1.00
std::vector<double> default_threshold_grid();

// Accumulates confusion counts over many (scores, ground truth) pairs for a
// fixed threshold grid; finalize() turns them into one PR curve per channel.
// Thresholding is raw per channel (>= rule), without the notchanged
// complement recomputation, so each channel's curve is independent.
class PrAccumulator {
 public:
  explicit PrAccumulator(std::vector<double> thresholds);

  const std::vector<double>& thresholds() const { return thresholds_; }
  void add(const Tensor4& scores, int batch_index, const ChangeMaps& gt);
  PRCurve finalize() const;

 private:
  std::vector<double> thresholds_;
  std::vector<std::array<ConfusionCounts, 4>> counts_;  // [threshold][channel]
};

PRCurve pr_sweep(const Tensor4& scores, const ChangeMaps& gt,
                 std::span<const double> thresholds);

// CSV columns: channel,threshold,precision,recall,accuracy. The header
// comment documents the zero-denominator conventions.
void emit_csv(const PRCurve& curve, const std::filesystem::path& path);
// One polyline per channel on recall-x/precision-y unit axes, with a legend.
void emit_svg(const PRCurve& curve, const std::filesystem::path& path);

}  // namespace scenediff
