#include "scenediff/eval.hpp"

#include <cstdio>
#include <fstream>

#include "scenediff/errors.hpp"

namespace scenediff {

ChannelMetrics metrics(const ConfusionCounts& c) {
  ChannelMetrics m;
  m.precision = (c.tp + c.fp) == 0 ? 1.0 : static_cast<double>(c.tp) / (c.tp + c.fp);
  m.recall = (c.tp + c.fn) == 0 ? 1.0 : static_cast<double>(c.tp) / (c.tp + c.fn);
  const uint64_t total = c.total();
  m.accuracy = total == 0 ? 1.0 : static_cast<double>(c.tp + c.tn) / total;
  return m;
}

std::array<ConfusionCounts, 4> confusion(const ChangeMaps& pred, const ChangeMaps& gt) {
  if (pred.height != gt.height || pred.width != gt.width)
    throw ShapeError("confusion: prediction is " + std::to_string(pred.height) + "x" +
                     std::to_string(pred.width) + " but ground truth is " +
                     std::to_string(gt.height) + "x" + std::to_string(gt.width));
  std::array<ConfusionCounts, 4> out{};
  for (size_t c = 0; c < out.size(); ++c) {
    const auto& p = pred.maps[c];
    const auto& g = gt.maps[c];
    for (size_t i = 0; i < p.size(); ++i) {
      if (p[i]) {
        if (g[i])
          ++out[c].tp;
        else
          ++out[c].fp;
      } else {
        if (g[i])
          ++out[c].fn;
        else
          ++out[c].tn;
      }
    }
  }
  return out;
}

std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i * 0.05);
  return grid;
}

PrAccumulator::PrAccumulator(std::vector<double> thresholds)
    : thresholds_(std::move(thresholds)) {
  if (thresholds_.empty()) throw ValueError("pr_sweep: empty threshold grid");
  for (size_t i = 0; i < thresholds_.size(); ++i) {
    if (thresholds_[i] < 0.0 || thresholds_[i] > 1.0)
      throw ValueError("pr_sweep: thresholds must lie in [0,1]");
    if (i > 0 && thresholds_[i] <= thresholds_[i - 1])
      throw ValueError("pr_sweep: thresholds must be strictly increasing");
  }
  counts_.assign(thresholds_.size(), {});
}

void PrAccumulator::add(const Tensor4& scores, int batch_index, const ChangeMaps& gt) {
  const auto& s = scores.shape();
  if (batch_index < 0 || batch_index >= s.n)
    throw ShapeError("pr_sweep: batch index " + std::to_string(batch_index) +
                     " out of range for " + to_string(s));
  if (s.c != 4 || s.h != gt.height || s.w != gt.width)
    throw ShapeError("pr_sweep: scores " + to_string(s) + " do not match ground truth " +
                     std::to_string(gt.height) + "x" + std::to_string(gt.width));
  const int64_t plane = static_cast<int64_t>(s.h) * s.w;
  for (size_t t = 0; t < thresholds_.size(); ++t) {
    const float thr = static_cast<float>(thresholds_[t]);
    for (int c = 0; c < 4; ++c) {
      const float* sp = scores.plane(batch_index, c);
      const auto& g = gt.maps[static_cast<size_t>(c)];
      ConfusionCounts& cc = counts_[t][static_cast<size_t>(c)];
      for (int64_t i = 0; i < plane; ++i) {
        const bool p = sp[i] >= thr;
        const bool q = g[static_cast<size_t>(i)] != 0;
        if (p) {
          if (q)
            ++cc.tp;
          else
            ++cc.fp;
        } else {
          if (q)
            ++cc.fn;
          else
            ++cc.tn;
        }
      }
    }
  }
}

PRCurve PrAccumulator::finalize() const {
  PRCurve curve;
  for (size_t t = 0; t < thresholds_.size(); ++t)
    for (size_t c = 0; c < 4; ++c) {
      const auto m = metrics(counts_[t][c]);
      curve.channels[c].push_back({thresholds_[t], m.precision, m.recall, m.accuracy});
    }
  return curve;
}

PRCurve pr_sweep(const Tensor4& scores, const ChangeMaps& gt,
                 std::span<const double> thresholds) {
  PrAccumulator acc(std::vector<double>(thresholds.begin(), thresholds.end()));
  acc.add(scores, 0, gt);
  return acc.finalize();
}

namespace {

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void emit_csv(const PRCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# precision and recall fall back to 1.0 when their denominator is 0\n";
  out << "channel,threshold,precision,recall,accuracy\n";
  for (size_t c = 0; c < curve.channels.size(); ++c)
    for (const auto& pt : curve.channels[c])
      out << kMapNames[c] << ',' << fmt_num(pt.threshold) << ',' << fmt_num(pt.precision) << ','
          << fmt_num(pt.recall) << ',' << fmt_num(pt.accuracy) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

void emit_svg(const PRCurve& curve, const std::filesystem::path& path) {
  constexpr int kSize = 480;
  constexpr int kMargin = 50;
  constexpr const char* kColors[4] = {"#d62728", "#2ca02c", "#ff7f0e", "#1f77b4"};
  const int plot = kSize - 2 * kMargin;
  auto px = [&](double recall) { return kMargin + recall * plot; };
  auto py = [&](double precision) { return kMargin + (1.0 - precision) * plot; };

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
      << "\" viewBox=\"0 0 " << kSize << " " << kSize << "\">\n";
  out << "  <rect x=\"0\" y=\"0\" width=\"" << kSize << "\" height=\"" << kSize
      << "\" fill=\"white\"/>\n";
  out << "  <rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << plot
      << "\" height=\"" << plot << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  out << "  <text x=\"" << kSize / 2 << "\" y=\"" << kSize - 12
      << "\" text-anchor=\"middle\" font-size=\"14\">recall</text>\n";
  out << "  <text x=\"14\" y=\"" << kSize / 2 << "\" text-anchor=\"middle\" font-size=\"14\" "
      << "transform=\"rotate(-90 14 " << kSize / 2 << ")\">precision</text>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = tick * 0.25;
    out << "  <text x=\"" << fmt_num(px(v)) << "\" y=\"" << kSize - kMargin + 18
        << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt_num(v) << "</text>\n";
    out << "  <text x=\"" << kMargin - 8 << "\" y=\"" << fmt_num(py(v) + 3)
        << "\" text-anchor=\"end\" font-size=\"10\">" << fmt_num(v) << "</text>\n";
  }
  for (size_t c = 0; c < curve.channels.size(); ++c) {
    if (!curve.channels[c].empty()) {
      out << "  <polyline fill=\"none\" stroke=\"" << kColors[c] << "\" stroke-width=\"2\" points=\"";
      for (const auto& pt : curve.channels[c])
        out << fmt_num(px(pt.recall)) << ',' << fmt_num(py(pt.precision)) << ' ';
      out << "\"/>\n";
    }
    const int ly = kMargin + 16 + static_cast<int>(c) * 18;
    out << "  <rect x=\"" << kMargin + 10 << "\" y=\"" << ly - 9
        << "\" width=\"12\" height=\"12\" fill=\"" << kColors[c] << "\"/>\n";
    out << "  <text x=\"" << kMargin + 28 << "\" y=\"" << ly
        << "\" font-size=\"12\">" << kMapNames[c] << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace scenediff
