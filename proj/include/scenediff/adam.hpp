#pragma once

#include <span>
#include <vector>

#include "scenediff/layers.hpp"

namespace scenediff {

// View over one parameter block and its gradient buffer.
struct ParamView {
  std::span<float> value;
  std::span<float> grad;
};

std::vector<ParamView> collect_params(ConvParams& p);
std::vector<ParamView> collect_params(BatchNormParams& p);

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

// First/second-moment state lives here; the same parameter list (same order,
// same sizes) must be passed on every step. Updates parameters in place and
// zeroes the gradient buffers afterwards.
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }

  // t is the 1-based step index used for bias correction; t < 1 throws.
  void step(std::span<const ParamView> params, int t);
  void step(std::span<const ParamView> params, int t, const AdamConfig& cfg);

 private:
  AdamConfig cfg_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

}  // namespace scenediff
