#include "scenediff/adam.hpp"

#include <cmath>

#include "scenediff/errors.hpp"

namespace scenediff {

std::vector<ParamView> collect_params(ConvParams& p) {
  return {ParamView{p.weights.data(), p.grad_weights.data()}, ParamView{p.bias, p.grad_bias}};
}

std::vector<ParamView> collect_params(BatchNormParams& p) {
  return {ParamView{p.gamma, p.grad_gamma}, ParamView{p.beta, p.grad_beta}};
}

void Adam::step(std::span<const ParamView> params, int t) { step(params, t, cfg_); }

void Adam::step(std::span<const ParamView> params, int t, const AdamConfig& cfg) {
  if (t < 1) throw ValueError("adam_step: step index must be >= 1, got " + std::to_string(t));
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].value.size(), 0.0f);
      v_[i].assign(params[i].value.size(), 0.0f);
    }
  }
  if (m_.size() != params.size())
    throw ValueError("adam_step: parameter list changed between steps");

  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), t);
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), t);
  for (size_t i = 0; i < params.size(); ++i) {
    auto& pv = params[i];
    if (m_[i].size() != pv.value.size())
      throw ValueError("adam_step: parameter block size changed between steps");
    for (size_t j = 0; j < pv.value.size(); ++j) {
      const float g = pv.grad[j];
      m_[i][j] = cfg.beta1 * m_[i][j] + (1.0f - cfg.beta1) * g;
      v_[i][j] = cfg.beta2 * v_[i][j] + (1.0f - cfg.beta2) * g * g;
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      const double upd = cfg.lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
      if (upd != 0.0)
        pv.value[j] = static_cast<float>(static_cast<double>(pv.value[j]) - upd);
      pv.grad[j] = 0.0f;
    }
  }
}

}  // namespace scenediff
