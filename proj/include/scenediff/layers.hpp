#pragma once

#include <cstdint>
#include <vector>

#include "scenediff/rng.hpp"
#include "scenediff/tensor.hpp"

namespace scenediff {

// Convolution (or transposed convolution) parameters plus matching gradient
// buffers. Weight layout is (c_out, c_in, k, k) for both directions; for the
// transposed convolution c_in is the number of channels entering the layer.
struct ConvParams {
  Tensor4 weights;  // (c_out, c_in, k, k)
  std::vector<float> bias;
  int stride = 1;
  int padding = 0;

  Tensor4 grad_weights;
  std::vector<float> grad_bias;

  static ConvParams make(int c_out, int c_in, int k, int stride, int padding);

  int out_channels() const { return weights.shape().n; }
  int in_channels() const { return weights.shape().c; }
  int kernel() const { return weights.shape().h; }
  void zero_grad();
  int64_t param_count() const { return weights.size() + static_cast<int64_t>(bias.size()); }
};

struct BatchNormParams {
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> running_mean;
  std::vector<float> running_var;
  float epsilon = 1e-5f;
  float momentum = 0.1f;

  std::vector<float> grad_gamma;
  std::vector<float> grad_beta;

  static BatchNormParams make(int channels);

  int channels() const { return static_cast<int>(gamma.size()); }
  void zero_grad();
  int64_t param_count() const { return static_cast<int64_t>(gamma.size() + beta.size()); }
};

// ---- convolution ----------------------------------------------------------

// Output spatial dims: floor((h + 2*pad - k) / stride) + 1. Pure.
Tensor4 conv2d_forward(const Tensor4& x, const ConvParams& p);

// Returns grad wrt x; accumulates weight/bias gradients into p's buffers.
Tensor4 conv2d_backward(const Tensor4& x, ConvParams& p, const Tensor4& grad_out);

// ---- transposed convolution (stride 2 only) -------------------------------

// Output spatial dims: (h - 1)*stride + k - 2*pad. With k=2, stride=2, pad=0
// this exactly doubles the input.
Tensor4 transposed_conv2d_forward(const Tensor4& x, const ConvParams& p);
Tensor4 transposed_conv2d_backward(const Tensor4& x, ConvParams& p, const Tensor4& grad_out);

// ---- batch normalization ---------------------------------------------------

// Training mode normalizes with per-channel batch statistics (biased
// variance) and folds them into the running stats via momentum; eval mode
// uses the running stats. Running-stat update is the only mutation.
Tensor4 batchnorm_forward(const Tensor4& x, BatchNormParams& p, bool training);

// Recomputes the batch statistics from x, so no cache has to be carried
// between the passes. `training` selects which statistics the forward used.
Tensor4 batchnorm_backward(const Tensor4& x, BatchNormParams& p, const Tensor4& grad_out,
                           bool training = true);

// ---- activations -----------------------------------------------------------

Tensor4 relu_forward(const Tensor4& x);
Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad_out);

// Output clamped into (0, 1) so downstream code can rely on strict bounds.
Tensor4 sigmoid_forward(const Tensor4& x);
// `y` is the forward output (derivative y*(1-y)).
Tensor4 sigmoid_backward(const Tensor4& y, const Tensor4& grad_out);

// ---- loss ------------------------------------------------------------------

struct LossResult {
  float loss = 0.0f;
  Tensor4 grad_pred;
};

// Mean over all elements of (target - pred)^2; grad = 2*(pred - target)/N.
LossResult mse_loss(const Tensor4& pred, const Tensor4& target);

// Kaiming-style fan-in init for conv weights, zero bias.
void init_conv(ConvParams& p, Rng& rng);

}  // namespace scenediff
