#include "scenediff/layers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

#include "scenediff/errors.hpp"

namespace scenediff {

namespace {

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }
int ceil_div(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }

// Inclusive range of output index o with 0 <= o*stride + offset < extent.
struct IndexSpan {
  int lo;
  int hi;
};
IndexSpan valid_span(int extent, int out_extent, int stride, int offset) {
  int lo = std::max(0, ceil_div(-offset, stride));
  int hi = std::min(out_extent - 1, floor_div(extent - 1 - offset, stride));
  return {lo, hi};
}

void require_channels(const Tensor4& x, const ConvParams& p, const char* op) {
  if (x.shape().c != p.in_channels())
    throw ShapeError(std::string(op) + ": input shape " + to_string(x.shape()) +
                     " has " + std::to_string(x.shape().c) + " channels but weights " +
                     to_string(p.weights.shape()) + " expect " + std::to_string(p.in_channels()));
}

}  // namespace

ConvParams ConvParams::make(int c_out, int c_in, int k, int stride, int padding) {
  if (c_out < 1 || c_in < 1 || k < 1) throw ValueError("conv params: channel/kernel sizes must be >= 1");
  if (stride < 1) throw ValueError("conv params: stride must be >= 1");
  if (padding < 0) throw ValueError("conv params: padding must be >= 0");
  ConvParams p;
  p.weights = Tensor4(c_out, c_in, k, k);
  p.bias.assign(static_cast<size_t>(c_out), 0.0f);
  p.stride = stride;
  p.padding = padding;
  p.grad_weights = Tensor4(c_out, c_in, k, k);
  p.grad_bias.assign(static_cast<size_t>(c_out), 0.0f);
  return p;
}

void ConvParams::zero_grad() {
  grad_weights.fill(0.0f);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0f);
}

BatchNormParams BatchNormParams::make(int channels) {
  if (channels < 1) throw ValueError("batchnorm params: channels must be >= 1");
  BatchNormParams p;
  p.gamma.assign(static_cast<size_t>(channels), 1.0f);
  p.beta.assign(static_cast<size_t>(channels), 0.0f);
  p.running_mean.assign(static_cast<size_t>(channels), 0.0f);
  p.running_var.assign(static_cast<size_t>(channels), 1.0f);
  p.grad_gamma.assign(static_cast<size_t>(channels), 0.0f);
  p.grad_beta.assign(static_cast<size_t>(channels), 0.0f);
  return p;
}

void BatchNormParams::zero_grad() {
  std::fill(grad_gamma.begin(), grad_gamma.end(), 0.0f);
  std::fill(grad_beta.begin(), grad_beta.end(), 0.0f);
}

// ---- convolution ----------------------------------------------------------

namespace {

// Adds the 3x3/pad-1/stride-1 correlation of one source plane into a
// same-sized accumulator. w9 is the kernel row-major. The interior is a fused
// nine-tap sweep; borders fall back to per-tap handling.
void stencil3x3_accumulate(const float* src, int h, int w, const double* w9, double* acc) {
  auto tap_row = [&](int r, int kh) {
    const int ih = r + kh - 1;
    if (ih < 0 || ih >= h) return;
    const float* xrow = src + static_cast<int64_t>(ih) * w;
    double* arow = acc + static_cast<int64_t>(r) * w;
    const double w0 = w9[kh * 3 + 0], w1 = w9[kh * 3 + 1], w2 = w9[kh * 3 + 2];
    if (w >= 2) {
      arow[0] += w1 * xrow[0] + w2 * xrow[1];
      arow[w - 1] += w0 * xrow[w - 2] + w1 * xrow[w - 1];
    } else {
      arow[0] += w1 * xrow[0];
      return;
    }
    for (int ocol = 1; ocol < w - 1; ++ocol)
      arow[ocol] += w0 * xrow[ocol - 1] + w1 * xrow[ocol] + w2 * xrow[ocol + 1];
  };

  const int r_lo = 1, r_hi = h - 2;
  for (int r = 0; r < std::min(h, r_lo); ++r)
    for (int kh = 0; kh < 3; ++kh) tap_row(r, kh);

  const double w00 = w9[0], w01 = w9[1], w02 = w9[2];
  const double w10 = w9[3], w11 = w9[4], w12 = w9[5];
  const double w20 = w9[6], w21 = w9[7], w22 = w9[8];
  for (int r = r_lo; r <= r_hi; ++r) {
    const float* x0 = src + static_cast<int64_t>(r - 1) * w;
    const float* x1 = x0 + w;
    const float* x2 = x1 + w;
    double* arow = acc + static_cast<int64_t>(r) * w;
    arow[0] += w01 * x0[0] + w02 * x0[1] + w11 * x1[0] + w12 * x1[1] + w21 * x2[0] + w22 * x2[1];
    for (int ocol = 1; ocol < w - 1; ++ocol) {
      arow[ocol] += w00 * x0[ocol - 1] + w01 * x0[ocol] + w02 * x0[ocol + 1] +
                    w10 * x1[ocol - 1] + w11 * x1[ocol] + w12 * x1[ocol + 1] +
                    w20 * x2[ocol - 1] + w21 * x2[ocol] + w22 * x2[ocol + 1];
    }
    arow[w - 1] += w00 * x0[w - 2] + w01 * x0[w - 1] + w10 * x1[w - 2] + w11 * x1[w - 1] +
                   w20 * x2[w - 2] + w21 * x2[w - 1];
  }

  for (int r = std::max(r_lo, r_hi + 1); r < h; ++r)
    for (int kh = 0; kh < 3; ++kh) tap_row(r, kh);
}

// Shifted row dot with four independent partial sums.
double shifted_row_dot(const float* a, const float* b, int count) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= count; i += 4) {
    s0 += static_cast<double>(a[i]) * b[i];
    s1 += static_cast<double>(a[i + 1]) * b[i + 1];
    s2 += static_cast<double>(a[i + 2]) * b[i + 2];
    s3 += static_cast<double>(a[i + 3]) * b[i + 3];
  }
  for (; i < count; ++i) s0 += static_cast<double>(a[i]) * b[i];
  return (s0 + s1) + (s2 + s3);
}

bool use_stencil3x3(int k, int s, int pad, int h, int w) {
  return k == 3 && s == 1 && pad == 1 && h >= 3 && w >= 3;
}

}  // namespace

Tensor4 conv2d_forward(const Tensor4& x, const ConvParams& p) {
  require_channels(x, p, "conv2d_forward");
  const auto [n, c, h, w] = x.shape();
  const int k = p.kernel(), s = p.stride, pad = p.padding;
  const int oh = (h + 2 * pad - k) / s + 1;
  const int ow = (w + 2 * pad - k) / s + 1;
  if (h + 2 * pad < k || w + 2 * pad < k || oh < 1 || ow < 1)
    throw ShapeError("conv2d_forward: kernel " + std::to_string(k) + " with padding " +
                     std::to_string(pad) + " does not fit input " + to_string(x.shape()));

  Tensor4 out(n, p.out_channels(), oh, ow);
  const bool fast3x3 = use_stencil3x3(k, s, pad, h, w);
  std::vector<double> acc(static_cast<size_t>(oh) * ow);
  std::array<double, 9> w9;
  for (int in = 0; in < n; ++in) {
    for (int co = 0; co < p.out_channels(); ++co) {
      std::fill(acc.begin(), acc.end(), static_cast<double>(p.bias[co]));
      for (int ci = 0; ci < c; ++ci) {
        const float* xp = x.plane(in, ci);
        if (fast3x3) {
          for (int t = 0; t < 9; ++t) w9[t] = p.weights.at(co, ci, t / 3, t % 3);
          stencil3x3_accumulate(xp, h, w, w9.data(), acc.data());
          continue;
        }
        for (int kh = 0; kh < k; ++kh) {
          const auto [row_lo, row_hi] = valid_span(h, oh, s, kh - pad);
          for (int kw = 0; kw < k; ++kw) {
            const double wv = p.weights.at(co, ci, kh, kw);
            if (wv == 0.0) continue;
            const auto [col_lo, col_hi] = valid_span(w, ow, s, kw - pad);
            for (int r = row_lo; r <= row_hi; ++r) {
              const float* xrow = xp + static_cast<int64_t>(r * s + kh - pad) * w + (kw - pad);
              double* arow = acc.data() + static_cast<int64_t>(r) * ow;
              for (int ocol = col_lo; ocol <= col_hi; ++ocol)
                arow[ocol] += wv * xrow[ocol * s];
            }
          }
        }
      }
      float* op = out.plane(in, co);
      for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) op[i] = static_cast<float>(acc[i]);
    }
  }
  return out;
}

Tensor4 conv2d_backward(const Tensor4& x, ConvParams& p, const Tensor4& grad_out) {
  require_channels(x, p, "conv2d_backward");
  if (x.shape().h + 2 * p.padding < p.kernel() || x.shape().w + 2 * p.padding < p.kernel())
    throw ShapeError("conv2d_backward: kernel does not fit input " + to_string(x.shape()));
  const Shape4 want{x.shape().n, p.out_channels(),
                    (x.shape().h + 2 * p.padding - p.kernel()) / p.stride + 1,
                    (x.shape().w + 2 * p.padding - p.kernel()) / p.stride + 1};
  if (!(grad_out.shape() == want))
    throw ShapeError("conv2d_backward: grad_out shape " + to_string(grad_out.shape()) +
                     " does not match forward output " + to_string(want));

  const auto [n, c, h, w] = x.shape();
  const int k = p.kernel(), s = p.stride, pad = p.padding;
  const int oh = grad_out.shape().h, ow = grad_out.shape().w;

  Tensor4 grad_x(x.shape());
  std::vector<double> gw(static_cast<size_t>(p.weights.size()), 0.0);
  std::vector<double> gb(p.bias.size(), 0.0);
  std::vector<double> gx(static_cast<size_t>(c) * h * w);
  const bool fast3x3 = use_stencil3x3(k, s, pad, h, w);
  std::array<double, 9> w9;

  for (int in = 0; in < n; ++in) {
    std::fill(gx.begin(), gx.end(), 0.0);
    for (int co = 0; co < p.out_channels(); ++co) {
      const float* gop = grad_out.plane(in, co);
      double bacc = 0.0;
      for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) bacc += gop[i];
      gb[co] += bacc;

      for (int ci = 0; ci < c; ++ci) {
        const float* xp = x.plane(in, ci);
        double* gxp = gx.data() + static_cast<int64_t>(ci) * h * w;
        if (fast3x3) {
          // grad wrt input: correlate grad_out with the flipped kernel
          for (int t = 0; t < 9; ++t) w9[t] = p.weights.at(co, ci, 2 - t / 3, 2 - t % 3);
          stencil3x3_accumulate(gop, h, w, w9.data(), gxp);
          // grad wrt weights: shifted row dots of grad_out against x
          for (int kh = 0; kh < 3; ++kh) {
            const int r_lo = std::max(0, 1 - kh), r_hi = std::min(h - 1, h - kh);
            for (int kw = 0; kw < 3; ++kw) {
              const int col_lo = std::max(0, 1 - kw), col_hi = std::min(w - 1, w - kw);
              const int len = col_hi - col_lo + 1;
              double wacc = 0.0;
              for (int r = r_lo; r <= r_hi; ++r) {
                const float* gorow = gop + static_cast<int64_t>(r) * w + col_lo;
                const float* xrow = xp + static_cast<int64_t>(r + kh - 1) * w + col_lo + kw - 1;
                wacc += shifted_row_dot(gorow, xrow, len);
              }
              gw[p.weights.index(co, ci, kh, kw)] += wacc;
            }
          }
          continue;
        }
        for (int kh = 0; kh < k; ++kh) {
          const auto [row_lo, row_hi] = valid_span(h, oh, s, kh - pad);
          for (int kw = 0; kw < k; ++kw) {
            const auto [col_lo, col_hi] = valid_span(w, ow, s, kw - pad);
            const double wv = p.weights.at(co, ci, kh, kw);
            double wacc = 0.0;
            for (int r = row_lo; r <= row_hi; ++r) {
              const int ih = r * s + kh - pad;
              const float* xrow = xp + static_cast<int64_t>(ih) * w + (kw - pad);
              double* gxrow = gxp + static_cast<int64_t>(ih) * w + (kw - pad);
              const float* gorow = gop + static_cast<int64_t>(r) * ow;
              for (int ocol = col_lo; ocol <= col_hi; ++ocol) {
                const double g = gorow[ocol];
                wacc += g * xrow[ocol * s];
                gxrow[ocol * s] += wv * g;
              }
            }
            gw[p.weights.index(co, ci, kh, kw)] += wacc;
          }
        }
      }
    }
    float* gxout = grad_x.plane(in, 0);
    for (size_t i = 0; i < gx.size(); ++i) gxout[i] = static_cast<float>(gx[i]);
  }

  auto wspan = p.grad_weights.data();
  for (size_t i = 0; i < gw.size(); ++i) wspan[i] += static_cast<float>(gw[i]);
  for (size_t i = 0; i < gb.size(); ++i) p.grad_bias[i] += static_cast<float>(gb[i]);
  return grad_x;
}

// ---- transposed convolution ------------------------------------------------

namespace {

Shape4 tconv_output_shape(const Tensor4& x, const ConvParams& p) {
  const auto [n, c, h, w] = x.shape();
  const int k = p.kernel(), s = p.stride, pad = p.padding;
  const int oh = (h - 1) * s + k - 2 * pad;
  const int ow = (w - 1) * s + k - 2 * pad;
  if (oh < 1 || ow < 1)
    throw ShapeError("transposed_conv2d: degenerate output for input " + to_string(x.shape()));
  return Shape4{n, p.out_channels(), oh, ow};
}

void require_tconv(const Tensor4& x, const ConvParams& p, const char* op) {
  if (p.stride != 2)
    throw ValueError(std::string(op) + ": only stride 2 is supported, got stride " +
                     std::to_string(p.stride));
  require_channels(x, p, op);
}

}  // namespace

Tensor4 transposed_conv2d_forward(const Tensor4& x, const ConvParams& p) {
  require_tconv(x, p, "transposed_conv2d_forward");
  const auto [n, c, h, w] = x.shape();
  const int k = p.kernel(), s = p.stride, pad = p.padding;
  const Shape4 oshape = tconv_output_shape(x, p);
  const int oh = oshape.h, ow = oshape.w;

  Tensor4 out(oshape);
  std::vector<double> acc(static_cast<size_t>(oh) * ow);
  for (int in = 0; in < n; ++in) {
    for (int co = 0; co < p.out_channels(); ++co) {
      std::fill(acc.begin(), acc.end(), static_cast<double>(p.bias[co]));
      for (int ci = 0; ci < c; ++ci) {
        const float* xp = x.plane(in, ci);
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            const double wv = p.weights.at(co, ci, kh, kw);
            if (wv == 0.0) continue;
            for (int ih = 0; ih < h; ++ih) {
              const int r = ih * s + kh - pad;
              if (r < 0 || r >= oh) continue;
              double* arow = acc.data() + static_cast<int64_t>(r) * ow + (kw - pad);
              const float* xrow = xp + static_cast<int64_t>(ih) * w;
              const auto [lo, hi] = valid_span(ow, w, s, kw - pad);
              for (int iw = lo; iw <= hi; ++iw) arow[iw * s] += wv * xrow[iw];
            }
          }
        }
      }
      float* op = out.plane(in, co);
      for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) op[i] = static_cast<float>(acc[i]);
    }
  }
  return out;
}

Tensor4 transposed_conv2d_backward(const Tensor4& x, ConvParams& p, const Tensor4& grad_out) {
  require_tconv(x, p, "transposed_conv2d_backward");
  const Shape4 want = tconv_output_shape(x, p);
  if (!(grad_out.shape() == want))
    throw ShapeError("transposed_conv2d_backward: grad_out shape " + to_string(grad_out.shape()) +
                     " does not match forward output " + to_string(want));

  const auto [n, c, h, w] = x.shape();
  const int k = p.kernel(), s = p.stride, pad = p.padding;
  const int oh = want.h, ow = want.w;

  Tensor4 grad_x(x.shape());
  std::vector<double> gw(static_cast<size_t>(p.weights.size()), 0.0);
  std::vector<double> gb(p.bias.size(), 0.0);
  std::vector<double> gx(static_cast<size_t>(c) * h * w);

  for (int in = 0; in < n; ++in) {
    std::fill(gx.begin(), gx.end(), 0.0);
    for (int co = 0; co < p.out_channels(); ++co) {
      const float* gop = grad_out.plane(in, co);
      double bacc = 0.0;
      for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) bacc += gop[i];
      gb[co] += bacc;

      for (int ci = 0; ci < c; ++ci) {
        const float* xp = x.plane(in, ci);
        double* gxp = gx.data() + static_cast<int64_t>(ci) * h * w;
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            const double wv = p.weights.at(co, ci, kh, kw);
            double wacc = 0.0;
            for (int ih = 0; ih < h; ++ih) {
              const int r = ih * s + kh - pad;
              if (r < 0 || r >= oh) continue;
              const float* gorow = gop + static_cast<int64_t>(r) * ow + (kw - pad);
              const float* xrow = xp + static_cast<int64_t>(ih) * w;
              double* gxrow = gxp + static_cast<int64_t>(ih) * w;
              const auto [lo, hi] = valid_span(ow, w, s, kw - pad);
              for (int iw = lo; iw <= hi; ++iw) {
                const double g = gorow[iw * s];
                wacc += g * xrow[iw];
                gxrow[iw] += wv * g;
              }
            }
            gw[p.weights.index(co, ci, kh, kw)] += wacc;
          }
        }
      }
    }
    float* gxout = grad_x.plane(in, 0);
    for (size_t i = 0; i < gx.size(); ++i) gxout[i] = static_cast<float>(gx[i]);
  }

  auto wspan = p.grad_weights.data();
  for (size_t i = 0; i < gw.size(); ++i) wspan[i] += static_cast<float>(gw[i]);
  for (size_t i = 0; i < gb.size(); ++i) p.grad_bias[i] += static_cast<float>(gb[i]);
  return grad_x;
}

// ---- batch normalization ---------------------------------------------------

namespace {

void require_bn(const Tensor4& x, const BatchNormParams& p, const char* op) {
  if (x.shape().c != p.channels())
    throw ShapeError(std::string(op) + ": input " + to_string(x.shape()) + " has " +
                     std::to_string(x.shape().c) + " channels, params have " +
                     std::to_string(p.channels()));
  if (static_cast<int64_t>(x.shape().n) * x.shape().h * x.shape().w == 0)
    throw ValueError(std::string(op) + ": zero-element channel in input " + to_string(x.shape()));
}

// Biased per-channel mean/variance over (n, h, w), double accumulation.
void batch_stats(const Tensor4& x, int channel, double* mean, double* var) {
  const auto [n, c, h, w] = x.shape();
  const int64_t plane = static_cast<int64_t>(h) * w;
  const double count = static_cast<double>(n) * plane;
  double sum = 0.0, sumsq = 0.0;
  for (int in = 0; in < n; ++in) {
    const float* xp = x.plane(in, channel);
    for (int64_t i = 0; i < plane; ++i) {
      const double v = xp[i];
      sum += v;
      sumsq += v * v;
    }
  }
  *mean = sum / count;
  *var = std::max(0.0, sumsq / count - (*mean) * (*mean));
}

}  // namespace

Tensor4 batchnorm_forward(const Tensor4& x, BatchNormParams& p, bool training) {
  require_bn(x, p, "batchnorm_forward");
  const auto [n, c, h, w] = x.shape();
  const int64_t plane = static_cast<int64_t>(h) * w;

  Tensor4 out(x.shape());
  for (int ci = 0; ci < c; ++ci) {
    double mean, var;
    if (training) {
      batch_stats(x, ci, &mean, &var);
      const double m = p.momentum;
      p.running_mean[ci] = static_cast<float>((1.0 - m) * p.running_mean[ci] + m * mean);
      p.running_var[ci] = static_cast<float>((1.0 - m) * p.running_var[ci] + m * var);
    } else {
      mean = p.running_mean[ci];
      var = p.running_var[ci];
    }
    const double inv_std = 1.0 / std::sqrt(var + static_cast<double>(p.epsilon));
    const double g = p.gamma[ci], b = p.beta[ci];
    for (int in = 0; in < n; ++in) {
      const float* xp = x.plane(in, ci);
      float* op = out.plane(in, ci);
      for (int64_t i = 0; i < plane; ++i)
        op[i] = static_cast<float>(g * ((xp[i] - mean) * inv_std) + b);
    }
  }
  return out;
}

Tensor4 batchnorm_backward(const Tensor4& x, BatchNormParams& p, const Tensor4& grad_out,
                           bool training) {
  require_bn(x, p, "batchnorm_backward");
  require_same_shape(x, grad_out, "batchnorm_backward");
  const auto [n, c, h, w] = x.shape();
  const int64_t plane = static_cast<int64_t>(h) * w;
  const double count = static_cast<double>(n) * plane;

  Tensor4 grad_x(x.shape());
  for (int ci = 0; ci < c; ++ci) {
    double mean, var;
    if (training) {
      batch_stats(x, ci, &mean, &var);
    } else {
      mean = p.running_mean[ci];
      var = p.running_var[ci];
    }
    const double inv_std = 1.0 / std::sqrt(var + static_cast<double>(p.epsilon));
    const double g = p.gamma[ci];

    double sum_g = 0.0, sum_gx = 0.0;
    for (int in = 0; in < n; ++in) {
      const float* xp = x.plane(in, ci);
      const float* gop = grad_out.plane(in, ci);
      for (int64_t i = 0; i < plane; ++i) {
        const double xhat = (xp[i] - mean) * inv_std;
        sum_g += gop[i];
        sum_gx += gop[i] * xhat;
      }
    }
    p.grad_beta[ci] += static_cast<float>(sum_g);
    p.grad_gamma[ci] += static_cast<float>(sum_gx);

    for (int in = 0; in < n; ++in) {
      const float* xp = x.plane(in, ci);
      const float* gop = grad_out.plane(in, ci);
      float* gxp = grad_x.plane(in, ci);
      if (training) {
        for (int64_t i = 0; i < plane; ++i) {
          const double xhat = (xp[i] - mean) * inv_std;
          gxp[i] = static_cast<float>(g * inv_std * (gop[i] - sum_g / count - xhat * sum_gx / count));
        }
      } else {
        for (int64_t i = 0; i < plane; ++i)
          gxp[i] = static_cast<float>(g * inv_std * gop[i]);
      }
    }
  }
  return grad_x;
}

// ---- activations -----------------------------------------------------------

Tensor4 relu_forward(const Tensor4& x) {
  Tensor4 out(x.shape());
  auto src = x.data();
  auto dst = out.data();
  for (size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0f ? src[i] : 0.0f;
  return out;
}

Tensor4 relu_backward(const Tensor4& x, const Tensor4& grad_out) {
  require_same_shape(x, grad_out, "relu_backward");
  Tensor4 grad(x.shape());
  auto src = x.data();
  auto go = grad_out.data();
  auto dst = grad.data();
  for (size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0f ? go[i] : 0.0f;
  return grad;
}

namespace {
constexpr float kSigmoidMin = 1e-7f;
}

Tensor4 sigmoid_forward(const Tensor4& x) {
  Tensor4 out(x.shape());
  auto src = x.data();
  auto dst = out.data();
  for (size_t i = 0; i < src.size(); ++i) {
    const float v = src[i];
    float s;
    if (v >= 0.0f) {
      s = 1.0f / (1.0f + std::exp(-v));
    } else {
      const float e = std::exp(v);
      s = e / (1.0f + e);
    }
    dst[i] = std::clamp(s, kSigmoidMin, 1.0f - kSigmoidMin);
  }
  return out;
}

Tensor4 sigmoid_backward(const Tensor4& y, const Tensor4& grad_out) {
  require_same_shape(y, grad_out, "sigmoid_backward");
  Tensor4 grad(y.shape());
  auto s = y.data();
  auto go = grad_out.data();
  auto dst = grad.data();
  for (size_t i = 0; i < s.size(); ++i) dst[i] = go[i] * s[i] * (1.0f - s[i]);
  return grad;
}

// ---- loss ------------------------------------------------------------------

LossResult mse_loss(const Tensor4& pred, const Tensor4& target) {
  require_same_shape(pred, target, "mse_loss");
  const double n = static_cast<double>(pred.size());
  if (n == 0.0) throw ValueError("mse_loss: empty tensors");

  LossResult res;
  res.grad_pred = Tensor4(pred.shape());
  auto pp = pred.data();
  auto tp = target.data();
  auto gp = res.grad_pred.data();
  double acc = 0.0;
  for (size_t i = 0; i < pp.size(); ++i) {
    const double d = static_cast<double>(tp[i]) - pp[i];
    acc += d * d;
    gp[i] = static_cast<float>(2.0 * (static_cast<double>(pp[i]) - tp[i]) / n);
  }
  res.loss = static_cast<float>(acc / n);
  return res;
}

void init_conv(ConvParams& p, Rng& rng) {
  const double fan_in = static_cast<double>(p.in_channels()) * p.kernel() * p.kernel();
  const double std_dev = std::sqrt(2.0 / fan_in);
  for (float& v : p.weights.data()) v = static_cast<float>(rng.normal(0.0, std_dev));
  std::fill(p.bias.begin(), p.bias.end(), 0.0f);
}

}  // namespace scenediff
