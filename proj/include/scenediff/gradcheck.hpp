#pragma once

#include <functional>
#include <string>
#include <vector>

#include "scenediff/adam.hpp"
#include "scenediff/tensor.hpp"

namespace scenediff {

// A layer (or composite) under gradient test. `forward` must be free of
// side effects that change its own value; `backward` receives the upstream
// gradient, returns grad wrt x and accumulates parameter gradients.
struct DifferentiableFn {
  std::function<Tensor4(const Tensor4&)> forward;
  std::function<Tensor4(const Tensor4&, const Tensor4&)> backward;
  std::vector<ParamView> params;
  std::function<void()> zero_grad;
};

struct GradCheckReport {
  double max_rel_err_input = 0.0;
  double max_rel_err_params = 0.0;
  double tolerance = 0.0;

  double max_rel_err() const {
    return max_rel_err_input > max_rel_err_params ? max_rel_err_input : max_rel_err_params;
  }
  bool passed() const { return max_rel_err() < tolerance; }
};

// Central-difference check of fn's analytic gradients against the scalar
// probe L = sum(upstream * forward(x)). Reported error per entry is
// |analytic - numeric| / max(1, |analytic|, |numeric|), i.e. relative error
// floored at unit scale; identical values give exactly 0.
GradCheckReport finite_diff_check(const DifferentiableFn& fn, const Tensor4& x,
                                  const Tensor4& upstream, float eps, double tol);

// Convenience: random N(0,1) upstream drawn from `seed`.
GradCheckReport finite_diff_check(const DifferentiableFn& fn, const Tensor4& x, float eps,
                                  double tol, uint64_t seed = 0x5eed);

// Adapters binding each layer's forward/backward pair to the check. The
// referenced parameter struct must outlive the returned object.
DifferentiableFn conv2d_fn(ConvParams& p);
DifferentiableFn transposed_conv2d_fn(ConvParams& p);
DifferentiableFn batchnorm_fn(BatchNormParams& p, bool training);
DifferentiableFn relu_fn();
DifferentiableFn sigmoid_fn();

}  // namespace scenediff
