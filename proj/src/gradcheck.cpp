#include "scenediff/gradcheck.hpp"

#include <cmath>

#include "scenediff/errors.hpp"
#include "scenediff/rng.hpp"

namespace scenediff {

namespace {

double probe_loss(const DifferentiableFn& fn, const Tensor4& x, const Tensor4& upstream) {
  const Tensor4 out = fn.forward(x);
  require_same_shape(out, upstream, "finite_diff_check upstream");
  double acc = 0.0;
  auto o = out.data();
  auto u = upstream.data();
  for (size_t i = 0; i < o.size(); ++i) acc += static_cast<double>(o[i]) * u[i];
  return acc;
}

double rel_err(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  if (diff == 0.0) return 0.0;
  return diff / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

// Central difference over one float slot. Perturbs in place, restores after.
double central_diff(const DifferentiableFn& fn, const Tensor4& x, const Tensor4& upstream,
                    float* slot, float eps) {
  const float saved = *slot;
  *slot = saved + eps;
  const double hi_val = static_cast<double>(*slot);
  const double lp = probe_loss(fn, x, upstream);
  *slot = saved - eps;
  const double lo_val = static_cast<double>(*slot);
  const double lm = probe_loss(fn, x, upstream);
  *slot = saved;
  // use the realized perturbation, not the nominal one
  return (lp - lm) / (hi_val - lo_val);
}

}  // namespace

GradCheckReport finite_diff_check(const DifferentiableFn& fn, const Tensor4& x,
                                  const Tensor4& upstream, float eps, double tol) {
  if (!(eps > 0.0f)) throw ValueError("finite_diff_check: eps must be positive");

  GradCheckReport report;
  report.tolerance = tol;

  if (fn.zero_grad) fn.zero_grad();
  Tensor4 probe = x;
  const Tensor4 analytic_gx = fn.backward(probe, upstream);
  require_same_shape(analytic_gx, x, "finite_diff_check grad_x");

  // Snapshot parameter gradients before FD evaluations disturb anything.
  std::vector<std::vector<float>> param_grads;
  param_grads.reserve(fn.params.size());
  for (const auto& pv : fn.params)
    param_grads.emplace_back(pv.grad.begin(), pv.grad.end());

  auto gx = analytic_gx.data();
  auto px = probe.data();
  for (size_t i = 0; i < px.size(); ++i) {
    const double numeric = central_diff(fn, probe, upstream, &px[i], eps);
    const double e = rel_err(gx[i], numeric);
    if (e > report.max_rel_err_input) report.max_rel_err_input = e;
  }

  for (size_t b = 0; b < fn.params.size(); ++b) {
    auto value = fn.params[b].value;
    for (size_t j = 0; j < value.size(); ++j) {
      const double numeric = central_diff(fn, probe, upstream, &value[j], eps);
      const double e = rel_err(param_grads[b][j], numeric);
      if (e > report.max_rel_err_params) report.max_rel_err_params = e;
    }
  }
  return report;
}

GradCheckReport finite_diff_check(const DifferentiableFn& fn, const Tensor4& x, float eps,
                                  double tol, uint64_t seed) {
  Rng rng(seed);
  Tensor4 upstream(fn.forward(x).shape());
  for (float& v : upstream.data()) v = static_cast<float>(rng.normal());
  return finite_diff_check(fn, x, upstream, eps, tol);
}

DifferentiableFn conv2d_fn(ConvParams& p) {
  DifferentiableFn fn;
  fn.forward = [&p](const Tensor4& x) { return conv2d_forward(x, p); };
  fn.backward = [&p](const Tensor4& x, const Tensor4& go) { return conv2d_backward(x, p, go); };
  fn.params = collect_params(p);
  fn.zero_grad = [&p] { p.zero_grad(); };
  return fn;
}

DifferentiableFn transposed_conv2d_fn(ConvParams& p) {
  DifferentiableFn fn;
  fn.forward = [&p](const Tensor4& x) { return transposed_conv2d_forward(x, p); };
  fn.backward = [&p](const Tensor4& x, const Tensor4& go) {
    return transposed_conv2d_backward(x, p, go);
  };
  fn.params = collect_params(p);
  fn.zero_grad = [&p] { p.zero_grad(); };
  return fn;
}

DifferentiableFn batchnorm_fn(BatchNormParams& p, bool training) {
  DifferentiableFn fn;
  fn.forward = [&p, training](const Tensor4& x) {
    // forward probes must not drift the running stats
    BatchNormParams scratch = p;
    return batchnorm_forward(x, scratch, training);
  };
  fn.backward = [&p, training](const Tensor4& x, const Tensor4& go) {
    return batchnorm_backward(x, p, go, training);
  };
  fn.params = collect_params(p);
  fn.zero_grad = [&p] { p.zero_grad(); };
  return fn;
}

DifferentiableFn relu_fn() {
  DifferentiableFn fn;
  fn.forward = [](const Tensor4& x) { return relu_forward(x); };
  fn.backward = [](const Tensor4& x, const Tensor4& go) { return relu_backward(x, go); };
  return fn;
}

DifferentiableFn sigmoid_fn() {
  DifferentiableFn fn;
  fn.forward = [](const Tensor4& x) { return sigmoid_forward(x); };
  fn.backward = [](const Tensor4& x, const Tensor4& go) {
    return sigmoid_backward(sigmoid_forward(x), go);
  };
  return fn;
}

}  // namespace scenediff
