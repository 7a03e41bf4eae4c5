#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "scenediff/adam.hpp"
#include "scenediff/errors.hpp"
#include "scenediff/gradcheck.hpp"
#include "scenediff/layers.hpp"
#include "support/oracles.hpp"

using namespace scenediff;

TEST_CASE("conv2d identity 1x1 kernel") {
  ConvParams p = ConvParams::make(1, 1, 1, 1, 0);
  p.weights.at(0, 0, 0, 0) = 1.0f;
  Tensor4 x(1, 1, 1, 1);
  x.at(0, 0, 0, 0) = 5.0f;
  const Tensor4 out = conv2d_forward(x, p);
  CHECK(out.shape() == Shape4{1, 1, 1, 1});
  CHECK(out.at(0, 0, 0, 0) == 5.0f);
}

TEST_CASE("conv2d delta-center kernel is identity") {
  ConvParams p = ConvParams::make(1, 1, 3, 1, 1);
  p.weights.at(0, 0, 1, 1) = 1.0f;
  Tensor4 x(1, 1, 4, 4);
  oracle::fill_random(x, 42);
  const Tensor4 out = conv2d_forward(x, p);
  REQUIRE(out.shape() == x.shape());
  for (int h = 0; h < 4; ++h)
    for (int w = 0; w < 4; ++w) CHECK(out.at(0, 0, h, w) == x.at(0, 0, h, w));
}

TEST_CASE("conv2d stride 2 matches nested-loop oracle exactly") {
  ConvParams p = ConvParams::make(3, 2, 3, 2, 1);
  oracle::fill_normal(p.weights, 7);
  Rng rng(8);
  for (float& b : p.bias) b = static_cast<float>(rng.normal());
  Tensor4 x(1, 2, 4, 4);
  oracle::fill_random(x, 9);

  const Tensor4 got = conv2d_forward(x, p);
  const Tensor4 want = oracle::conv2d_reference(x, p);
  REQUIRE(got.shape() == want.shape());
  CHECK(got.same_data(want));
}

TEST_CASE("conv2d channel mismatch raises a shape error naming both shapes") {
  ConvParams p = ConvParams::make(4, 3, 3, 1, 1);
  Tensor4 x(1, 2, 4, 4);
  CHECK_THROWS_AS(conv2d_forward(x, p), ShapeError);
  try {
    conv2d_forward(x, p);
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(1,2,4,4)") != std::string::npos);
    CHECK(msg.find("(4,3,3,3)") != std::string::npos);
  }
}

TEST_CASE("conv2d leaves inputs unmodified") {
  ConvParams p = ConvParams::make(2, 2, 3, 1, 1);
  oracle::fill_normal(p.weights, 3);
  Tensor4 x(2, 2, 5, 5);
  oracle::fill_random(x, 4);
  const Tensor4 x_copy = x;
  const ConvParams p_copy = p;
  (void)conv2d_forward(x, p);
  CHECK(x.same_data(x_copy));
  CHECK(p.weights.same_data(p_copy.weights));
}

TEST_CASE("conv2d backward: zero upstream gives zero gradients") {
  ConvParams p = ConvParams::make(2, 2, 3, 2, 1);
  oracle::fill_normal(p.weights, 5);
  Tensor4 x(1, 2, 5, 5);
  oracle::fill_random(x, 6);
  const Tensor4 out = conv2d_forward(x, p);
  const Tensor4 go(out.shape());
  const Tensor4 gx = conv2d_backward(x, p, go);
  for (float v : gx.data()) CHECK(v == 0.0f);
  for (float v : p.grad_weights.data()) CHECK(v == 0.0f);
  for (float v : p.grad_bias) CHECK(v == 0.0f);
}

TEST_CASE("conv2d backward: scalar chain rule on 1x1 kernel") {
  ConvParams p = ConvParams::make(1, 1, 1, 1, 0);
  p.weights.at(0, 0, 0, 0) = 1.7f;
  const float v = 0.83f, g = -2.5f;
  Tensor4 x(1, 1, 1, 1);
  x.at(0, 0, 0, 0) = v;
  Tensor4 go(1, 1, 1, 1);
  go.at(0, 0, 0, 0) = g;
  const Tensor4 gx = conv2d_backward(x, p, go);
  CHECK(p.grad_weights.at(0, 0, 0, 0) == doctest::Approx(g * v));
  CHECK(p.grad_bias[0] == doctest::Approx(g));
  CHECK(gx.at(0, 0, 0, 0) == doctest::Approx(g * 1.7f));
}

TEST_CASE("conv2d gradients match central finite differences") {
  ConvParams p = ConvParams::make(2, 2, 3, 2, 1);
  oracle::fill_normal(p.weights, 11);
  Tensor4 x(1, 2, 5, 5);
  oracle::fill_random(x, 12);
  const auto report = finite_diff_check(conv2d_fn(p), x, 1e-3f, 1e-3);
  CHECK(report.passed());
}

TEST_CASE("conv2d stride 1 3x3 agrees with the oracle and finite differences") {
  ConvParams p = ConvParams::make(3, 2, 3, 1, 1);
  oracle::fill_normal(p.weights, 13);
  Rng rng(14);
  for (float& b : p.bias) b = static_cast<float>(rng.normal());
  Tensor4 x(2, 2, 6, 7);
  oracle::fill_random(x, 15);

  const Tensor4 got = conv2d_forward(x, p);
  const Tensor4 want = oracle::conv2d_reference(x, p);
  REQUIRE(got.shape() == want.shape());
  auto g = got.data();
  auto e = want.data();
  for (size_t i = 0; i < g.size(); ++i)
    CHECK(g[i] == doctest::Approx(e[i]).epsilon(1e-6));

  Tensor4 small(1, 2, 5, 5);
  oracle::fill_random(small, 16);
  CHECK(finite_diff_check(conv2d_fn(p), small, 1e-3f, 1e-3).passed());
}

TEST_CASE("conv2d stride/padding shape rules") {
  for (int k : {1, 3}) {
    ConvParams p1 = ConvParams::make(2, 1, k, 1, (k - 1) / 2);
    Tensor4 x(1, 1, 6, 10);
    CHECK(conv2d_forward(x, p1).shape() == Shape4{1, 2, 6, 10});
    ConvParams p2 = ConvParams::make(2, 1, k, 2, (k - 1) / 2);
    CHECK(conv2d_forward(x, p2).shape() == Shape4{1, 2, 3, 5});
  }
}

TEST_CASE("transposed conv distributes a single pixel") {
  ConvParams p = ConvParams::make(1, 1, 2, 2, 0);
  p.weights.fill(1.0f);
  Tensor4 x(1, 1, 1, 1);
  x.at(0, 0, 0, 0) = 1.0f;
  const Tensor4 out = transposed_conv2d_forward(x, p);
  REQUIRE(out.shape() == Shape4{1, 1, 2, 2});
  for (float v : out.data()) CHECK(v == 1.0f);
}

TEST_CASE("transposed conv matches scatter-accumulate oracle exactly") {
  ConvParams p = ConvParams::make(3, 2, 2, 2, 0);
  oracle::fill_normal(p.weights, 21);
  Rng rng(22);
  for (float& b : p.bias) b = static_cast<float>(rng.normal());
  Tensor4 x(1, 2, 3, 3);
  oracle::fill_random(x, 23);
  const Tensor4 got = transposed_conv2d_forward(x, p);
  const Tensor4 want = oracle::transposed_conv2d_reference(x, p);
  REQUIRE(got.shape() == want.shape());
  CHECK(got.same_data(want));
}

TEST_CASE("transposed conv doubles spatial dims") {
  ConvParams p = ConvParams::make(4, 3, 2, 2, 0);
  Tensor4 x(2, 3, 5, 7);
  CHECK(transposed_conv2d_forward(x, p).shape() == Shape4{2, 4, 10, 14});
}

TEST_CASE("transposed conv rejects unsupported stride") {
  ConvParams p = ConvParams::make(1, 1, 2, 1, 0);
  Tensor4 x(1, 1, 3, 3);
  CHECK_THROWS_AS(transposed_conv2d_forward(x, p), ValueError);
}

TEST_CASE("transposed conv gradients match finite differences") {
  ConvParams p = ConvParams::make(2, 2, 2, 2, 0);
  oracle::fill_normal(p.weights, 31);
  Tensor4 x(1, 2, 3, 4);
  oracle::fill_random(x, 32);
  const auto report = finite_diff_check(transposed_conv2d_fn(p), x, 1e-3f, 1e-3);
  CHECK(report.passed());
}

TEST_CASE("batchnorm: constant channel collapses to beta") {
  BatchNormParams p = BatchNormParams::make(1);
  p.beta[0] = 0.3f;
  Tensor4 x(2, 1, 3, 3, 4.2f);
  const Tensor4 out = batchnorm_forward(x, p, /*training=*/true);
  for (float v : out.data()) CHECK(v == doctest::Approx(0.3f));
}

TEST_CASE("batchnorm eval with identity statistics") {
  BatchNormParams p = BatchNormParams::make(2);
  Tensor4 x(1, 2, 4, 4);
  oracle::fill_random(x, 41);
  const Tensor4 out = batchnorm_forward(x, p, /*training=*/false);
  auto xs = x.data();
  auto os = out.data();
  for (size_t i = 0; i < xs.size(); ++i)
    CHECK(os[i] == doctest::Approx(xs[i]).epsilon(1e-4));
}

TEST_CASE("batchnorm training normalizes per-channel statistics") {
  BatchNormParams p = BatchNormParams::make(3);
  Tensor4 x(4, 3, 8, 8);
  oracle::fill_normal(x, 43, 2.5);
  const Tensor4 out = batchnorm_forward(x, p, /*training=*/true);
  // gamma=1, beta=0, so the output is the pre-affine normalization
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0, sumsq = 0.0;
    int64_t count = 0;
    for (int n = 0; n < 4; ++n)
      for (int h = 0; h < 8; ++h)
        for (int w = 0; w < 8; ++w) {
          const double v = out.at(n, c, h, w);
          sum += v;
          sumsq += v * v;
          ++count;
        }
    const double mean = sum / count;
    const double var = sumsq / count - mean * mean;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("batchnorm running statistics follow the momentum rule") {
  BatchNormParams p = BatchNormParams::make(1);
  p.running_mean[0] = 0.5f;
  p.running_var[0] = 2.0f;
  Tensor4 x(2, 1, 2, 2);
  oracle::fill_random(x, 44);
  double mean = 0.0, var = 0.0;
  for (float v : x.data()) mean += v;
  mean /= x.size();
  for (float v : x.data()) var += (v - mean) * (v - mean);
  var /= x.size();
  (void)batchnorm_forward(x, p, true);
  CHECK(p.running_mean[0] == doctest::Approx(0.9 * 0.5 + 0.1 * mean));
  CHECK(p.running_var[0] == doctest::Approx(0.9 * 2.0 + 0.1 * var));
  CHECK(p.running_var[0] >= 0.0f);
}

TEST_CASE("batchnorm rejects zero-element channels and channel mismatch") {
  BatchNormParams p = BatchNormParams::make(2);
  Tensor4 empty(1, 2, 0, 4);
  CHECK_THROWS_AS(batchnorm_forward(empty, p, true), ValueError);
  Tensor4 wrong(1, 3, 2, 2);
  CHECK_THROWS_AS(batchnorm_forward(wrong, p, true), ShapeError);
}

TEST_CASE("batchnorm gradients match finite differences (training and eval)") {
  for (bool training : {true, false}) {
    CAPTURE(training);
    BatchNormParams p = BatchNormParams::make(3);
    Rng rng(45);
    for (auto& g : p.gamma) g = static_cast<float>(rng.uniform(0.5, 1.5));
    for (auto& b : p.beta) b = static_cast<float>(rng.normal(0.0, 0.2));
    for (auto& v : p.running_var) v = static_cast<float>(rng.uniform(0.5, 2.0));
    for (auto& m : p.running_mean) m = static_cast<float>(rng.normal(0.0, 0.3));
    Tensor4 x(2, 3, 4, 4);
    oracle::fill_random(x, 46);
    const auto report = finite_diff_check(batchnorm_fn(p, training), x, 1e-3f, 1e-3);
    CHECK(report.passed());
  }
}

TEST_CASE("relu basics") {
  Tensor4 x(1, 1, 1, 3);
  x.at(0, 0, 0, 0) = -1.0f;
  x.at(0, 0, 0, 1) = 0.0f;
  x.at(0, 0, 0, 2) = 2.0f;
  const Tensor4 out = relu_forward(x);
  CHECK(out.at(0, 0, 0, 0) == 0.0f);
  CHECK(out.at(0, 0, 0, 1) == 0.0f);
  CHECK(out.at(0, 0, 0, 2) == 2.0f);

  Tensor4 big(1, 2, 6, 6);
  oracle::fill_random(big, 51);
  oracle::avoid_zero(big, 0.01f);  // keep the probe away from the kink
  CHECK(finite_diff_check(relu_fn(), big, 1e-3f, 1e-3).passed());
}

TEST_CASE("sigmoid basics and symmetry") {
  Tensor4 zero(1, 1, 1, 1);
  CHECK(sigmoid_forward(zero).at(0, 0, 0, 0) == 0.5f);

  Rng rng(52);
  for (int i = 0; i < 100; ++i) {
    Tensor4 x(1, 1, 1, 1);
    x.at(0, 0, 0, 0) = static_cast<float>(rng.normal(0.0, 3.0));
    Tensor4 nx = x;
    nx.at(0, 0, 0, 0) = -x.at(0, 0, 0, 0);
    const float s = sigmoid_forward(x).at(0, 0, 0, 0);
    const float sn = sigmoid_forward(nx).at(0, 0, 0, 0);
    CHECK(s + sn == doctest::Approx(1.0f).epsilon(1e-6));
    CHECK(s > 0.0f);
    CHECK(s < 1.0f);
  }

  // saturation stays strictly inside (0,1)
  Tensor4 sat(1, 1, 1, 2);
  sat.at(0, 0, 0, 0) = 80.0f;
  sat.at(0, 0, 0, 1) = -80.0f;
  const Tensor4 out = sigmoid_forward(sat);
  CHECK(out.at(0, 0, 0, 0) < 1.0f);
  CHECK(out.at(0, 0, 0, 1) > 0.0f);

  Tensor4 big(1, 2, 5, 5);
  oracle::fill_random(big, 53);
  CHECK(finite_diff_check(sigmoid_fn(), big, 1e-3f, 1e-3).passed());
}

TEST_CASE("mse loss basics") {
  Tensor4 a(1, 2, 3, 3);
  oracle::fill_random(a, 61);
  const auto same = mse_loss(a, a);
  CHECK(same.loss == 0.0f);
  for (float v : same.grad_pred.data()) CHECK(v == 0.0f);

  Tensor4 zeros(1, 1, 2, 2, 0.0f);
  Tensor4 ones(1, 1, 2, 2, 1.0f);
  CHECK(mse_loss(zeros, ones).loss == doctest::Approx(1.0f));
}

TEST_CASE("mse loss matches scalar-loop oracle") {
  Tensor4 pred(2, 4, 8, 8), target(2, 4, 8, 8);
  oracle::fill_random(pred, 62);
  oracle::fill_random(target, 63);
  const auto res = mse_loss(pred, target);
  CHECK(res.loss == doctest::Approx(oracle::mse_reference(pred, target)).epsilon(1e-6));
  CHECK(res.loss >= 0.0f);

  // grad = 2*(pred-target)/N, spot check against the definition
  const double n = static_cast<double>(pred.size());
  auto pp = pred.data();
  auto tp = target.data();
  auto gp = res.grad_pred.data();
  for (size_t i = 0; i < pp.size(); i += 97)
    CHECK(gp[i] == doctest::Approx(2.0 * (pp[i] - tp[i]) / n));
}

TEST_CASE("mse loss rejects shape mismatch") {
  Tensor4 a(1, 1, 2, 2), b(1, 1, 2, 3);
  CHECK_THROWS_AS(mse_loss(a, b), ShapeError);
}

TEST_CASE("adam with lr=0 leaves parameters bitwise unchanged") {
  ConvParams p = ConvParams::make(2, 2, 3, 1, 1);
  oracle::fill_normal(p.weights, 71);
  const Tensor4 snapshot = p.weights;
  Adam adam(AdamConfig{.lr = 0.0f});
  auto views = collect_params(p);
  for (int t = 1; t <= 3; ++t) {
    oracle::fill_normal(p.grad_weights, 72 + t);
    adam.step(views, t);
  }
  CHECK(p.weights.same_data(snapshot));
  for (float g : p.grad_weights.data()) CHECK(g == 0.0f);
}

TEST_CASE("adam first step moves by about -lr*sign(gradient)") {
  std::vector<float> value{0.5f}, grad{0.3f};
  ParamView view{value, grad};
  Adam adam(AdamConfig{.lr = 1e-3f});
  adam.step(std::vector<ParamView>{view}, 1);
  CHECK(std::abs((value[0] - 0.5f) - (-1e-3f)) < 1e-7f);
  CHECK(grad[0] == 0.0f);
}

TEST_CASE("adam rejects step index below 1") {
  std::vector<float> value{1.0f}, grad{1.0f};
  ParamView view{value, grad};
  Adam adam;
  CHECK_THROWS_AS(adam.step(std::vector<ParamView>{view}, 0), ValueError);
}

TEST_CASE("adam matches a hand-rolled scalar oracle on a quadratic") {
  // d/dp (p - 2)^2 = 2(p - 2)
  const float lr = 0.1f, b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;

  float p_impl = 5.0f;
  std::vector<float> value{p_impl}, grad{0.0f};
  ParamView view{value, grad};
  Adam adam(AdamConfig{.lr = lr, .beta1 = b1, .beta2 = b2, .epsilon = eps});

  float p_ref = 5.0f, m = 0.0f, v = 0.0f;
  for (int t = 1; t <= 3; ++t) {
    const float g_impl = 2.0f * (value[0] - 2.0f);
    grad[0] = g_impl;
    adam.step(std::vector<ParamView>{view}, t);

    const float g_ref = 2.0f * (p_ref - 2.0f);
    m = b1 * m + (1.0f - b1) * g_ref;
    v = b2 * v + (1.0f - b2) * g_ref * g_ref;
    const double mhat = m / (1.0 - std::pow(static_cast<double>(b1), t));
    const double vhat = v / (1.0 - std::pow(static_cast<double>(b2), t));
    p_ref = static_cast<float>(p_ref - lr * mhat / (std::sqrt(vhat) + eps));
  }
  CHECK(std::abs(value[0] - p_ref) < 1e-7f);
}

TEST_CASE("finite_diff_check on a linear layer is tight") {
  ConvParams p = ConvParams::make(3, 2, 1, 1, 0);
  oracle::fill_normal(p.weights, 81);
  Tensor4 x(1, 2, 4, 4);
  oracle::fill_random(x, 82);
  // the probe is linear in every slot, so a large eps kills roundoff noise
  const auto report = finite_diff_check(conv2d_fn(p), x, 0.25f, 1e-5);
  CHECK(report.passed());
}

TEST_CASE("finite_diff_check with zero input and zero upstream is exactly zero") {
  ConvParams p = ConvParams::make(2, 1, 3, 1, 1);
  Tensor4 x(1, 1, 4, 4);
  Tensor4 upstream(1, 2, 4, 4);
  const auto report = finite_diff_check(conv2d_fn(p), x, upstream, 1e-3f, 1e-3);
  CHECK(report.max_rel_err() == 0.0);
}

TEST_CASE("transposed conv and batchnorm leave their inputs unmodified") {
  ConvParams p = ConvParams::make(2, 2, 2, 2, 0);
  oracle::fill_normal(p.weights, 93);
  Tensor4 x(1, 2, 4, 4);
  oracle::fill_random(x, 94);
  const Tensor4 x_copy = x;
  (void)transposed_conv2d_forward(x, p);
  CHECK(x.same_data(x_copy));

  BatchNormParams bn = BatchNormParams::make(2);
  const auto gamma_copy = bn.gamma;
  (void)batchnorm_forward(x, bn, true);
  CHECK(x.same_data(x_copy));
  CHECK(bn.gamma == gamma_copy);  // only the running stats may move
}

TEST_CASE("forward outputs stay finite") {
  ConvParams p = ConvParams::make(4, 3, 3, 2, 1);
  oracle::fill_normal(p.weights, 91);
  Tensor4 x(2, 3, 8, 8);
  oracle::fill_random(x, 92);
  CHECK(conv2d_forward(x, p).all_finite());
  BatchNormParams bn = BatchNormParams::make(3);
  CHECK(batchnorm_forward(x, bn, true).all_finite());
  CHECK(sigmoid_forward(x).all_finite());
}
