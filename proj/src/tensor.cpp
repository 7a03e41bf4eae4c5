#include "scenediff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "scenediff/errors.hpp"

namespace scenediff {

std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) +
         "," + std::to_string(s.w) + ")";
}

Tensor4::Tensor4(int n, int c, int h, int w, float fill) : Tensor4(Shape4{n, c, h, w}, fill) {}

Tensor4::Tensor4(const Shape4& shape, float fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0)
    throw ShapeError("tensor shape must be non-negative, got " + to_string(shape));
  data_.assign(static_cast<size_t>(shape.count()), fill);
}

Tensor4::Tensor4(const Shape4& shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  if (static_cast<int64_t>(data_.size()) != shape.count())
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + to_string(shape));
}

void Tensor4::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor4::all_finite() const {
  for (float v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

bool Tensor4::same_data(const Tensor4& other) const {
  return shape_ == other.shape_ &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

void require_same_shape(const Tensor4& a, const Tensor4& b, const char* what) {
  if (!(a.shape() == b.shape()))
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

}  // namespace scenediff
