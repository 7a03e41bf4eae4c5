#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace scenediff {

struct Shape4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  int64_t count() const {
    return static_cast<int64_t>(n) * c * h * w;
  }
  bool operator==(const Shape4&) const = default;
};

std::string to_string(const Shape4& s);

// Dense rank-4 float32 array in row-major (n, c, h, w) order. Carrier for
// images, activations, parameters and gradients.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(int n, int c, int h, int w, float fill = 0.0f);
  explicit Tensor4(const Shape4& shape, float fill = 0.0f);
  Tensor4(const Shape4& shape, std::vector<float> data);

  const Shape4& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }

  int64_t index(int n, int c, int h, int w) const {
    return ((static_cast<int64_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  float& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  float at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  float* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
  const float* plane(int n, int c) const { return data_.data() + index(n, c, 0, 0); }

  void fill(float v);
  bool all_finite() const;
  bool same_data(const Tensor4& other) const;  // bitwise comparison

  bool operator==(const Tensor4&) const = default;

 private:
  Shape4 shape_;
  std::vector<float> data_;
};

// Throws ShapeError mentioning `what` if the shapes differ.
void require_same_shape(const Tensor4& a, const Tensor4& b, const char* what);

}  // namespace scenediff
