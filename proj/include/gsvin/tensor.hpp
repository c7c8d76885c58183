#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gsvin {

/// Rank-4 extent in (batch, channels, height, width) order.
struct Shape {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return batch * channels * height * width; }
  std::size_t plane() const { return height * width; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense row-major rank-4 array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor({1, 1, 1, 1}, value); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  std::size_t index(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const {
    return ((b * shape_.channels + c) * shape_.height + y) * shape_.width + x;
  }
  double& at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) { return data_[index(b, c, y, x)]; }
  double at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const { return data_[index(b, c, y, x)]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  void fill(double value);
  bool all_finite() const;
  double sum() const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Throws ShapeError unless `a == b`; `what` names the operation in the message.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace gsvin
