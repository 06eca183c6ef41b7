#ifndef TRIMETRIC_TENSOR_HPP_
#define TRIMETRIC_TENSOR_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace trimetric {

// Dense n-dimensional array of 64-bit floats, row-major. Images and feature
// maps use (channel, height, width) axis order.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled
  Tensor(std::vector<int> shape, std::vector<double> data);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // Accessors for rank-3 (c, h, w) tensors; no bounds checks on the fast path.
  double& at(int c, int h, int w) {
    return data_[static_cast<std::size_t>((static_cast<std::int64_t>(c) * dim(1) + h) * dim(2) + w)];
  }
  double at(int c, int h, int w) const {
    return data_[static_cast<std::size_t>((static_cast<std::int64_t>(c) * dim(1) + h) * dim(2) + w)];
  }
  // Accessors for rank-4 (k, c, h, w) tensors.
  double& at4(int k, int c, int h, int w) {
    return data_[static_cast<std::size_t>(((static_cast<std::int64_t>(k) * dim(1) + c) * dim(2) + h) * dim(3) + w)];
  }
  double at4(int k, int c, int h, int w) const {
    return data_[static_cast<std::size_t>(((static_cast<std::int64_t>(k) * dim(1) + c) * dim(2) + h) * dim(3) + w)];
  }

  void fill(double v);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  std::string shape_str() const;  // e.g. "3x250x100"

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

}  // namespace trimetric

#endif  // TRIMETRIC_TENSOR_HPP_
