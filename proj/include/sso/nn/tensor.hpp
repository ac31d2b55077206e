#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "sso/error.hpp"

namespace sso::nn {

// Row-major dense tensor of doubles. Value semantics; gradients live in
// separate DenseArrays of identical shape wherever differentiation happens.
class DenseArray {
 public:
  DenseArray() = default;

  explicit DenseArray(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(count(shape_)), 0.0);
  }

  static DenseArray zeros(std::vector<int> shape) { return DenseArray(std::move(shape)); }

  static DenseArray scalar(double v) {
    DenseArray a({1});
    a.data_[0] = v;
    return a;
  }

  const std::vector<int>& shape() const { return shape_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }

  // 2-d view: all leading extents folded into rows, the last extent is cols.
  int rows() const { return cols() == 0 ? 0 : static_cast<int>(size()) / cols(); }
  int cols() const { return shape_.empty() ? 0 : shape_.back(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const DenseArray& other) const { return shape_ == other.shape_; }

  void add_in_place(const DenseArray& other) {
    if (!same_shape(other)) throw DimensionError("DenseArray: shape mismatch in add");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  }

  static std::int64_t count(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int e : shape) {
      if (e <= 0) throw DimensionError("DenseArray: extents must be positive");
      n *= e;
    }
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace sso::nn
