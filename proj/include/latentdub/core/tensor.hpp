#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace latentdub {

// Dense row-major double tensor. Shapes are small (rank <= 4 in practice).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(count(shape_)), 0.0);
  }
  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != count(shape_))
      throw std::invalid_argument("Tensor: data size does not match shape");
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // 2-4d accessors, row-major
  double& at(int i, int j) { return data_[static_cast<size_t>(i) * dim(1) + j]; }
  double at(int i, int j) const { return data_[static_cast<size_t>(i) * dim(1) + j]; }
  double& at(int c, int y, int x) {
    return data_[(static_cast<size_t>(c) * dim(1) + y) * dim(2) + x];
  }
  double at(int c, int y, int x) const {
    return data_[(static_cast<size_t>(c) * dim(1) + y) * dim(2) + x];
  }
  double& at(int n, int c, int y, int x) {
    return data_[((static_cast<size_t>(n) * dim(1) + c) * dim(2) + y) * dim(3) + x];
  }
  double at(int n, int c, int y, int x) const {
    return data_[((static_cast<size_t>(n) * dim(1) + c) * dim(2) + y) * dim(3) + x];
  }

  void fill(double v) {
    for (auto& x : data_) x = v;
  }
  bool all_finite() const;
  std::string shape_str() const;

  static std::int64_t count(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    return n;
  }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace latentdub
