#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace gesture::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
/// Storage aligned to Eigen's widest packet, so vectorized reductions take
/// the same path on every run.
using Storage = std::vector<double, Eigen::aligned_allocator<double>>;

/// Dense row-major array. Layers treat the last dimension as features and
/// every leading dimension as rows; sequence layers read [batch, time, features].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  /// Product of all but the last dimension.
  std::size_t rows() const;
  /// Last dimension.
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  Storage& values() { return data_; }
  const Storage& values() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  MatrixMap matrix() { return {data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())}; }
  ConstMatrixMap matrix() const {
    return {data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
  }

  void fill(double v);
  void reshape(std::vector<std::size_t> shape);
  bool all_finite() const;
  Tensor& operator+=(const Tensor& other);

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  Storage data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

/// Throws ShapeMismatch unless `a` and `b` have identical shapes.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

/// Mean squared error over all elements; writes d(loss)/d(pred) when `grad`
/// is non-null. Accumulates in double.
double mse_loss(const Tensor& pred, const Tensor& target, Tensor* grad = nullptr);

}  // namespace gesture::nn
