#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace rankshrink {

using Index = std::size_t;

// Row-major factor storage: row gathers are the hot path of every sampler.
using FactorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense order-D array, last index fastest. A D=2 tensor is an m x n
/// row-major matrix.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<Index> dims, double fill = 0.0);

  std::size_t order() const noexcept { return dims_.size(); }
  const std::vector<Index>& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  std::size_t offset(std::span<const Index> idx) const;
  double& at(std::span<const Index> idx) { return data_[offset(idx)]; }
  double at(std::span<const Index> idx) const { return data_[offset(idx)]; }

  /// Multi-index of a flat offset.
  void unravel(std::size_t flat, std::span<Index> idx) const;

  /// Copy of a D=2 tensor as an Eigen matrix.
  Eigen::MatrixXd to_matrix() const;
  static DenseTensor from_matrix(const Eigen::MatrixXd& m);

 private:
  std::vector<Index> dims_;
  std::vector<std::size_t> strides_;
  std::vector<double> data_;
};

}  // namespace rankshrink
