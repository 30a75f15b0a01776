#include "rankshrink/dense_tensor.hpp"

#include <functional>
#include <numeric>

#include "rankshrink/errors.hpp"

namespace rankshrink {

DenseTensor::DenseTensor(std::vector<Index> dims, double fill) : dims_(std::move(dims)) {
  strides_.assign(dims_.size(), 1);
  for (std::size_t d = dims_.size(); d-- > 1;) strides_[d - 1] = strides_[d] * dims_[d];
  const std::size_t n = std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
  data_.assign(dims_.empty() ? 0 : n, fill);
}

std::size_t DenseTensor::offset(std::span<const Index> idx) const {
  std::size_t off = 0;
  for (std::size_t d = 0; d < dims_.size(); ++d) off += idx[d] * strides_[d];
  return off;
}

void DenseTensor::unravel(std::size_t flat, std::span<Index> idx) const {
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    idx[d] = flat / strides_[d];
    flat %= strides_[d];
  }
}

Eigen::MatrixXd DenseTensor::to_matrix() const {
  if (order() != 2) throw Error(ErrorKind::ShapeMismatch, "to_matrix needs an order-2 tensor");
  Eigen::MatrixXd m(dims_[0], dims_[1]);
  for (Index i = 0; i < dims_[0]; ++i)
    for (Index j = 0; j < dims_[1]; ++j) m(i, j) = data_[i * dims_[1] + j];
  return m;
}

DenseTensor DenseTensor::from_matrix(const Eigen::MatrixXd& m) {
  DenseTensor t({static_cast<Index>(m.rows()), static_cast<Index>(m.cols())});
  for (Index i = 0; i < t.dims_[0]; ++i)
    for (Index j = 0; j < t.dims_[1]; ++j) t.data_[i * t.dims_[1] + j] = m(i, j);
  return t;
}

}  // namespace rankshrink
