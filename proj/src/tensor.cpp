#include "bprg/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "bprg/error.hpp"
#include "bprg/simd/kernels.hpp"

namespace bprg {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
  if (std::any_of(shape.begin(), shape.end(), [](std::size_t d) { return d == 0; }))
    throw DimensionError("tensor dimensions must be positive, got " + shape_to_string(shape));
}

}  // namespace

template <typename Real>
BasicTensor<Real>::BasicTensor(Shape shape, bool requires_grad)
    : shape_(std::move(shape)), requires_grad_(requires_grad) {
  validate_shape(shape_);
  data_.assign(shape_numel(shape_), Real(0));
}

template <typename Real>
BasicTensor<Real>::BasicTensor(Shape shape, std::vector<Real> data, bool requires_grad)
    : shape_(std::move(shape)), data_(std::move(data)), requires_grad_(requires_grad) {
  validate_shape(shape_);
  if (data_.size() != shape_numel(shape_))
    throw DimensionError("tensor of shape " + shape_to_string(shape_) + " needs " +
                         std::to_string(shape_numel(shape_)) + " values, got " +
                         std::to_string(data_.size()));
  check_finite("tensor construction");
}

template <typename Real>
Real BasicTensor<Real>::item() const {
  if (data_.size() != 1)
    throw UsageError("item() on tensor of shape " + shape_to_string(shape_));
  return data_[0];
}

template <typename Real>
std::span<Real> BasicTensor<Real>::grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), Real(0));
  return grad_;
}

template <typename Real>
void BasicTensor<Real>::zero_grad() {
  grad_.assign(data_.size(), Real(0));
}

template <typename Real>
void BasicTensor<Real>::reshape(Shape shape) {
  validate_shape(shape);
  if (shape_numel(shape) != data_.size())
    throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  shape_ = std::move(shape);
}

template <typename Real>
void BasicTensor<Real>::check_finite(const char* what) const {
  if (!simd::kernels<Real>().all_finite(data_.size(), data_.data()))
    throw NumericError(std::string("non-finite value produced by ") + what);
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace bprg
