#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace bprg {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major tensor with an optional gradient buffer of the same length.
// An empty shape denotes a scalar. Training runs in float; gradient checks
// instantiate the same code with double.
template <typename Real>
class BasicTensor {
 public:
  using value_type = Real;

  BasicTensor() : BasicTensor(Shape{}) {}
  explicit BasicTensor(Shape shape, bool requires_grad = false);
  BasicTensor(Shape shape, std::vector<Real> data, bool requires_grad = false);

  static BasicTensor scalar(Real value, bool requires_grad = false) {
    return BasicTensor(Shape{}, std::vector<Real>{value}, requires_grad);
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return data_.size(); }
  bool is_scalar() const { return shape_.empty(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  Real& operator[](std::size_t i) { return data_[i]; }
  const Real& operator[](std::size_t i) const { return data_[i]; }
  Real item() const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }

  bool has_grad() const { return grad_.size() == data_.size(); }
  // Allocates a zero gradient buffer on first use.
  std::span<Real> grad();
  std::span<const Real> grad() const { return grad_; }
  void zero_grad();
  void drop_grad() { grad_.clear(); }

  // Same data under a new shape with identical element count.
  void reshape(Shape shape);

  // Throws NumericError naming `what` when any entry is NaN or Inf.
  void check_finite(const char* what) const;

 private:
  Shape shape_;
  std::vector<Real> data_;
  std::vector<Real> grad_;
  bool requires_grad_ = false;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace bprg
