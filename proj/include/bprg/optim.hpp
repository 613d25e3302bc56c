#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bprg/tensor.hpp"

namespace bprg {

// SGD with heavy-ball momentum: v <- momentum * v + g; w <- w - lr * v.
template <typename Real>
class OptimizerState {
 public:
  // One zero velocity buffer per trainable parameter, in parameter order.
  OptimizerState(double learning_rate, double momentum, std::span<const Shape> param_shapes);

  double learning_rate() const { return learning_rate_; }
  double momentum() const { return momentum_; }
  void set_learning_rate(double lr);

  std::size_t size() const { return velocity_.size(); }
  std::span<Real> velocity(std::size_t i) { return velocity_.at(i); }
  std::span<const Real> velocity(std::size_t i) const { return velocity_.at(i); }
  void reset();

 private:
  double learning_rate_;
  double momentum_;
  std::vector<std::vector<Real>> velocity_;
};

// Updates every parameter in order from its own gradient buffer.
// Throws UsageError when a parameter has no gradient or shapes disagree with the state.
template <typename Real>
void sgd_momentum_step(std::span<BasicTensor<Real>* const> params, OptimizerState<Real>& state);

// Single-parameter form shared with the masked optimizer.
template <typename Real>
void sgd_momentum_update(BasicTensor<Real>& param, std::span<const Real> grad, std::span<Real> velocity,
                         const OptimizerState<Real>& state);

extern template class OptimizerState<float>;
extern template class OptimizerState<double>;

}  // namespace bprg
