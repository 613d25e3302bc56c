#include "bprg/optim.hpp"

#include <string>

#include "bprg/error.hpp"
#include "bprg/simd/kernels.hpp"

namespace bprg {

template <typename Real>
OptimizerState<Real>::OptimizerState(double learning_rate, double momentum, std::span<const Shape> param_shapes)
    : learning_rate_(learning_rate), momentum_(momentum) {
  if (!(learning_rate > 0)) throw ConfigError("optimizer: learning rate must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("optimizer: momentum must lie in [0, 1)");
  velocity_.reserve(param_shapes.size());
  for (const auto& s : param_shapes) velocity_.emplace_back(shape_numel(s), Real(0));
}

template <typename Real>
void OptimizerState<Real>::set_learning_rate(double lr) {
  if (!(lr > 0)) throw ConfigError("optimizer: learning rate must be positive");
  learning_rate_ = lr;
}

template <typename Real>
void OptimizerState<Real>::reset() {
  for (auto& v : velocity_) std::fill(v.begin(), v.end(), Real(0));
}

template <typename Real>
void sgd_momentum_update(BasicTensor<Real>& param, std::span<const Real> grad, std::span<Real> velocity,
                         const OptimizerState<Real>& state) {
  if (grad.size() != param.numel() || velocity.size() != param.numel())
    throw UsageError("sgd: parameter, gradient and velocity lengths disagree");
  simd::kernels<Real>().sgd_momentum(param.numel(), Real(state.learning_rate()), Real(state.momentum()),
                                     grad.data(), velocity.data(), param.data().data());
  param.check_finite("sgd_momentum_step");
}

template <typename Real>
void sgd_momentum_step(std::span<BasicTensor<Real>* const> params, OptimizerState<Real>& state) {
  if (params.size() != state.size())
    throw UsageError("sgd: optimizer tracks " + std::to_string(state.size()) + " parameters, got " +
                     std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->has_grad()) throw UsageError("sgd: parameter " + std::to_string(i) + " has no gradient");
    const auto& p = *params[i];
    sgd_momentum_update(*params[i], p.grad(), state.velocity(i), state);
  }
}

template class OptimizerState<float>;
template class OptimizerState<double>;
template void sgd_momentum_step(std::span<BasicTensor<float>* const>, OptimizerState<float>&);
template void sgd_momentum_step(std::span<BasicTensor<double>* const>, OptimizerState<double>&);
template void sgd_momentum_update(BasicTensor<float>&, std::span<const float>, std::span<float>,
                                  const OptimizerState<float>&);
template void sgd_momentum_update(BasicTensor<double>&, std::span<const double>, std::span<double>,
                                  const OptimizerState<double>&);

}  // namespace bprg
