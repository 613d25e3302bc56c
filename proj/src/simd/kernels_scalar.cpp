#include "bprg/simd/kernels.hpp"

#include <cmath>

namespace bprg::simd {
namespace {

template <typename Real>
void axpy(std::size_t n, Real a, const Real* x, Real* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

template <typename Real>
void add(std::size_t n, const Real* x, Real* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + x[i];
}

template <typename Real>
void mul(std::size_t n, const Real* a, const Real* b, Real* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename Real>
void relu(std::size_t n, const Real* x, Real* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > Real(0) ? x[i] : Real(0);
}

template <typename Real>
void relu_backward(std::size_t n, const Real* x, const Real* dy, Real* dx) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = dx[i] + (x[i] > Real(0) ? dy[i] : Real(0));
}

template <typename Real>
void apply_mask(std::size_t n, const std::uint8_t* mask, Real* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] = mask[i] != 0 ? x[i] : Real(0);
}

template <typename Real>
void sgd_momentum(std::size_t n, Real lr, Real momentum, const Real* g, Real* v, Real* w) {
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = momentum * v[i] + g[i];
    w[i] = w[i] - lr * v[i];
  }
}

template <typename Real>
Real dot(std::size_t n, const Real* x, const Real* y) {
  Real acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc = acc + x[i] * y[i];
  return acc;
}

template <typename Real>
bool all_finite(std::size_t n, const Real* x) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i])) return false;
  return true;
}

template <typename Real>
constexpr KernelTable<Real> make_table() {
  return {Isa::scalar,  &axpy<Real>,         &add<Real>, &mul<Real>,        &relu<Real>,
          &relu_backward<Real>, &apply_mask<Real>, &sgd_momentum<Real>, &dot<Real>, &all_finite<Real>};
}

constexpr KernelTable<float> kScalarF32 = make_table<float>();
constexpr KernelTable<double> kScalarF64 = make_table<double>();

}  // namespace

template <>
const KernelTable<float>& scalar_kernels<float>() {
  return kScalarF32;
}

template <>
const KernelTable<double>& scalar_kernels<double>() {
  return kScalarF64;
}

}  // namespace bprg::simd
