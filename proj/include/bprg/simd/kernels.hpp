#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace bprg::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

// Inner-loop kernels shared by the tensor ops, the optimizer and the mask
// machinery. Every entry except `dot` produces bit-identical results across
// ISAs: each output element sees the same sequence of IEEE operations.
// `dot` reassociates its reduction and is only equivalent to within rounding.
template <typename Real>
struct KernelTable {
  Isa isa;
  // y[i] += a * x[i]
  void (*axpy)(std::size_t n, Real a, const Real* x, Real* y);
  // y[i] += x[i]
  void (*add)(std::size_t n, const Real* x, Real* y);
  // out[i] = a[i] * b[i]
  void (*mul)(std::size_t n, const Real* a, const Real* b, Real* out);
  // y[i] = x[i] > 0 ? x[i] : 0
  void (*relu)(std::size_t n, const Real* x, Real* y);
  // dx[i] += x[i] > 0 ? dy[i] : 0
  void (*relu_backward)(std::size_t n, const Real* x, const Real* dy, Real* dx);
  // x[i] = mask[i] != 0 ? x[i] : 0
  void (*apply_mask)(std::size_t n, const std::uint8_t* mask, Real* x);
  // v[i] = momentum * v[i] + g[i]; w[i] = w[i] - lr * v[i]
  void (*sgd_momentum)(std::size_t n, Real lr, Real momentum, const Real* g, Real* v, Real* w);
  Real (*dot)(std::size_t n, const Real* x, const Real* y);
  bool (*all_finite)(std::size_t n, const Real* x);
};

template <typename Real>
const KernelTable<Real>& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks the ISA.
template <typename Real>
const KernelTable<Real>* avx2_kernels();

// The table every op dispatches through. Chosen once from CPU features; the
// BPRG_SIMD environment variable (scalar|avx2) overrides the choice.
template <typename Real>
const KernelTable<Real>& kernels();

Isa active_isa();
bool isa_available(Isa isa);
// Switch the active table; throws UsageError when the ISA is unavailable.
void set_active_isa(Isa isa);

}  // namespace bprg::simd
