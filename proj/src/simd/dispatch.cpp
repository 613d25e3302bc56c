#include <atomic>
#include <cstdlib>
#include <string>

#include "bprg/error.hpp"
#include "bprg/simd/kernels.hpp"

#if defined(BPRG_HAVE_AVX2)
#include "kernels_avx2.hpp"
#endif

namespace bprg::simd {
namespace {

bool probe_avx2() {
#if defined(BPRG_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

bool cpu_has_avx2() {
  static const bool has = probe_avx2();
  return has;
}

Isa initial_isa() {
  Isa isa = cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
  if (const char* env = std::getenv("BPRG_SIMD")) {
    std::string want(env);
    if (want == "scalar") isa = Isa::scalar;
    else if (want == "avx2" && cpu_has_avx2()) isa = Isa::avx2;
  }
  return isa;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool isa_available(Isa isa) { return isa == Isa::scalar || (isa == Isa::avx2 && cpu_has_avx2()); }

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_available(isa))
    throw UsageError("SIMD variant '" + std::string(isa_name(isa)) + "' is not available on this CPU");
  active().store(isa, std::memory_order_relaxed);
}

template <>
const KernelTable<float>* avx2_kernels<float>() {
#if defined(BPRG_HAVE_AVX2)
  if (cpu_has_avx2()) return &avx2::table_f32();
#endif
  return nullptr;
}

template <>
const KernelTable<double>* avx2_kernels<double>() {
#if defined(BPRG_HAVE_AVX2)
  if (cpu_has_avx2()) return &avx2::table_f64();
#endif
  return nullptr;
}

template <typename Real>
const KernelTable<Real>& kernels() {
  if (active_isa() == Isa::avx2) {
    if (const auto* table = avx2_kernels<Real>()) return *table;
  }
  return scalar_kernels<Real>();
}

template const KernelTable<float>& kernels<float>();
template const KernelTable<double>& kernels<double>();

}  // namespace bprg::simd
