#pragma once

#include "bprg/simd/kernels.hpp"

namespace bprg::simd::avx2 {

const KernelTable<float>& table_f32();
const KernelTable<double>& table_f64();

}  // namespace bprg::simd::avx2
