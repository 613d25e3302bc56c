#pragma once

#include <functional>
#include <span>

#include "bprg/tensor.hpp"

namespace bprg {

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate,
// in 64-bit. `f` must be deterministic; it receives a perturbed copy of `x`.
Tensor64 finite_difference_gradient(const std::function<double(const Tensor64&)>& f, const Tensor64& x,
                                    double h = 1e-5);

// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

// Largest relative_error over paired entries; spans must be equal length.
double max_relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace bprg
