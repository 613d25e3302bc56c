#pragma once

#include <cstdint>
#include <span>

#include "bprg/tape.hpp"
#include "bprg/tensor.hpp"

// Differentiable ops. Each op writes its output into `tape` and, when the tape
// is recording and an operand requires grad, registers the backward rule.
// Operands are taken by mutable reference because backward accumulates into
// their gradient buffers.
namespace bprg::ops {

using Label = std::uint32_t;

// [m x k] * [k x n] -> [m x n]
template <typename Real>
BasicTensor<Real>& matmul(Tape<Real>& tape, BasicTensor<Real>& a, BasicTensor<Real>& b);

// x: [b x n] with bias [n], or x: [b x c x h x w] with per-channel bias [c].
template <typename Real>
BasicTensor<Real>& add_bias(Tape<Real>& tape, BasicTensor<Real>& x, BasicTensor<Real>& bias);

template <typename Real>
BasicTensor<Real>& relu(Tape<Real>& tape, BasicTensor<Real>& x);

// Valid 3x3 cross-correlation, stride 1: [b x ci x h x w] * [co x ci x 3 x 3] -> [b x co x h-2 x w-2]
template <typename Real>
BasicTensor<Real>& conv2d(Tape<Real>& tape, BasicTensor<Real>& x, BasicTensor<Real>& kernel);

// [b x ...] -> [b x prod(...)]
template <typename Real>
BasicTensor<Real>& flatten(Tape<Real>& tape, BasicTensor<Real>& x);

// Mean over the batch of -log softmax(logits)[label], max-subtracted.
template <typename Real>
BasicTensor<Real>& softmax_cross_entropy_mean(Tape<Real>& tape, BasicTensor<Real>& logits,
                                              std::span<const Label> labels);

template <typename Real>
BasicTensor<Real>& sum(Tape<Real>& tape, BasicTensor<Real>& x);

template <typename Real>
BasicTensor<Real>& add(Tape<Real>& tape, BasicTensor<Real>& a, BasicTensor<Real>& b);

// Elementwise product of equal shapes.
template <typename Real>
BasicTensor<Real>& mul(Tape<Real>& tape, BasicTensor<Real>& a, BasicTensor<Real>& b);

}  // namespace bprg::ops
