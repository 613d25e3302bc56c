#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "bprg/gradcheck.hpp"
#include "bprg/model.hpp"
#include "bprg/ops.hpp"
#include "bprg/rng.hpp"
#include "bprg/tape.hpp"
#include "bprg/tensor.hpp"

namespace bprg::testing {

using Tape64 = Tape<double>;
using Builder = std::function<Tensor64&(Tape64&, std::vector<Tensor64*>&)>;

inline Tensor64 uniform_tensor(const Shape& shape, RngState& rng, double lo, double hi) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return Tensor64(shape, std::move(v));
}

// Values in [lo, hi] with a random sign.
inline Tensor64 signed_tensor(const Shape& shape, RngState& rng, double lo, double hi) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (lo + (hi - lo) * rng.uniform());
  return Tensor64(shape, std::move(v));
}

// sum(y * w) with w constant. Positive w keeps every gradient away from zero, where relative error is ill-conditioned.
inline Tensor64& weighted_sum(Tape64& tape, Tensor64& y, const Tensor64& w) {
  auto& wk = tape.keep(w);
  return ops::sum(tape, ops::mul(tape, y, wk));
}

// Max relative error between backward() and central differences, over all inputs.
inline double gradient_error(const std::vector<Tensor64>& inputs, const Builder& build) {
  std::vector<Tensor64> live = inputs;
  std::vector<Tensor64*> ptrs;
  for (auto& t : live) {
    t.set_requires_grad(true);
    ptrs.push_back(&t);
  }
  {
    Tape64 tape;
    auto& loss = build(tape, ptrs);
    tape.backward(loss);
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto f = [&](const Tensor64& x) {
      std::vector<Tensor64> probe = inputs;
      probe[i] = x;
      std::vector<Tensor64*> p;
      for (auto& t : probe) {
        t.set_requires_grad(false);
        p.push_back(&t);
      }
      Tape64 tape(false);
      return build(tape, p).item();
    };
    const auto fd = finite_difference_gradient(f, inputs[i]);
    const auto analytic = live[i].grad();
    worst = std::max(worst, max_relative_error(std::span<const double>(analytic.data(), analytic.size()),
                                               std::span<const double>(fd.data().data(), fd.numel())));
  }
  return worst;
}

// Gradient error for every parameter of a model under softmax cross-entropy.
inline double model_gradient_error(Model<double>& model, const Tensor64& batch, const std::vector<ops::Label>& labels) {
  model.zero_grad();
  {
    Tape64 tape;
    Tensor64 x = batch;
    auto& loss = ops::softmax_cross_entropy_mean(tape, forward(model, tape, x), labels);
    tape.backward(loss);
  }
  double worst = 0.0;
  for (auto& p : model.params()) {
    const Tensor64 original = p.value;
    auto f = [&](const Tensor64& v) {
      auto saved = p.value.data();
      std::vector<double> keep(saved.begin(), saved.end());
      std::copy(v.data().begin(), v.data().end(), saved.begin());
      Tape64 tape(false);
      Tensor64 x = batch;
      const double loss = ops::softmax_cross_entropy_mean(tape, forward(model, tape, x), labels).item();
      std::copy(keep.begin(), keep.end(), saved.begin());
      return loss;
    };
    const auto fd = finite_difference_gradient(f, original);
    const auto g = p.value.grad();
    worst = std::max(worst, max_relative_error(std::span<const double>(g.data(), g.size()),
                                               std::span<const double>(fd.data().data(), fd.numel())));
  }
  model.zero_grad();
  return worst;
}

// Smallest |pre-activation| of a dense/relu stack on the batch.
inline double min_abs_preactivation(const Model<double>& model, const Tensor64& batch) {
  std::vector<double> h(batch.data().begin(), batch.data().end());
  const std::size_t rows = batch.dim(0);
  double smallest = INFINITY;
  for (std::size_t l = 0; l < model.spec().size(); ++l) {
    const auto* d = std::get_if<Dense>(&model.spec()[l]);
    if (!d) continue;
    const auto& w = model.param({l, ParamRole::weight}).data();
    const auto& b = model.param({l, ParamRole::bias}).data();
    std::vector<double> z(rows * d->out);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t o = 0; o < d->out; ++o) {
        double acc = b[o];
        for (std::size_t i = 0; i < d->in; ++i) acc += h[r * d->in + i] * w[i * d->out + o];
        z[r * d->out + o] = acc;
        smallest = std::min(smallest, std::fabs(acc));
      }
    for (auto& v : z) v = v > 0 ? v : 0;
    h = std::move(z);
  }
  return smallest;
}

// Brute-force magnitude pruning: full sort by (|w|, flat index), prune the first N - keep among active positions.
inline std::vector<std::uint8_t> oracle_mask(const std::vector<float>& w, std::size_t keep) {
  std::vector<std::size_t> order(w.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const float ma = std::fabs(w[a]), mb = std::fabs(w[b]);
    return ma != mb ? ma < mb : a < b;
  });
  std::vector<std::uint8_t> mask(w.size(), 1);
  for (std::size_t i = 0; i < w.size() - keep; ++i) mask[order[i]] = 0;
  return mask;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("bprg-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace bprg::testing
