#include "bprg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bprg/error.hpp"
#include "bprg/simd/kernels.hpp"

namespace bprg::ops {
namespace {

template <typename Real>
bool wants_grad(const Tape<Real>& tape, const BasicTensor<Real>& a) {
  return tape.recording() && a.requires_grad();
}

template <typename Real>
bool wants_grad(const Tape<Real>& tape, const BasicTensor<Real>& a, const BasicTensor<Real>& b) {
  return tape.recording() && (a.requires_grad() || b.requires_grad());
}

// out[m x n] += a[m x k] * b[k x n], row-by-row axpy so every output element
// accumulates over k in ascending order regardless of the kernel ISA.
// Zero multipliers are skipped; activations and pruned inputs are often zero.
template <typename Real>
void gemm_accumulate(std::size_t m, std::size_t k, std::size_t n, const Real* a, const Real* b, Real* out) {
  const auto& kr = simd::kernels<Real>();
  for (std::size_t i = 0; i < m; ++i) {
    Real* out_row = out + i * n;
    const Real* a_row = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Real s = a_row[p];
      if (s == Real(0)) continue;
      kr.axpy(n, s, b + p * n, out_row);
    }
  }
}

template <typename Real>
std::vector<Real> transpose(std::size_t rows, std::size_t cols, const Real* src) {
  std::vector<Real> t(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = src[r * cols + c];
  return t;
}

}  // namespace

template <typename Real>
BasicTensor<Real>& matmul(Tape<Real>& tape, BasicTensor<Real>& a, BasicTensor<Real>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: cannot multiply " + shape_to_string(a.shape()) + " by " +
                         shape_to_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto& out = tape.keep(BasicTensor<Real>(Shape{m, n}));
  gemm_accumulate(m, k, n, a.data().data(), b.data().data(), out.data().data());
  out.check_finite("matmul");

  if (wants_grad(tape, a, b)) {
    tape.record({&a, &b}, &out, [&a, &b, &out, m, k, n] {
      auto d_out = out.grad();
      if (a.requires_grad()) {
        // dA += dC * B^T
        auto bt = transpose(k, n, b.data().data());
        gemm_accumulate(m, n, k, d_out.data(), bt.data(), a.grad().data());
      }
      if (b.requires_grad()) {
        // dB += A^T * dC
        auto at = transpose(m, k, a.data().data());
        gemm_accumulate(k, m, n, at.data(), d_out.data(), b.grad().data());
      }
    });
  }
  return out;
}

template <typename Real>
BasicTensor<Real>& add_bias(Tape<Real>& tape, BasicTensor<Real>& x, BasicTensor<Real>& bias) {
  const bool rows = x.rank() == 2 && bias.rank() == 1 && bias.dim(0) == x.dim(1);
  const bool planes = x.rank() == 4 && bias.rank() == 1 && bias.dim(0) == x.dim(1);
  if (!rows && !planes)
    throw DimensionError("add_bias: bias " + shape_to_string(bias.shape()) + " does not fit input " +
                         shape_to_string(x.shape()));
  const std::size_t batch = x.dim(0), channels = x.dim(1);
  const std::size_t plane = rows ? 1 : x.dim(2) * x.dim(3);
  auto& out = tape.keep(BasicTensor<Real>(x.shape(), std::vector<Real>(x.data().begin(), x.data().end())));
  auto o = out.data();
  auto bv = bias.data();
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t p = 0; p < plane; ++p) {
        Real& v = o[(i * channels + c) * plane + p];
        v = v + bv[c];
      }
  out.check_finite("add_bias");

  if (wants_grad(tape, x, bias)) {
    tape.record({&x, &bias}, &out, [&x, &bias, &out, batch, channels, plane] {
      auto d_out = out.grad();
      if (x.requires_grad()) simd::kernels<Real>().add(d_out.size(), d_out.data(), x.grad().data());
      if (bias.requires_grad()) {
        auto db = bias.grad();
        for (std::size_t i = 0; i < batch; ++i)
          for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t p = 0; p < plane; ++p) db[c] = db[c] + d_out[(i * channels + c) * plane + p];
      }
    });
  }
  return out;
}

template <typename Real>
BasicTensor<Real>& relu(Tape<Real>& tape, BasicTensor<Real>& x) {
  auto& out = tape.keep(BasicTensor<Real>(x.shape()));
  simd::kernels<Real>().relu(x.numel(), x.data().data(), out.data().data());

  if (wants_grad(tape, x)) {
    tape.record({&x}, &out, [&x, &out] {
      simd::kernels<Real>().relu_backward(x.numel(), x.data().data(), out.grad().data(), x.grad().data());
    });
  }
  return out;
}

template <typename Real>
BasicTensor<Real>& conv2d(Tape<Real>& tape, BasicTensor<Real>& x, BasicTensor<Real>& kernel) {
  if (x.rank() != 4 || kernel.rank() != 4 || kernel.dim(2) != 3 || kernel.dim(3) != 3 ||
      kernel.dim(1) != x.dim(1))
    throw DimensionError("conv2d: input " + shape_to_string(x.shape()) + " and kernel " +
                         shape_to_string(kernel.shape()) + " do not compose");
  if (x.dim(2) < 3 || x.dim(3) < 3)
    throw DimensionError("conv2d: spatial dims of " + shape_to_string(x.shape()) + " are smaller than 3x3");

  const std::size_t batch = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t c_out = kernel.dim(0), oh = h - 2, ow = w - 2;
  auto& out = tape.keep(BasicTensor<Real>(Shape{batch, c_out, oh, ow}));

  const auto& kr = simd::kernels<Real>();
  const Real* xd = x.data().data();
  const Real* kd = kernel.data().data();
  Real* od = out.data().data();
  auto x_at = [=](std::size_t b, std::size_t c, std::size_t y, std::size_t xx) {
    return ((b * c_in + c) * h + y) * w + xx;
  };
  auto o_at = [=](std::size_t b, std::size_t c, std::size_t y) { return ((b * c_out + c) * oh + y) * ow; };
  auto k_at = [=](std::size_t co, std::size_t ci, std::size_t dy, std::size_t dx) {
    return ((co * c_in + ci) * 3 + dy) * 3 + dx;
  };

  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t co = 0; co < c_out; ++co)
      for (std::size_t ci = 0; ci < c_in; ++ci)
        for (std::size_t dy = 0; dy < 3; ++dy)
          for (std::size_t dx = 0; dx < 3; ++dx) {
            const Real kv = kd[k_at(co, ci, dy, dx)];
            if (kv == Real(0)) continue;
            for (std::size_t y = 0; y < oh; ++y) kr.axpy(ow, kv, xd + x_at(b, ci, y + dy, dx), od + o_at(b, co, y));
          }
  out.check_finite("conv2d");

  if (wants_grad(tape, x, kernel)) {
    tape.record({&x, &kernel}, &out, [=, &x, &kernel, &out] {
      const auto& k2 = simd::kernels<Real>();
      const Real* g = out.grad().data();
      if (x.requires_grad()) {
        Real* gx = x.grad().data();
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t co = 0; co < c_out; ++co)
            for (std::size_t ci = 0; ci < c_in; ++ci)
              for (std::size_t dy = 0; dy < 3; ++dy)
                for (std::size_t dx = 0; dx < 3; ++dx) {
                  const Real kv = kernel.data()[k_at(co, ci, dy, dx)];
                  if (kv == Real(0)) continue;
                  for (std::size_t y = 0; y < oh; ++y) k2.axpy(ow, kv, g + o_at(b, co, y), gx + x_at(b, ci, y + dy, dx));
                }
      }
      if (kernel.requires_grad()) {
        Real* gk = kernel.grad().data();
        const Real* xv = x.data().data();
        for (std::size_t co = 0; co < c_out; ++co)
          for (std::size_t ci = 0; ci < c_in; ++ci)
            for (std::size_t dy = 0; dy < 3; ++dy)
              for (std::size_t dx = 0; dx < 3; ++dx) {
                Real acc = 0;
                for (std::size_t b = 0; b < batch; ++b)
                  for (std::size_t y = 0; y < oh; ++y)
                    acc = acc + k2.dot(ow, g + o_at(b, co, y), xv + x_at(b, ci, y + dy, dx));
                Real& slot = gk[k_at(co, ci, dy, dx)];
                slot = slot + acc;
              }
      }
    });
  }
  return out;
}

template <typename Real>
BasicTensor<Real>& flatten(Tape<Real>& tape, BasicTensor<Real>& x) {
  if (x.rank() < 1) throw DimensionError("flatten: scalar input");
  const std::size_t batch = x.dim(0);
  auto& out = tape.keep(BasicTensor<Real>(Shape{batch, x.numel() / batch},
                                          std::vector<Real>(x.data().begin(), x.data().end())));
  if (wants_grad(tape, x)) {
    tape.record({&x}, &out, [&x, &out] {
      simd::kernels<Real>().add(out.numel(), out.grad().data(), x.grad().data());
    });
  }
  return out;
}

template <typename Real>
BasicTensor<Real>& softmax_cross_entropy_mean(Tape<Real>& tape, BasicTensor<Real>& logits,
                                              std::span<const Label> labels) {
  if (logits.rank() != 2) throw DimensionError("softmax_cross_entropy_mean: logits must be [b x c]");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch)
    throw DimensionError("softmax_cross_entropy_mean: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(batch));
  for (Label l : labels)
    if (l >= classes)
      throw InputError("softmax_cross_entropy_mean: label " + std::to_string(l) + " outside [0, " +
                       std::to_string(classes) + ")");

  const Real* z = logits.data().data();
  double total = 0;
  for (std::size_t i = 0; i < batch; ++i) {
    const Real* row = z + i * classes;
    const double m = *std::max_element(row, row + classes);
    double s = 0;
    for (std::size_t j = 0; j < classes; ++j) s += std::exp(double(row[j]) - m);
    total += std::log(s) - (double(row[labels[i]]) - m);
  }
  auto& out = tape.keep(BasicTensor<Real>::scalar(Real(total / double(batch))));
  out.check_finite("softmax_cross_entropy_mean");

  if (wants_grad(tape, logits)) {
    std::vector<Label> kept(labels.begin(), labels.end());
    tape.record({&logits}, &out, [&logits, &out, kept = std::move(kept), batch, classes] {
      const double upstream = double(out.grad()[0]);
      const Real* zz = logits.data().data();
      auto g = logits.grad();
      for (std::size_t i = 0; i < batch; ++i) {
        const Real* row = zz + i * classes;
        const double m = *std::max_element(row, row + classes);
        double s = 0;
        for (std::size_t j = 0; j < classes; ++j) s += std::exp(double(row[j]) - m);
        for (std::size_t j = 0; j < classes; ++j) {
          double p = std::exp(double(row[j]) - m) / s;
          if (j == kept[i]) p -= 1.0;
          Real& slot = g[i * classes + j];
          slot = slot + Real(upstream * p / double(batch));
        }
      }
    });
  }
  return out;
}

template <typename Real>
BasicTensor<Real>& sum(Tape<Real>& tape, BasicTensor<Real>& x) {
  Real acc = 0;
  for (Real v : x.data()) acc = acc + v;
  auto& out = tape.keep(BasicTensor<Real>::scalar(acc));
  out.check_finite("sum");
  if (wants_grad(tape, x)) {
    tape.record({&x}, &out, [&x, &out] {
      const Real g = out.grad()[0];
      for (Real& v : x.grad()) v = v + g;
    });
  }
  return out;
}

template <typename Real>
BasicTensor<Real>& add(Tape<Real>& tape, BasicTensor<Real>& a, BasicTensor<Real>& b) {
  if (a.shape() != b.shape())
    throw DimensionError("add: shapes " + shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()) +
                         " differ");
  auto& out = tape.keep(BasicTensor<Real>(a.shape(), std::vector<Real>(a.data().begin(), a.data().end())));
  simd::kernels<Real>().add(b.numel(), b.data().data(), out.data().data());
  out.check_finite("add");
  if (wants_grad(tape, a, b)) {
    tape.record({&a, &b}, &out, [&a, &b, &out] {
      const auto& kr = simd::kernels<Real>();
      if (a.requires_grad()) kr.add(out.numel(), out.grad().data(), a.grad().data());
      if (b.requires_grad()) kr.add(out.numel(), out.grad().data(), b.grad().data());
    });
  }
  return out;
}

template <typename Real>
BasicTensor<Real>& mul(Tape<Real>& tape, BasicTensor<Real>& a, BasicTensor<Real>& b) {
  if (a.shape() != b.shape())
    throw DimensionError("mul: shapes " + shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()) +
                         " differ");
  auto& out = tape.keep(BasicTensor<Real>(a.shape()));
  simd::kernels<Real>().mul(a.numel(), a.data().data(), b.data().data(), out.data().data());
  out.check_finite("mul");
  if (wants_grad(tape, a, b)) {
    tape.record({&a, &b}, &out, [&a, &b, &out] {
      const auto& kr = simd::kernels<Real>();
      const std::size_t n = out.numel();
      std::vector<Real> tmp(n);
      if (a.requires_grad()) {
        kr.mul(n, out.grad().data(), b.data().data(), tmp.data());
        kr.add(n, tmp.data(), a.grad().data());
      }
      if (b.requires_grad()) {
        kr.mul(n, out.grad().data(), a.data().data(), tmp.data());
        kr.add(n, tmp.data(), b.grad().data());
      }
    });
  }
  return out;
}

#define BPRG_INSTANTIATE_OPS(Real)                                                                        \
  template BasicTensor<Real>& matmul(Tape<Real>&, BasicTensor<Real>&, BasicTensor<Real>&);                \
  template BasicTensor<Real>& add_bias(Tape<Real>&, BasicTensor<Real>&, BasicTensor<Real>&);              \
  template BasicTensor<Real>& relu(Tape<Real>&, BasicTensor<Real>&);                                      \
  template BasicTensor<Real>& conv2d(Tape<Real>&, BasicTensor<Real>&, BasicTensor<Real>&);                \
  template BasicTensor<Real>& flatten(Tape<Real>&, BasicTensor<Real>&);                                   \
  template BasicTensor<Real>& softmax_cross_entropy_mean(Tape<Real>&, BasicTensor<Real>&,                 \
                                                         std::span<const Label>);                         \
  template BasicTensor<Real>& sum(Tape<Real>&, BasicTensor<Real>&);                                       \
  template BasicTensor<Real>& add(Tape<Real>&, BasicTensor<Real>&, BasicTensor<Real>&);                   \
  template BasicTensor<Real>& mul(Tape<Real>&, BasicTensor<Real>&, BasicTensor<Real>&);

BPRG_INSTANTIATE_OPS(float)
BPRG_INSTANTIATE_OPS(double)

#undef BPRG_INSTANTIATE_OPS

}  // namespace bprg::ops
