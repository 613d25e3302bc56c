#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "bprg/error.hpp"
#include "bprg/rng.hpp"
#include "bprg/simd/kernels.hpp"

using namespace bprg;

namespace {

template <typename Real>
std::vector<Real> noise(std::size_t n, RngState& rng) {
  std::vector<Real> v(n);
  for (auto& x : v) x = Real(4.0 * rng.uniform() - 2.0);
  // sprinkle exact zeros so relu/mask boundaries are exercised
  for (std::size_t i = 0; i < n; i += 7) v[i] = Real(0);
  return v;
}

template <typename Real>
bool bitwise_equal(const std::vector<Real>& a, const std::vector<Real>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(Real)) == 0;
}

template <typename Real>
void check_equivalence() {
  const auto* wide = simd::avx2_kernels<Real>();
  if (!wide) return;
  const auto& ref = simd::scalar_kernels<Real>();
  RngState rng(11);
  for (std::size_t n : {0, 1, 3, 7, 8, 9, 15, 16, 17, 31, 33, 64, 100, 1027}) {
    CAPTURE(n);
    const auto x = noise<Real>(n, rng), y = noise<Real>(n, rng), g = noise<Real>(n, rng);
    std::vector<std::uint8_t> mask(n);
    for (auto& m : mask) m = rng.uniform() < 0.5 ? 0 : 1;

    auto run = [&](const simd::KernelTable<Real>& k) {
      std::vector<std::vector<Real>> out;
      auto a = y;
      k.axpy(n, Real(0.37), x.data(), a.data());
      out.push_back(a);
      a = y;
      k.add(n, x.data(), a.data());
      out.push_back(a);
      a.assign(n, Real(0));
      k.mul(n, x.data(), y.data(), a.data());
      out.push_back(a);
      k.relu(n, x.data(), a.data());
      out.push_back(a);
      a = g;
      k.relu_backward(n, x.data(), y.data(), a.data());
      out.push_back(a);
      a = x;
      k.apply_mask(n, mask.data(), a.data());
      out.push_back(a);
      auto v = y, w = x;
      k.sgd_momentum(n, Real(0.05), Real(0.9), g.data(), v.data(), w.data());
      out.push_back(v);
      out.push_back(w);
      return out;
    };
    const auto expect = run(ref);
    const auto got = run(*wide);
    for (std::size_t i = 0; i < expect.size(); ++i) {
      CAPTURE(i);
      CHECK(bitwise_equal(expect[i], got[i]));
    }

    const double d_ref = double(ref.dot(n, x.data(), y.data()));
    const double d_wide = double(wide->dot(n, x.data(), y.data()));
    double scale = 0;
    for (std::size_t i = 0; i < n; ++i) scale += std::fabs(double(x[i]) * double(y[i]));
    CHECK(std::fabs(d_ref - d_wide) <= 8 * double(std::numeric_limits<Real>::epsilon()) * (scale + 1));

    CHECK(ref.all_finite(n, x.data()) == wide->all_finite(n, x.data()));
    if (n > 0) {
      for (Real bad : {std::numeric_limits<Real>::infinity(), std::numeric_limits<Real>::quiet_NaN()}) {
        auto z = x;
        z[n - 1] = bad;
        CHECK_FALSE(ref.all_finite(n, z.data()));
        CHECK_FALSE(wide->all_finite(n, z.data()));
      }
    }
  }
}

}  // namespace

TEST_CASE("avx2 kernels match the scalar reference") {
  check_equivalence<float>();
  check_equivalence<double>();
}

TEST_CASE("active isa can be forced") {
  const auto before = simd::active_isa();
  simd::set_active_isa(simd::Isa::scalar);
  CHECK(simd::kernels<float>().isa == simd::Isa::scalar);
  if (simd::isa_available(simd::Isa::avx2)) {
    simd::set_active_isa(simd::Isa::avx2);
    CHECK(simd::kernels<double>().isa == simd::Isa::avx2);
  } else {
    CHECK_THROWS_AS(simd::set_active_isa(simd::Isa::avx2), UsageError);
  }
  simd::set_active_isa(before);
}

TEST_CASE("scalar kernel semantics") {
  const auto& k = simd::scalar_kernels<float>();
  std::vector<float> x{-1, 2, 0}, y(3);
  k.relu(3, x.data(), y.data());
  CHECK(y == std::vector<float>{0, 2, 0});
  std::vector<float> w{1}, v{0}, g{1};
  k.sgd_momentum(1, 0.1f, 0.0f, g.data(), v.data(), w.data());
  CHECK(w[0] == doctest::Approx(0.9));
}
