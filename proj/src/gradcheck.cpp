#include "bprg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "bprg/error.hpp"

namespace bprg {

Tensor64 finite_difference_gradient(const std::function<double(const Tensor64&)>& f, const Tensor64& x,
                                    double h) {
  if (!(h > 0)) throw UsageError("finite_difference_gradient: step must be positive");
  Tensor64 probe(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
  Tensor64 out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double original = probe[i];
    probe[i] = original + h;
    const double up = f(probe);
    probe[i] = original - h;
    const double down = f(probe);
    probe[i] = original;
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

double relative_error(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
  return std::fabs(a - b) / denom;
}

double max_relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("max_relative_error: length mismatch");
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a[i], b[i]));
  return worst;
}

}  // namespace bprg
