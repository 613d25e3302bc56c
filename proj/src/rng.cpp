#include "bprg/rng.hpp"

#include "bprg/error.hpp"

namespace bprg {

std::size_t RngState::below(std::size_t n) {
  if (n == 0) throw UsageError("RngState::below(0)");
  const auto k = static_cast<std::size_t>(uniform() * double(n));
  return k < n ? k : n - 1;
}

}  // namespace bprg
