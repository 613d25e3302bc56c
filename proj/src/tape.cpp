#include "bprg/tape.hpp"

#include "bprg/error.hpp"

namespace bprg {

template <typename Real>
bool Tape<Real>::owns(const TensorT& t) const {
  for (const auto& v : values_)
    if (&v == &t) return true;
  return false;
}

template <typename Real>
void Tape<Real>::record(std::vector<TensorT*> inputs, TensorT* output, std::function<void()> backward) {
  if (!recording_) return;
  output->set_requires_grad(true);
  nodes_.push_back(Node{std::move(inputs), output, std::move(backward)});
}

template <typename Real>
void Tape<Real>::backward(TensorT& loss) {
  if (!loss.is_scalar())
    throw UsageError("backward() needs a scalar loss, got shape " + shape_to_string(loss.shape()));
  if (!owns(loss)) throw UsageError("backward(): loss was not produced under this tape");
  if (!recording_) throw UsageError("backward(): tape was not recording");
  if (consumed_) throw UsageError("backward(): tape already consumed");
  consumed_ = true;

  loss.grad()[0] = Real(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    // Nodes whose output never received a gradient are unreachable from the loss.
    if (!it->output->has_grad()) continue;
    it->backward();
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace bprg
