#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "bprg/tensor.hpp"

namespace bprg {

// Reverse-mode autodiff record. The tape owns every intermediate produced by
// the ops (stable addresses); leaves such as model parameters are referenced
// and must outlive the tape.
template <typename Real>
class Tape {
 public:
  using TensorT = BasicTensor<Real>;

  struct Node {
    std::vector<TensorT*> inputs;
    TensorT* output;
    // Reads output->grad() and accumulates into the inputs that require grad.
    std::function<void()> backward;
  };

  // A non-recording tape still owns op outputs; used for inference.
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  TensorT& keep(TensorT value) { return values_.emplace_back(std::move(value)); }
  bool owns(const TensorT& t) const;

  // Registers a node; no-op when recording is off.
  void record(std::vector<TensorT*> inputs, TensorT* output, std::function<void()> backward);

  const std::vector<Node>& nodes() const { return nodes_; }

  // Seeds d(loss)/d(loss) = 1 and runs every node once in reverse order.
  // Throws UsageError for a non-scalar loss or one this tape did not produce.
  void backward(TensorT& loss);

 private:
  bool recording_;
  std::deque<TensorT> values_;
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

template <typename Real>
void backward(BasicTensor<Real>& loss, Tape<Real>& tape) {
  tape.backward(loss);
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace bprg
