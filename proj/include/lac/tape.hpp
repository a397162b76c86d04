#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lac/tensor.hpp"

namespace lac {

namespace detail {
// One recorded operation (or leaf). backprop receives the node's accumulated
// output gradient and pushes contributions into the parents' nodes.
struct Node {
  Tensor grad;
  std::function<void(const Tensor& out_grad)> backprop;
};
}  // namespace detail

// Reverse-mode gradient record. While a Tape is alive on the current thread,
// ops involving tracked tensors append themselves in execution order;
// backward() replays that record strictly in reverse. A second backward()
// without new forward work is rejected.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Marks t as a leaf parameter; its gradient is available after backward().
  void watch(Tensor& t);

  void backward(const Tensor& loss);

  std::size_t recorded_ops() const { return ops_.size(); }

  static Tape* current() noexcept;

  // Internal: called by ops.
  void record(std::shared_ptr<detail::Node> node);

 private:
  std::vector<std::shared_ptr<detail::Node>> ops_;  // execution order
  bool consumed_ = false;
  Tape* prev_ = nullptr;
};

// Adds g into the gradient slot of t (no-op when t is untracked).
void accumulate_grad(const Tensor& t, const Tensor& g);

// Internal plumbing used by ops when recording.
const std::shared_ptr<detail::Node>& node_of(const Tensor& t);
Tensor make_tracked(Tensor t, std::shared_ptr<detail::Node> node);

// Registers a custom forward result on the current tape (when one is active
// and any_tracked is set) with the supplied backward step.
Tensor record_op(Tensor out, bool any_tracked,
                 std::function<void(const Tensor& out_grad)> backprop);

}  // namespace lac
