#include "lac/tape.hpp"

#include <stdexcept>

#include "buffer.hpp"

namespace lac {

namespace {
thread_local Tape* t_current = nullptr;
}

Tape::Tape() {
  prev_ = t_current;
  t_current = this;
}

Tape::~Tape() { t_current = prev_; }

Tape* Tape::current() noexcept { return t_current; }

void Tape::watch(Tensor& t) {
  if (!t.defined()) throw std::invalid_argument("Tape::watch: undefined tensor");
  t.node_ = std::make_shared<detail::Node>();
}

void Tape::record(std::shared_ptr<detail::Node> node) {
  ops_.push_back(std::move(node));
  consumed_ = false;
}

void Tape::backward(const Tensor& loss) {
  if (consumed_)
    throw std::runtime_error("Tape::backward: tape already consumed; run forward again");
  if (loss.size() != 1)
    throw std::invalid_argument("Tape::backward: loss must be scalar, have " +
                                loss.shape_str());
  if (!loss.tracked())
    throw std::invalid_argument("Tape::backward: loss was not produced under this tape");
  accumulate_grad(loss, Tensor::full({1}, 1.0));
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    detail::Node& n = **it;
    if (n.grad.defined() && n.backprop) n.backprop(n.grad);
  }
  consumed_ = true;
}

void accumulate_grad(const Tensor& t, const Tensor& g) {
  const auto& node = node_of(t);
  if (!node) return;
  if (!node->grad.defined()) node->grad = Tensor::zeros(t.shape());
  if (node->grad.size() != g.size())
    throw std::runtime_error("accumulate_grad: shape mismatch " + node->grad.shape_str() +
                             " vs " + g.shape_str());
  double* dst = node->grad.data();
  const double* src = g.data();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
}

const std::shared_ptr<detail::Node>& node_of(const Tensor& t) { return t.node_; }

Tensor make_tracked(Tensor t, std::shared_ptr<detail::Node> node) {
  t.node_ = std::move(node);
  return t;
}

Tensor record_op(Tensor out, bool any_tracked,
                 std::function<void(const Tensor& out_grad)> backprop) {
  Tape* tape = Tape::current();
  if (!tape || !any_tracked) return out;
  auto node = std::make_shared<detail::Node>();
  node->backprop = std::move(backprop);
  tape->record(node);
  return make_tracked(std::move(out), std::move(node));
}

}  // namespace lac
