#include "hpgn/tensor.hpp"

#include <algorithm>

namespace hpgn {

namespace {

template <typename T>
void record_impl(Tensor<T>& out, bool any_grad, std::function<void(const detail::TensorImpl<T>&)> backward_fn) {
  auto& tape = detail::active_tape<T>;
  if (!any_grad || !tape) return;
  if (tape->consumed) throw StaleTapeError("cannot record onto a tape that has already run backward");
  out.impl()->requires_grad = true;
  out.impl()->tape = tape;
  tape->records.push_back({out.impl(), std::move(backward_fn)});
}

}  // namespace

template <typename T>
void record_op(Tensor<T>& out, std::initializer_list<const Tensor<T>*> inputs,
               std::function<void(const detail::TensorImpl<T>&)> backward_fn) {
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor<T>* t) { return detail::wants_grad(*t); });
  record_impl(out, any, std::move(backward_fn));
}

template <typename T>
void record_op(Tensor<T>& out, const std::vector<Tensor<T>>& inputs,
               std::function<void(const detail::TensorImpl<T>&)> backward_fn) {
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor<T>& t) { return detail::wants_grad(t); });
  record_impl(out, any, std::move(backward_fn));
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined()) throw ContractError("backward on an undefined tensor");
  const auto& shape = loss.shape();
  const bool scalar = shape.rank() == 0 || (shape.rank() == 1 && shape[0] == 1);
  if (!scalar) throw ContractError("backward requires a scalar loss, got shape " + shape.str());
  auto state = loss.impl()->tape.lock();
  if (!state) throw ContractError("backward: loss was not produced on a live tape");
  if (state->consumed) throw StaleTapeError("backward called twice on the same tape");

  auto& seed = detail::grad_buffer(*loss.impl());
  seed[0] += T(1);

  for (auto it = state->records.rbegin(); it != state->records.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not an ancestor of the loss
    it->backward(*it->output);
  }
  state->consumed = true;
  // Intermediate values stay reachable through user handles; the tape drops
  // its references so activations are freed as soon as possible.
  state->records.clear();
  state->records.shrink_to_fit();
}

template void record_op<float>(Tensor<float>&, std::initializer_list<const Tensor<float>*>,
                               std::function<void(const detail::TensorImpl<float>&)>);
template void record_op<double>(Tensor<double>&, std::initializer_list<const Tensor<double>*>,
                                std::function<void(const detail::TensorImpl<double>&)>);
template void record_op<float>(Tensor<float>&, const std::vector<Tensor<float>>&,
                               std::function<void(const detail::TensorImpl<float>&)>);
template void record_op<double>(Tensor<double>&, const std::vector<Tensor<double>>&,
                                std::function<void(const detail::TensorImpl<double>&)>);
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace hpgn
