#pragma once

// Dense N-d tensors with tape-based reverse-mode differentiation.
//
// Operations record onto the innermost live Tape of the calling thread when at
// least one input requires a gradient. With no live tape nothing is recorded
// and outputs are plain values, which is how inference runs.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hpgn/errors.hpp"

namespace hpgn {

class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) : dims_(dims) {}
  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {}

  std::size_t rank() const { return dims_.size(); }
  std::size_t operator[](std::size_t i) const { return dims_.at(i); }
  const std::vector<std::size_t>& dims() const { return dims_; }

  std::size_t numel() const {
    return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
  }

  std::string str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(dims_[i]);
    }
    return s + "]";
  }

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
};

template <typename T>
class Tensor;
template <typename T>
class Tape;

namespace detail {

template <typename T>
struct TapeState;

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient reaches this tensor
  bool requires_grad = false;
  std::weak_ptr<TapeState<T>> tape;
};

template <typename T>
struct TapeRecord {
  std::shared_ptr<TensorImpl<T>> output;
  std::function<void(const TensorImpl<T>& out)> backward;
};

template <typename T>
struct TapeState {
  std::vector<TapeRecord<T>> records;
  bool consumed = false;
};

template <typename T>
inline thread_local std::shared_ptr<TapeState<T>> active_tape;

}  // namespace detail

/// Handle to a dense row-major tensor. Copies share storage; use clone() for a
/// deep copy.
template <typename T>
class Tensor {
 public:
  using Impl = detail::TensorImpl<T>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), T(0), requires_grad);
  }

  static Tensor ones(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), T(1), requires_grad);
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    std::vector<T> data(shape.numel(), value);
    return from(std::move(shape), std::move(data), requires_grad);
  }

  static Tensor scalar(T value, bool requires_grad = false) { return from(Shape{}, {value}, requires_grad); }

  static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (data.size() != shape.numel()) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                           shape.str());
    }
    auto impl = std::make_shared<Impl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->data.size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape[i]; }

  std::span<const T> data() const { return impl_->data; }
  /// Direct write access; intended for leaf tensors (initialization, optimizers).
  std::span<T> mutable_data() { return impl_->data; }
  T at(std::size_t flat_index) const { return impl_->data.at(flat_index); }
  T item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape().str());
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) {
    impl_->requires_grad = on;
    if (!on) impl_->grad.clear();
  }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  void zero_grad() { impl_->grad.clear(); }

  /// Deep copy of the values; the copy is a fresh leaf.
  Tensor clone(bool requires_grad = false) const {
    return from(shape(), impl_->data, requires_grad);
  }
  /// Value-only view sharing no graph history; data is copied.
  Tensor detach() const { return clone(false); }

  const std::shared_ptr<Impl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<Impl> impl_;
};

/// Scoped recording context. While alive it is the thread's active tape; tapes
/// nest and restore the previous one on destruction.
template <typename T>
class Tape {
 public:
  Tape() : state_(std::make_shared<detail::TapeState<T>>()), previous_(detail::active_tape<T>) {
    detail::active_tape<T> = state_;
  }
  ~Tape() { detail::active_tape<T> = previous_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return state_->records.size(); }
  bool consumed() const { return state_->consumed; }

 private:
  std::shared_ptr<detail::TapeState<T>> state_;
  std::shared_ptr<detail::TapeState<T>> previous_;
};

/// Disables recording on this thread for its lifetime.
template <typename T>
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::active_tape<T>) { detail::active_tape<T>.reset(); }
  ~NoGradGuard() { detail::active_tape<T> = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  std::shared_ptr<detail::TapeState<T>> previous_;
};

namespace detail {

/// Grad buffer of `impl`, allocated (zero-filled) on first use. Only call for
/// tensors that require grad.
template <typename T>
std::vector<T>& grad_buffer(TensorImpl<T>& impl) {
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), T(0));
  return impl.grad;
}

template <typename T>
bool wants_grad(const Tensor<T>& t) {
  return t.defined() && t.requires_grad();
}

}  // namespace detail

/// Record `out` as produced from `inputs` with the given backward closure, if
/// any input requires grad and a tape is live. The closure receives the output
/// impl (whose grad is populated) and must accumulate into input grads.
template <typename T>
void record_op(Tensor<T>& out, std::initializer_list<const Tensor<T>*> inputs,
               std::function<void(const detail::TensorImpl<T>&)> backward_fn);

template <typename T>
void record_op(Tensor<T>& out, const std::vector<Tensor<T>>& inputs,
               std::function<void(const detail::TensorImpl<T>&)> backward_fn);

/// Run reverse-mode differentiation from a scalar loss over the tape that
/// recorded it. Gradients accumulate into every requires_grad ancestor.
template <typename T>
void backward(const Tensor<T>& loss);

/// True when the calling thread has a live tape for scalar type T.
template <typename T>
bool recording() {
  return detail::active_tape<T> != nullptr;
}

// Branch probing: kinked primitives (relu, leaky_relu, clamp, abs) fold the
// branch each element took into a per-thread signature while a probe is live.
// Finite-difference harnesses use it to tell whether a stencil straddles a
// kink, where the function is not differentiable.
namespace diag {

struct ProbeState {
  bool active = false;
  std::uint64_t signature = 1469598103934665603ULL;
};

inline thread_local ProbeState probe_state;

class BranchProbe {
 public:
  BranchProbe() : saved_(probe_state) { probe_state = ProbeState{true, 1469598103934665603ULL}; }
  ~BranchProbe() { probe_state = saved_; }
  BranchProbe(const BranchProbe&) = delete;
  BranchProbe& operator=(const BranchProbe&) = delete;
  std::uint64_t signature() const { return probe_state.signature; }
  void reset() { probe_state.signature = 1469598103934665603ULL; }

 private:
  ProbeState saved_;
};

inline bool probing() { return probe_state.active; }
inline void fold_branch(std::uint64_t branch) {
  probe_state.signature = (probe_state.signature ^ (branch + 1)) * 1099511628211ULL;
}

}  // namespace diag

}  // namespace hpgn
