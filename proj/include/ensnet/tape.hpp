#pragma once

// Define-by-run reverse-mode differentiation.
//
// Every operation appends one node to a Tape. Nodes are numbered in creation
// order, which is also a topological order, so backward() is a single
// reverse sweep that visits each node at most once.

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "ensnet/tensor.hpp"

namespace ensnet {

template <typename T>
class Tape;

template <typename T>
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  std::size_t index() const noexcept { return index_; }
  Tape<T>& tape() const noexcept { return *tape_; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape<T>* tape_ = nullptr;
  std::size_t index_ = 0;
};

// View handed to a node's backward function.
template <typename T>
class BackwardContext {
 public:
  const Tensor<T>& grad_output() const { return *grad_output_; }
  const Tensor<T>& output() const;
  const Tensor<T>& input(std::size_t slot) const;
  bool needs_grad(std::size_t slot) const;
  // Adds `grad` into the running gradient of input `slot`.
  void accumulate(std::size_t slot, Tensor<T> grad);

 private:
  friend class Tape<T>;
  BackwardContext(Tape<T>& tape, std::size_t node, const Tensor<T>& grad_output,
                  std::vector<std::optional<Tensor<T>>>& grads)
      : tape_(tape), node_(node), grad_output_(&grad_output), grads_(grads) {}

  Tape<T>& tape_;
  std::size_t node_;
  const Tensor<T>* grad_output_;
  std::vector<std::optional<Tensor<T>>>& grads_;
};

template <typename T>
using BackwardFn = std::function<void(BackwardContext<T>&)>;

// Gradients of the leaves reached by one backward pass.
template <typename T>
class Gradients {
 public:
  // nullptr when the leaf does not require a gradient or was not reached.
  const Tensor<T>* find(const Var<T>& var) const;
  const Tensor<T>& at(const Var<T>& var) const;
  bool contains(const Var<T>& var) const { return find(var) != nullptr; }

 private:
  friend class Tape<T>;
  std::vector<std::optional<Tensor<T>>> grads_;
};

template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that never receives a gradient.
  Var<T> constant(Tensor<T> value);
  // Leaf that receives a gradient.
  Var<T> variable(Tensor<T> value);
  // Leaf backed by an external tensor, which must outlive the tape.
  Var<T> watch(const Tensor<T>& external, bool requires_grad);

  // Appends an operation node. `backward` is dropped when no input needs a gradient.
  Var<T> record(Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> backward);

  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse sweep from a single-element loss.
  Gradients<T> backward(const Var<T>& loss);

 private:
  friend class Var<T>;
  friend class BackwardContext<T>;

  struct Node {
    std::optional<Tensor<T>> owned;
    const Tensor<T>* value = nullptr;
    bool requires_grad = false;
    bool leaf = true;
    std::vector<std::size_t> inputs;
    BackwardFn<T> backward;
  };

  const Node& node(std::size_t index) const { return nodes_[index]; }
  Var<T> push_leaf(Node node);

  std::deque<Node> nodes_;
};

extern template class Var<float>;
extern template class Var<double>;
extern template class BackwardContext<float>;
extern template class BackwardContext<double>;
extern template class Gradients<float>;
extern template class Gradients<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace ensnet
