#include "ensnet/tape.hpp"

#include "detail/math.hpp"
#include "ensnet/errors.hpp"

namespace ensnet {

template <typename T>
const Tensor<T>& Var<T>::value() const {
  if (tape_ == nullptr) throw ContractError("use of an unbound Var");
  return *tape_->node(index_).value;
}

template <typename T>
bool Var<T>::requires_grad() const {
  if (tape_ == nullptr) throw ContractError("use of an unbound Var");
  return tape_->node(index_).requires_grad;
}

template <typename T>
const Tensor<T>& BackwardContext<T>::output() const {
  return *tape_.node(node_).value;
}

template <typename T>
const Tensor<T>& BackwardContext<T>::input(std::size_t slot) const {
  return *tape_.node(tape_.node(node_).inputs.at(slot)).value;
}

template <typename T>
bool BackwardContext<T>::needs_grad(std::size_t slot) const {
  return tape_.node(tape_.node(node_).inputs.at(slot)).requires_grad;
}

template <typename T>
void BackwardContext<T>::accumulate(std::size_t slot, Tensor<T> grad) {
  const std::size_t target = tape_.node(node_).inputs.at(slot);
  if (!tape_.node(target).requires_grad) return;
  const Tensor<T>& target_value = *tape_.node(target).value;
  if (grad.size() != target_value.size()) {
    throw DimensionError("gradient of shape " + to_string(grad.shape()) + " for input of shape " +
                         to_string(target_value.shape()));
  }
  auto& slot_grad = grads_[target];
  if (!slot_grad) {
    if (grad.shape() != target_value.shape()) grad = std::move(grad).reshaped(target_value.shape());
    slot_grad = std::move(grad);
  } else {
    detail::add_inplace(slot_grad->ptr(), grad.ptr(), grad.size());
  }
}

template <typename T>
const Tensor<T>* Gradients<T>::find(const Var<T>& var) const {
  if (var.index() >= grads_.size() || !grads_[var.index()]) return nullptr;
  return &*grads_[var.index()];
}

template <typename T>
const Tensor<T>& Gradients<T>::at(const Var<T>& var) const {
  const Tensor<T>* grad = find(var);
  if (grad == nullptr) throw ContractError("no gradient recorded for node " + std::to_string(var.index()));
  return *grad;
}

template <typename T>
Var<T> Tape<T>::push_leaf(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node node;
  node.owned = std::move(value);
  node.value = &*node.owned;
  nodes_.push_back(std::move(node));
  // The optional moved along with the node; re-point at the stored copy.
  nodes_.back().value = &*nodes_.back().owned;
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::variable(Tensor<T> value) {
  Var<T> var = constant(std::move(value));
  nodes_.back().requires_grad = true;
  return var;
}

template <typename T>
Var<T> Tape<T>::watch(const Tensor<T>& external, bool requires_grad) {
  Node node;
  node.value = &external;
  node.requires_grad = requires_grad;
  return push_leaf(std::move(node));
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> backward) {
  Node node;
  node.leaf = false;
  node.inputs.reserve(inputs.size());
  for (const Var<T>& input : inputs) {
    if (&input.tape() != this) throw ContractError("operation mixes Vars from different tapes");
    node.inputs.push_back(input.index());
    node.requires_grad = node.requires_grad || nodes_[input.index()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  nodes_.back().value = &*nodes_.back().owned;
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Gradients<T> Tape<T>::backward(const Var<T>& loss) {
  if (&loss.tape() != this) throw ContractError("backward() on a Var from another tape");
  if (nodes_.empty()) throw ContractError("backward() on an empty tape");
  const Tensor<T>& loss_value = loss.value();
  if (loss_value.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + to_string(loss_value.shape()));
  }

  std::vector<std::optional<Tensor<T>>> grads(nodes_.size());
  if (nodes_[loss.index()].requires_grad) grads[loss.index()] = Tensor<T>(loss_value.shape(), T(1));

  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.leaf || !grads[i]) continue;
    const Tensor<T> grad_output = std::move(*grads[i]);
    grads[i].reset();
    if (node.backward) {
      BackwardContext<T> ctx(*this, i, grad_output, grads);
      node.backward(ctx);
    }
  }

  Gradients<T> result;
  result.grads_ = std::move(grads);
  return result;
}

template class Var<float>;
template class Var<double>;
template class BackwardContext<float>;
template class BackwardContext<double>;
template class Gradients<float>;
template class Gradients<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace ensnet
