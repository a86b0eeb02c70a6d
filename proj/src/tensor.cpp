#include "amsreg/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "amsreg/ops.hpp"

namespace amsreg {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::string_view precision_name(Precision p) {
  return p == Precision::high ? "high" : "standard";
}

Precision parse_precision(std::string_view name) {
  if (name == "high") return Precision::high;
  if (name == "standard") return Precision::standard;
  throw ConfigError("unknown precision '" + std::string(name) + "' (expected standard|high)");
}

namespace {

thread_local bool g_grad_enabled = true;
// Active only while grad() propagates; nullptr means every node is needed.
thread_local const std::unordered_set<const void*>* g_needed = nullptr;

class NeededScope {
 public:
  explicit NeededScope(const std::unordered_set<const void*>* needed) : previous_(g_needed) {
    g_needed = needed;
  }
  ~NeededScope() { g_needed = previous_; }

 private:
  const std::unordered_set<const void*>* previous_;
};

class GradModeScope {
 public:
  explicit GradModeScope(bool enabled) : previous_(g_grad_enabled) { g_grad_enabled = enabled; }
  ~GradModeScope() { g_grad_enabled = previous_; }

 private:
  bool previous_;
};

void check_shape(const Shape& shape) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace detail {

std::uint64_t next_sequence() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

template <typename T>
bool gradient_needed(const Tensor<T>& t) {
  if (!t.requires_grad()) return false;
  return g_needed == nullptr || g_needed->contains(t.node().get());
}

template <typename T>
Tensor<T> make_result(std::string_view op, Shape shape, std::vector<T> values,
                      std::vector<Tensor<T>> parents, BackwardFn<T> backward) {
  if (values.size() != shape_numel(shape)) {
    throw DimensionError(std::string(op) + ": produced " + std::to_string(values.size()) +
                         " values for shape " + shape_str(shape));
  }
  for (T v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite value produced");
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->sequence = next_sequence();
  node->op = op;
  bool record = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) {
      if (p.defined() && p.requires_grad()) record = true;
    }
  }
  if (record) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

}  // namespace detail

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad) {
  check_shape(shape);
  if (values.size() != shape_numel(shape)) {
    throw DimensionError("tensor of shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  node_ = std::make_shared<detail::Node<T>>();
  node_->shape = std::move(shape);
  node_->values = std::move(values);
  node_->requires_grad = requires_grad;
  node_->sequence = detail::next_sequence();
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->shape;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

template <typename T>
std::size_t Tensor<T>::numel() const {
  return shape_numel(shape());
}

template <typename T>
std::span<const T> Tensor<T>::values() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->values;
}

template <typename T>
std::span<T> Tensor<T>::mutable_values() {
  if (!is_leaf()) throw ContractError("only leaf tensors can be modified in place");
  return node_->values;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->values[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return node_ && node_->requires_grad;
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool flag) {
  if (!is_leaf()) throw ContractError("requires_grad can only be set on leaf tensors");
  node_->requires_grad = flag;
  return *this;
}

template <typename T>
bool Tensor<T>::is_leaf() const {
  return node_ && !node_->backward;
}

template <typename T>
std::optional<Tensor<T>> Tensor<T>::grad() const {
  if (!node_ || !node_->grad) return std::nullopt;
  return Tensor<T>(node_->grad);
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_) node_->grad.reset();
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor<T>(shape(), node_->values, false);
}

template <typename T>
ComputationTape<T>::ComputationTape(const Tensor<T>& output) {
  std::unordered_set<const detail::Node<T>*> seen;
  std::vector<detail::Node<T>*> stack{output.node().get()};
  seen.insert(output.node().get());
  while (!stack.empty()) {
    detail::Node<T>* node = stack.back();
    stack.pop_back();
    nodes_.push_back(node);
    for (const auto& parent : node->parents) {
      if (parent->requires_grad && seen.insert(parent.get()).second) stack.push_back(parent.get());
    }
  }
  // Parents are always created before their children.
  std::sort(nodes_.begin(), nodes_.end(),
            [](const auto* a, const auto* b) { return a->sequence > b->sequence; });
}

namespace {

template <typename T>
using GradMap = std::unordered_map<const detail::Node<T>*, Tensor<T>>;

// Nodes of the tape from which some target is reachable (targets included).
template <typename T>
std::unordered_set<const void*> nodes_reaching(const ComputationTape<T>& tape,
                                               std::span<const Tensor<T>> targets) {
  std::unordered_set<const void*> reach;
  for (const auto& t : targets) reach.insert(t.node().get());
  for (auto it = tape.nodes().rbegin(); it != tape.nodes().rend(); ++it) {
    for (const auto& parent : (*it)->parents) {
      if (reach.contains(parent.get())) {
        reach.insert(*it);
        break;
      }
    }
  }
  return reach;
}

template <typename T>
GradMap<T> propagate(const Tensor<T>& output, const Tensor<T>& seed, bool create_graph,
                     std::span<const Tensor<T>> targets = {}) {
  GradMap<T> grads;
  ComputationTape<T> tape(output);
  std::unordered_set<const void*> needed;
  if (!targets.empty()) needed = nodes_reaching(tape, targets);
  NeededScope needed_scope(targets.empty() ? nullptr : &needed);
  GradModeScope scope(create_graph);
  grads[output.node().get()] = seed;
  for (detail::Node<T>* node : tape.nodes()) {
    if (!targets.empty() && !needed.contains(node)) continue;
    auto it = grads.find(node);
    if (it == grads.end() || !node->backward) continue;
    const Tensor<T> upstream = it->second;
    const Tensor<T> self(node->shared_from_this());
    std::vector<Tensor<T>> parent_grads = node->backward(upstream, self);
    if (parent_grads.size() != node->parents.size()) {
      throw ContractError(std::string(node->op) + ": backward returned wrong arity");
    }
    for (std::size_t i = 0; i < parent_grads.size(); ++i) {
      const auto& parent = node->parents[i];
      if (!parent->requires_grad || !parent_grads[i].defined()) continue;
      if (!targets.empty() && !needed.contains(parent.get())) continue;
      if (parent_grads[i].shape() != parent->shape) {
        throw DimensionError(std::string(node->op) + ": gradient shape " +
                             shape_str(parent_grads[i].shape()) + " != input shape " +
                             shape_str(parent->shape));
      }
      auto [slot, inserted] = grads.try_emplace(parent.get(), parent_grads[i]);
      if (!inserted) slot->second = add(slot->second, parent_grads[i]);
    }
  }
  return grads;
}

}  // namespace

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss");
  }
  if (!loss.requires_grad()) throw ContractError("backward on a tensor without history");
  GradMap<T> grads = propagate(loss, Tensor<T>::full(loss.shape(), T(1)), false);
  for (auto& [node, g] : grads) {
    if (node->backward || !node->requires_grad) continue;
    auto* leaf = const_cast<detail::Node<T>*>(node);
    if (!leaf->grad) {
      leaf->grad = g.detach().node();
    } else {
      for (std::size_t i = 0; i < leaf->grad->values.size(); ++i) {
        leaf->grad->values[i] += g.values()[i];
      }
    }
  }
}

template <typename T>
std::vector<Tensor<T>> grad(const Tensor<T>& output, std::span<const Tensor<T>> inputs,
                            const Tensor<T>& seed, bool create_graph) {
  if (!output.defined()) throw ContractError("grad of undefined tensor");
  Tensor<T> start = seed;
  if (!start.defined()) {
    if (output.numel() != 1) throw ContractError("grad of non-scalar output needs a seed");
    start = Tensor<T>::full(output.shape(), T(1));
  } else if (start.shape() != output.shape()) {
    throw DimensionError("seed shape " + shape_str(start.shape()) + " != output shape " +
                         shape_str(output.shape()));
  }
  std::vector<Tensor<T>> result;
  result.reserve(inputs.size());
  if (!output.requires_grad()) {
    for (const auto& in : inputs) result.push_back(Tensor<T>::zeros(in.shape()));
    return result;
  }
  GradMap<T> grads = propagate(output, start, create_graph, inputs);
  for (const auto& in : inputs) {
    auto it = grads.find(in.node().get());
    result.push_back(it == grads.end() ? Tensor<T>::zeros(in.shape()) : it->second);
  }
  return result;
}

#define AMSREG_INSTANTIATE(T)                                                                     \
  template class Tensor<T>;                                                                       \
  template class ComputationTape<T>;                                                              \
  template bool detail::gradient_needed<T>(const Tensor<T>&);                                     \
  template Tensor<T> detail::make_result<T>(std::string_view, Shape, std::vector<T>,             \
                                            std::vector<Tensor<T>>, detail::BackwardFn<T>);      \
  template void backward<T>(const Tensor<T>&);                                                    \
  template std::vector<Tensor<T>> grad<T>(const Tensor<T>&, std::span<const Tensor<T>>,          \
                                          const Tensor<T>&, bool);

AMSREG_INSTANTIATE(float)
AMSREG_INSTANTIATE(double)

#undef AMSREG_INSTANTIATE

}  // namespace amsreg
