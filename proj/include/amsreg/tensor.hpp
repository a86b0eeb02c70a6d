#pragma once

// Dense tensors with define-by-run reverse-mode differentiation.
//
// Every op that sees an input with requires_grad records a node holding its
// parents and a backward closure. The closure is itself written in terms of
// tensor ops, so running backward with create_graph=true yields gradients
// that are differentiable again (needed for the input-gradient penalties).
//
// Two precisions are instantiated: Tensor<float> ("standard") and
// Tensor<double> ("high").

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "amsreg/errors.hpp"

namespace amsreg {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

enum class Precision { standard, high };

template <typename T>
constexpr Precision precision_of() {
  return sizeof(T) == sizeof(double) ? Precision::high : Precision::standard;
}

std::string_view precision_name(Precision p);
Precision parse_precision(std::string_view name);

template <typename T>
class Tensor;

namespace detail {
template <typename T>
struct Node;
}

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const T> values() const;
  // Only leaves may be mutated in place (optimizer steps, attack iterates).
  std::span<T> mutable_values();
  T item() const;
  T at(std::size_t flat_index) const { return values()[flat_index]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const;

  // Accumulated by backward(); absent until the first backward reaching it.
  std::optional<Tensor> grad() const;
  void zero_grad();

  // Same values, no history, no grad requirement.
  Tensor detach() const;

  const std::shared_ptr<detail::Node<T>>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node<T>> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

namespace detail {

template <typename T>
using BackwardFn =
    std::function<std::vector<Tensor<T>>(const Tensor<T>& upstream, const Tensor<T>& output)>;

template <typename T>
struct Node : std::enable_shared_from_this<Node<T>> {
  Shape shape;
  std::vector<T> values;
  bool requires_grad = false;
  std::uint64_t sequence = 0;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node<T>>> parents;
  // Returns one gradient per parent (undefined tensors for parents that do
  // not require grad).
  BackwardFn<T> backward;
  std::shared_ptr<Node<T>> grad;
};

std::uint64_t next_sequence();

// True when a backward closure should produce the gradient for `t`: it
// requires grad and, during grad(), lies on a path to a requested input.
template <typename T>
bool gradient_needed(const Tensor<T>& t);

// Builds the result node of an op. Records history only when grad mode is on
// and some parent requires grad. Throws NumericError on non-finite output.
template <typename T>
Tensor<T> make_result(std::string_view op, Shape shape, std::vector<T> values,
                      std::vector<Tensor<T>> parents, BackwardFn<T> backward);

}  // namespace detail

// Grad mode is thread-local. While a guard is alive, ops record nothing.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Ordered record of the nodes reachable from an output, in reverse
// topological order (output first). Each node appears once.
template <typename T>
class ComputationTape {
 public:
  explicit ComputationTape(const Tensor<T>& output);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<detail::Node<T>*>& nodes() const { return nodes_; }

 private:
  std::vector<detail::Node<T>*> nodes_;
};

// Accumulates d(loss)/d(leaf) into grad() of every requires_grad leaf.
// loss must be a scalar.
template <typename T>
void backward(const Tensor<T>& loss);

// Vector-Jacobian product of output w.r.t. each input. seed defaults to 1 for
// scalar outputs and is required otherwise. With create_graph the returned
// gradients carry history and can be differentiated again.
template <typename T>
std::vector<Tensor<T>> grad(const Tensor<T>& output, std::span<const Tensor<T>> inputs,
                            const Tensor<T>& seed = {}, bool create_graph = false);

// Single-input convenience form.
template <typename T>
Tensor<T> grad(const Tensor<T>& output, const Tensor<T>& input, const Tensor<T>& seed = {},
               bool create_graph = false) {
  const Tensor<T> inputs[] = {input};
  return grad(output, std::span<const Tensor<T>>(inputs), seed, create_graph)[0];
}

}  // namespace amsreg
