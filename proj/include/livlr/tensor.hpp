// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensors with a thread-local reverse-mode tape.
//
// Every differentiable operation appends one node to the current thread's
// tape. backward() replays the nodes in reverse order, accumulating into the
// grad buffers of reachable leaves, and then clears the tape.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace livlr {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Single precision rounds every recorded result to float; double keeps the
// full buffer. Storage is double in both modes.
enum class Precision { kSingle, kDouble };

struct TapeId {
  std::uint64_t generation = 0;
  std::size_t index = 0;
};

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::optional<TapeId> node;
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Writable view of a leaf's buffer. Non-leaf values are owned by the tape.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool is_leaf() const;
  std::optional<TapeId> tape_id() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Leaf copy of the values, detached from any tape.
  Tensor detach() const;

  detail::TensorImpl& impl() const;

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_tensor(std::shared_ptr<detail::TensorImpl>);

  std::shared_ptr<detail::TensorImpl> impl_;
};

Tensor make_tensor(std::shared_ptr<detail::TensorImpl> impl);

// ---------------------------------------------------------------------------
// Tape.

struct BackwardArgs {
  std::span<const double> grad_out;
  std::span<const double> out;
};

using BackwardRule = std::function<void(const BackwardArgs&)>;

// Builds the result of an operation. When gradient recording is enabled and
// any operand requires a gradient, a node holding `rule` is appended to the
// tape and the result becomes a non-leaf. Otherwise the rule is dropped and
// the result is a constant leaf. `rule` is expected to capture the operands
// it differentiates into.
Tensor record_op(Shape shape, std::vector<double> data, const std::vector<Tensor>& operands,
                 BackwardRule rule);

// Gradient buffer of `t`, allocated zero-filled on first use. Empty when `t`
// does not require a gradient. Backward rules accumulate (+=) into it.
std::span<double> grad_sink(const Tensor& t);

// Replays the tape from `loss` (a scalar on the current tape), accumulating
// gradients, then clears the tape.
void backward(const Tensor& loss);

std::size_t tape_size();
std::uint64_t tape_generation();
void clear_tape();

// Operand tape ids recorded for node `index`; used to verify ordering.
std::vector<std::size_t> tape_operands(std::size_t index);

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

Precision current_precision();
double round_to_precision(double v);

class PrecisionScope {
 public:
  explicit PrecisionScope(Precision p);
  ~PrecisionScope();
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  Precision previous_;
};

}  // namespace livlr
