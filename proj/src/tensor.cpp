// SPDX-License-Identifier: Apache-2.0
#include "livlr/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "livlr/errors.hpp"

namespace livlr {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

namespace {

struct Node {
  std::shared_ptr<detail::TensorImpl> output;
  std::vector<std::size_t> operands;
  BackwardRule rule;
};

struct Tape {
  std::vector<Node> nodes;
  std::uint64_t generation = 1;
};

thread_local Tape g_tape;
thread_local bool g_grad_enabled = true;
thread_local Precision g_precision = Precision::kSingle;

std::shared_ptr<detail::TensorImpl> new_impl(Shape shape, std::vector<double> data, bool requires_grad) {
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor of shape " + shape_str(shape) + " cannot hold " + std::to_string(data.size()) +
                     " values");
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(impl->data.size(), 0.0);
  return impl;
}

bool on_current_tape(const detail::TensorImpl& t) {
  return t.node && t.node->generation == g_tape.generation && t.node->index < g_tape.nodes.size();
}

}  // namespace

Tensor make_tensor(std::shared_ptr<detail::TensorImpl> impl) { return Tensor(std::move(impl)); }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(new_impl(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(new_impl(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  return Tensor(new_impl(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  Shape s{values.size()};
  return from_data(std::move(s), std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return from_data({rows, cols}, std::move(values));
}

detail::TensorImpl& Tensor::impl() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return impl().data.size(); }

std::span<const double> Tensor::data() const { return impl().data; }

std::span<double> Tensor::mutable_data() {
  if (!is_leaf()) throw ContractError("mutable_data() on a non-leaf tensor");
  return impl().data;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl().data[0];
}

double Tensor::at(std::size_t i) const {
  if (i >= numel()) throw ShapeError("flat index out of range for shape " + shape_str(shape()));
  return impl().data[i];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2 || row >= shape()[0] || col >= shape()[1]) {
    throw ShapeError("index (" + std::to_string(row) + "," + std::to_string(col) + ") invalid for shape " +
                     shape_str(shape()));
  }
  return impl().data[row * shape()[1] + col];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  if (!is_leaf()) throw ContractError("requires_grad can only be changed on leaves");
  auto& t = impl();
  t.requires_grad = flag;
  if (flag) {
    t.grad.assign(t.data.size(), 0.0);
  } else {
    t.grad.clear();
  }
}

bool Tensor::is_leaf() const { return !impl().node.has_value(); }

std::optional<TapeId> Tensor::tape_id() const { return impl().node; }

bool Tensor::has_grad() const { return !impl().grad.empty(); }

std::span<const double> Tensor::grad() const { return impl().grad; }

void Tensor::zero_grad() {
  auto& t = impl();
  std::fill(t.grad.begin(), t.grad.end(), 0.0);
}

Tensor Tensor::detach() const { return from_data(shape(), std::vector<double>(data().begin(), data().end())); }

// ---------------------------------------------------------------------------

Tensor record_op(Shape shape, std::vector<double> data, const std::vector<Tensor>& operands, BackwardRule rule) {
  if (g_precision == Precision::kSingle) {
    for (auto& v : data) v = static_cast<double>(static_cast<float>(v));
  }
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& op : operands) track = track || op.requires_grad();
  }
  auto impl = new_impl(std::move(shape), std::move(data), false);
  if (!track) return make_tensor(std::move(impl));

  impl->requires_grad = true;
  Node node;
  node.output = impl;
  node.rule = std::move(rule);
  for (const auto& op : operands) {
    const auto& oi = op.impl();
    if (on_current_tape(oi)) node.operands.push_back(oi.node->index);
  }
  impl->node = TapeId{g_tape.generation, g_tape.nodes.size()};
  g_tape.nodes.push_back(std::move(node));
  return make_tensor(std::move(impl));
}

std::span<double> grad_sink(const Tensor& t) {
  auto& impl = t.impl();
  if (!impl.requires_grad) return {};
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), 0.0);
  return impl.grad;
}

void backward(const Tensor& loss) {
  auto& l = loss.impl();
  if (l.data.size() != 1) throw ContractError("backward() needs a scalar loss, got shape " + shape_str(l.shape));
  if (!on_current_tape(l)) throw ContractError("backward() on a tensor that is not on the current tape");

  auto seed = grad_sink(loss);
  seed[0] += 1.0;
  for (std::size_t k = l.node->index + 1; k-- > 0;) {
    auto& node = g_tape.nodes[k];
    if (node.output->grad.empty()) continue;
    node.rule(BackwardArgs{node.output->grad, node.output->data});
  }
  clear_tape();
}

std::size_t tape_size() { return g_tape.nodes.size(); }

std::uint64_t tape_generation() { return g_tape.generation; }

void clear_tape() {
  g_tape.nodes.clear();
  ++g_tape.generation;
}

std::vector<std::size_t> tape_operands(std::size_t index) {
  if (index >= g_tape.nodes.size()) throw ContractError("tape index out of range");
  return g_tape.nodes[index].operands;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Precision current_precision() { return g_precision; }

double round_to_precision(double v) {
  return g_precision == Precision::kSingle ? static_cast<double>(static_cast<float>(v)) : v;
}

PrecisionScope::PrecisionScope(Precision p) : previous_(g_precision) { g_precision = p; }
PrecisionScope::~PrecisionScope() { g_precision = previous_; }

}  // namespace livlr
