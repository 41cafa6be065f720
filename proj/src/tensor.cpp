#include "cvgl/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "cvgl/rng.hpp"

namespace cvgl {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one extent");
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(shape));
  }
}

thread_local std::vector<Tape*> g_tape_stack;

}  // namespace

namespace detail {

void check_finite(const std::vector<double>& values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::domain_error(std::string("non-finite value in ") + what);
    }
  }
}

std::vector<double>& grad_buffer(const NodePtr& n) {
  if (n->grad.empty()) n->grad.assign(n->data.size(), 0.0);
  return n->grad;
}

}  // namespace detail

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  validate_shape(shape);
  auto n = std::make_shared<detail::Node>();
  n->data.assign(shape_numel(shape), 0.0);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  validate_shape(shape);
  detail::check_finite({value}, "tensor fill value");
  auto n = std::make_shared<detail::Node>();
  n->data.assign(shape_numel(shape), value);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  validate_shape(shape);
  if (data.size() != shape_numel(shape)) {
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
  detail::check_finite(data, "tensor construction");
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::glorot_uniform(Shape shape, int fan_in, int fan_out, std::uint64_t seed) {
  validate_shape(shape);
  if (fan_in <= 0 || fan_out <= 0) throw std::invalid_argument("fan_in and fan_out must be positive");
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng rng(seed);
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform(-a, a);
  return from_data(std::move(shape), std::move(data), true);
}

double Tensor::value() const {
  if (size() != 1) throw std::invalid_argument("value() requires a single-element tensor, got " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(int i) const {
  if (rank() != 1) throw std::invalid_argument("at(i) requires rank 1, got " + shape_str(shape()));
  return node_->data[static_cast<std::size_t>(i)];
}

double Tensor::at(int i, int j) const {
  if (rank() != 2) throw std::invalid_argument("at(i,j) requires rank 2, got " + shape_str(shape()));
  return node_->data[static_cast<std::size_t>(i) * static_cast<std::size_t>(dim(1)) + static_cast<std::size_t>(j)];
}

double Tensor::at(int i, int j, int k) const {
  if (rank() != 3) throw std::invalid_argument("at(i,j,k) requires rank 3, got " + shape_str(shape()));
  const auto d1 = static_cast<std::size_t>(dim(1));
  const auto d2 = static_cast<std::size_t>(dim(2));
  return node_->data[(static_cast<std::size_t>(i) * d1 + static_cast<std::size_t>(j)) * d2 + static_cast<std::size_t>(k)];
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty()) throw std::logic_error("tensor has no gradient; run backward first");
  return node_->grad;
}

void Tensor::set_data(const std::vector<double>& values) {
  if (values.size() != node_->data.size()) {
    throw std::invalid_argument("set_data length " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape()));
  }
  detail::check_finite(values, "set_data");
  node_->data = values;
}

Tape::Tape() { g_tape_stack.push_back(this); }

Tape::~Tape() {
  if (!g_tape_stack.empty() && g_tape_stack.back() == this) g_tape_stack.pop_back();
}

Tape* Tape::active() { return g_tape_stack.empty() ? nullptr : g_tape_stack.back(); }

bool tracked(const detail::NodePtr& n) {
  return n->requires_grad || (n->tape != nullptr && n->tape == Tape::active());
}

bool Tape::maybe_record(const char* op, std::vector<detail::NodePtr> inputs,
                        const detail::NodePtr& output,
                        std::function<void(const Record&)> backward_fn) {
  Tape* tape = active();
  if (tape == nullptr) return false;
  std::vector<bool> input_tracked(inputs.size(), false);
  bool any = false;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    input_tracked[i] = tracked(inputs[i]);
    any = any || input_tracked[i];
  }
  if (!any) return false;
  output->tape = tape;
  tape->records_.push_back(Record{op, std::move(inputs), std::move(input_tracked), output, std::move(backward_fn)});
  return true;
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw std::logic_error("tape already consumed by a previous backward()");
  if (loss.size() != 1) {
    throw std::invalid_argument("backward requires a scalar loss, got " + shape_str(loss.shape()));
  }
  if (loss.node()->tape != this) {
    throw std::invalid_argument("loss was not produced on this tape");
  }
  consumed_ = true;
  detail::grad_buffer(loss.node())[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // branch that never fed the loss
    it->backward(*it);
  }
}

}  // namespace cvgl
