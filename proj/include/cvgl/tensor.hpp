#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace cvgl {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

class Tape;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;    // empty until backward reaches this node
  bool requires_grad = false;  // user-marked leaf
  const Tape* tape = nullptr;  // tape whose op produced this node, if any
};

using NodePtr = std::shared_ptr<Node>;

}  // namespace detail

/// Dense row-major double tensor. A Tensor is an immutable value: operations
/// allocate fresh outputs and never write through their inputs. Handles are
/// cheap to copy (shared node). The only sanctioned mutation is set_data(),
/// which the optimizer and the checkpoint loader use to update leaf
/// parameters between tapes.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  /// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)), drawn from the
  /// given substream seed. requires_grad defaults on: this is the parameter
  /// initializer.
  static Tensor glorot_uniform(Shape shape, int fan_in, int fan_out, std::uint64_t seed);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return node_->data.size(); }

  const std::vector<double>& data() const { return node_->data; }

  double value() const;  // single-element tensors only
  double at(int i) const;
  double at(int i, int j) const;
  double at(int i, int j, int k) const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<double>& grad() const;
  void clear_grad() { node_->grad.clear(); }

  /// Replaces the values of a leaf tensor in place (shape must match).
  /// Must not be called while a tape referencing this tensor is alive.
  void set_data(const std::vector<double>& values);

  /// Identity of the underlying storage; two handles to one node compare equal.
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  detail::NodePtr node() const { return node_; }
  static Tensor wrap(detail::NodePtr n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  detail::NodePtr node_;
};

/// Ordered record of executed primitive operations. Constructing a Tape makes
/// it the active tape for the current thread; ops whose inputs participate in
/// gradient tracking append themselves in execution order, which is already
/// topological. backward() walks the record once, in reverse.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
  /// participating tensor. loss must be a scalar produced on this tape.
  void backward(const Tensor& loss);

  std::size_t num_ops() const { return records_.size(); }

  static Tape* active();

  struct Record {
    const char* op;
    std::vector<detail::NodePtr> inputs;
    std::vector<bool> input_tracked;  // accumulate into inputs[i]?
    detail::NodePtr output;
    std::function<void(const Record&)> backward;
  };

  /// Internal: called by ops. Returns true if the op was recorded (i.e. some
  /// input participates in gradient tracking on the active tape).
  static bool maybe_record(const char* op, std::vector<detail::NodePtr> inputs,
                           const detail::NodePtr& output,
                           std::function<void(const Record&)> backward_fn);

 private:
  std::vector<Record> records_;
  bool consumed_ = false;
};

/// True if ops on this tensor should be recorded: a grad-marked leaf or a
/// value produced on the currently active tape.
bool tracked(const detail::NodePtr& n);

namespace detail {

void check_finite(const std::vector<double>& values, const char* what);

/// Allocates (zero-filled) the grad buffer if absent and returns it.
std::vector<double>& grad_buffer(const NodePtr& n);

}  // namespace detail

}  // namespace cvgl
