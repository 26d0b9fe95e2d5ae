#pragma once

// Dense float64 tensors with reverse-mode automatic differentiation.
//
// Every operation that sees at least one input with requires_grad (and runs
// while gradient recording is enabled) links its output to its inputs and
// stores a closure that pushes the output gradient back into them.  Calling
// backward() on a scalar builds a Tape (the reachable operations in reverse
// topological order) and replays it once.  Graphs are kept alive by the
// tensors that reference them, so a graph can be walked more than once;
// leaf gradients accumulate until zero_grad() is called.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ganf {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad, accumulates into parents' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  // Builds an operation result.  `backward` may be empty when no parent
  // requires grad; in that case the parents are dropped.
  static Tensor make_op(const char* op, Shape shape, std::vector<double> values,
                        std::vector<Tensor> parents, std::function<void(detail::Node&)> backward);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node().shape; }
  std::size_t dim(std::size_t i) const;
  std::size_t rank() const { return node().shape.size(); }
  std::size_t numel() const { return node().data.size(); }

  std::span<const double> data() const { return node().data; }
  // In-place access for parameters and optimizer updates only.
  std::span<double> mutable_data() { return node().data; }
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return node().requires_grad; }
  bool has_grad() const { return node().grad.size() == node().data.size(); }
  // Zero-filled view when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  void zero_grad();

  // Same values, no history, no grad requirement.
  Tensor detach() const;
  Tensor clone() const;

  void backward() const;

  detail::Node& node() const;
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Reverse topological order of the operations reachable from a root.
class Tape {
 public:
  static Tape record(const Tensor& root);
  // Seeds d(root)/d(root) = 1 and runs every recorded closure once.
  void replay();
  std::size_t size() const { return order_.size(); }
  const std::vector<detail::Node*>& order() const { return order_; }

 private:
  std::vector<detail::Node*> order_;
  detail::Node* root_ = nullptr;
};

// Gradient recording is per thread, so independent training sessions can
// run on separate threads.
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

// ---- convolution -----------------------------------------------------------

// Cross-correlation with zero padding.  input [N,Ci,H,W], weight
// [Co,Ci,Kh,Kw], optional bias [Co].
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad);
inline Tensor conv2d(const Tensor& input, const Tensor& weight, std::size_t stride = 1,
                     std::size_t pad = 0) {
  return conv2d(input, weight, Tensor{}, stride, pad);
}

// Adjoint of conv2d without padding: input [N,Ci,H,W], weight [Ci,Co,Kh,Kw],
// output [N,Co,(H-1)*stride+Kh,(W-1)*stride+Kw].
Tensor conv2d_transposed(const Tensor& input, const Tensor& weight, std::size_t stride);

// Adds bias[c] to every element of channel c of an [N,C,H,W] tensor.
Tensor add_channel_bias(const Tensor& input, const Tensor& bias);

// ---- spatial resampling / padding ------------------------------------------

Tensor crop2d(const Tensor& input, std::size_t top, std::size_t left, std::size_t height,
              std::size_t width);
// Edge-replicating padding on all four sides.
Tensor pad_replicate(const Tensor& input, std::size_t pad);
// Zero-order hold: each pixel becomes a 2x2 block.
Tensor upsample_nearest2x(const Tensor& input);

// ---- elementwise and reductions --------------------------------------------
//
// Binary ops require identical shapes, or one operand with a single element
// (scalar broadcast).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor tanh(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// mean(|a - b|)
Tensor l1_distance(const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

// ---- normalization ---------------------------------------------------------

// Per-(n,c) standardization over H*W (biased variance), then gamma*x+beta.
Tensor instance_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                     double eps = 1e-5);

}  // namespace ganf
