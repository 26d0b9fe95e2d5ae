#include "ganf/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace ganf {

namespace {

thread_local bool g_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  require(t.defined(), std::string(op) + ": " + what + " is undefined");
  if (t.rank() != rank) {
    std::ostringstream os;
    os << op << ": " << what << " must have rank " << rank << ", got shape " << shape_str(t.shape());
    throw ShapeError(os.str());
  }
}

// Unfolds [C,H,W] into a [C*Kh*Kw, Ho*Wo] matrix of zero-padded patches.
void im2col(const double* x, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
            std::size_t out_h, std::size_t out_w, double* col) {
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        double* dst = col + ((c * kh + ky) * kw + kx) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          double* row = dst + oy * out_w;
          if (iy < 0 || iy >= h) {
            std::fill(row, row + out_w, 0.0);
            continue;
          }
          const double* src = x + (c * height + static_cast<std::size_t>(iy)) * width;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const auto ix =
                static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            row[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds patches back into [C,H,W].
void col2im(const double* col, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
            std::size_t out_h, std::size_t out_w, double* x) {
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const double* src = col + ((c * kh + ky) * kw + kx) * plane;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= h) continue;
          double* dst = x + (c * height + static_cast<std::size_t>(iy)) * width;
          const double* row = src + oy * out_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const auto ix =
                static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < w) dst[ix] += row[ox];
          }
        }
      }
    }
  }
}

void check_finite(const char* op, const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + " produced a non-finite value");
  }
}

bool is_scalar(const Tensor& t) { return t.numel() == 1; }

Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.defined() && b.defined(), std::string(op) + ": undefined operand");
  if (a.shape() == b.shape()) return a.shape();
  if (is_scalar(b)) return a.shape();
  if (is_scalar(a)) return b.shape();
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                   shape_str(b.shape()));
}

// Accumulates `g` (full output size) into a parent that is either full size
// or a broadcast scalar.
void accumulate_into(detail::Node& parent, const std::vector<double>& g, double factor) {
  if (!parent.requires_grad) return;
  auto& pg = parent.grad_buffer();
  if (pg.size() == g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) pg[i] += factor * g[i];
  } else {
    double total = 0.0;
    for (double v : g) total += v;
    pg[0] += factor * total;
  }
}

template <typename F>
std::vector<double> map_values(std::span<const double> in, F f) {
  std::vector<double> out(in.size());
  std::transform(in.begin(), in.end(), out.begin(), f);
  return out;
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
                     " values, got " + std::to_string(values.size()));
  }
  check_finite("tensor construction", values);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::make_op(const char* op, Shape shape, std::vector<double> values,
                       std::vector<Tensor> parents, std::function<void(detail::Node&)> backward) {
  check_finite(op, values);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->op = op;
  const bool track = g_grad_enabled && backward &&
                     std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor& p) { return p.defined() && p.requires_grad(); });
  if (track) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_);
  }
  return Tensor(std::move(node));
}

detail::Node& Tensor::node() const {
  if (!node_) throw std::logic_error("access to an undefined tensor");
  return *node_;
}

std::size_t Tensor::dim(std::size_t i) const {
  if (i >= rank()) throw ShapeError("dimension index " + std::to_string(i) + " out of range for " +
                                    shape_str(shape()));
  return shape()[i];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
  return node().data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& s = shape();
  if (index.size() != s.size()) throw ShapeError("index rank does not match " + shape_str(s));
  std::size_t flat = 0;
  std::size_t i = 0;
  for (std::size_t v : index) {
    if (v >= s[i]) throw ShapeError("index out of range for " + shape_str(s));
    flat = flat * s[i] + v;
    ++i;
  }
  return node().data[flat];
}

std::span<const double> Tensor::grad() const {
  auto& n = node();
  if (n.grad.size() != n.data.size()) n.grad.assign(n.data.size(), 0.0);
  return n.grad;
}

void Tensor::zero_grad() {
  auto& n = node();
  n.grad.assign(n.data.size(), 0.0);
}

Tensor Tensor::detach() const { return from(shape(), node().data, false); }

Tensor Tensor::clone() const { return from(shape(), node().data, requires_grad()); }

void Tensor::backward() const {
  if (numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " + shape_str(shape()));
  }
  if (!requires_grad()) throw std::logic_error("backward: loss does not depend on any tensor requiring grad");
  Tape::record(*this).replay();
}

// ---- Tape ------------------------------------------------------------------

Tape Tape::record(const Tensor& root) {
  Tape tape;
  tape.root_ = &root.node();
  std::vector<detail::Node*> postorder;
  std::unordered_set<detail::Node*> seen;
  // (node, next parent index) frames for an iterative DFS.
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(tape.root_, 0);
  seen.insert(tape.root_);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent && parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      if (node->backward || node == tape.root_) postorder.push_back(node);
      stack.pop_back();
    }
  }
  tape.order_.assign(postorder.rbegin(), postorder.rend());
  return tape;
}

void Tape::replay() {
  for (auto* node : order_) {
    if (node->backward) node->grad.assign(node->data.size(), 0.0);
  }
  auto& root_grad = root_->grad_buffer();
  root_grad[0] += 1.0;
  for (auto* node : order_) {
    if (node->backward) node->backward(*node);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// ---- convolution -----------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  require_rank(input, 4, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  require(stride >= 1, "conv2d: stride must be positive");
  const std::size_t n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t co = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(1) != ci) {
    throw ShapeError("conv2d: input channels " + std::to_string(ci) + " != weight in-channels " +
                     std::to_string(weight.dim(1)));
  }
  if (h + 2 * pad < kh) {
    throw ShapeError("conv2d: padded height " + std::to_string(h + 2 * pad) + " < kernel height " +
                     std::to_string(kh));
  }
  if (w + 2 * pad < kw) {
    throw ShapeError("conv2d: padded width " + std::to_string(w + 2 * pad) + " < kernel width " +
                     std::to_string(kw));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != co)) {
    throw ShapeError("conv2d: bias must have shape [" + std::to_string(co) + "], got " +
                     shape_str(bias.shape()));
  }
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
  const std::size_t ow = (w + 2 * pad - kw) / stride + 1;
  const std::size_t k = ci * kh * kw, plane = oh * ow;

  std::vector<double> out(n * co * plane);
  std::vector<double> col(k * plane);
  ConstMapMat wm(weight.data().data(), co, k);
  for (std::size_t b = 0; b < n; ++b) {
    im2col(input.data().data() + b * ci * h * w, ci, h, w, kh, kw, stride, pad, oh, ow, col.data());
    MapMat om(out.data() + b * co * plane, co, plane);
    om.noalias() = wm * ConstMapMat(col.data(), k, plane);
    if (bias.defined()) {
      for (std::size_t c = 0; c < co; ++c) om.row(c).array() += bias.data()[c];
    }
  }

  const bool has_bias = bias.defined();
  return Tensor::make_op(
      "conv2d", {n, co, oh, ow}, std::move(out), {input, weight, bias},
      [=](detail::Node& self) {
        auto& in = *self.parents[0];
        auto& wt = *self.parents[1];
        ConstMapMat wmat(wt.data.data(), co, k);
        std::vector<double> column(k * plane);
        for (std::size_t b = 0; b < n; ++b) {
          ConstMapMat gout(self.grad.data() + b * co * plane, co, plane);
          if (in.requires_grad) {
            RowMat dcol = wmat.transpose() * gout;
            col2im(dcol.data(), ci, h, w, kh, kw, stride, pad, oh, ow,
                   in.grad_buffer().data() + b * ci * h * w);
          }
          if (wt.requires_grad) {
            im2col(in.data.data() + b * ci * h * w, ci, h, w, kh, kw, stride, pad, oh, ow, column.data());
            MapMat(wt.grad_buffer().data(), co, k).noalias() +=
                gout * ConstMapMat(column.data(), k, plane).transpose();
          }
          if (has_bias && self.parents[2]->requires_grad) {
            auto& bg = self.parents[2]->grad_buffer();
            for (std::size_t c = 0; c < co; ++c) bg[c] += gout.row(c).sum();
          }
        }
      });
}

Tensor conv2d_transposed(const Tensor& input, const Tensor& weight, std::size_t stride) {
  require_rank(input, 4, "conv2d_transposed", "input");
  require_rank(weight, 4, "conv2d_transposed", "weight");
  require(stride >= 1, "conv2d_transposed: stride must be positive");
  const std::size_t n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t co = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  if (weight.dim(0) != ci) {
    throw ShapeError("conv2d_transposed: input channels " + std::to_string(ci) +
                     " != weight in-channels " + std::to_string(weight.dim(0)));
  }
  const std::size_t oh = (h - 1) * stride + kh, ow = (w - 1) * stride + kw;
  const std::size_t k = co * kh * kw, plane = h * w, out_plane = oh * ow;

  std::vector<double> out(n * co * out_plane, 0.0);
  ConstMapMat wm(weight.data().data(), ci, k);
  for (std::size_t b = 0; b < n; ++b) {
    RowMat col = wm.transpose() * ConstMapMat(input.data().data() + b * ci * plane, ci, plane);
    col2im(col.data(), co, oh, ow, kh, kw, stride, 0, h, w, out.data() + b * co * out_plane);
  }

  return Tensor::make_op(
      "conv2d_transposed", {n, co, oh, ow}, std::move(out), {input, weight},
      [=](detail::Node& self) {
        auto& in = *self.parents[0];
        auto& wt = *self.parents[1];
        std::vector<double> column(k * plane);
        for (std::size_t b = 0; b < n; ++b) {
          im2col(self.grad.data() + b * co * out_plane, co, oh, ow, kh, kw, stride, 0, h, w,
                 column.data());
          ConstMapMat gcol(column.data(), k, plane);
          if (in.requires_grad) {
            MapMat(in.grad_buffer().data() + b * ci * plane, ci, plane).noalias() +=
                ConstMapMat(wt.data.data(), ci, k) * gcol;
          }
          if (wt.requires_grad) {
            MapMat(wt.grad_buffer().data(), ci, k).noalias() +=
                ConstMapMat(in.data.data() + b * ci * plane, ci, plane) * gcol.transpose();
          }
        }
      });
}

Tensor add_channel_bias(const Tensor& input, const Tensor& bias) {
  require_rank(input, 4, "add_channel_bias", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  require(bias.defined() && bias.rank() == 1 && bias.dim(0) == c,
          "add_channel_bias: bias must have shape [" + std::to_string(c) + "]");
  std::vector<double> out(input.data().begin(), input.data().end());
  for (std::size_t p = 0; p < n * c; ++p) {
    for (std::size_t i = 0; i < hw; ++i) out[p * hw + i] += bias.data()[p % c];
  }
  return Tensor::make_op("add_channel_bias", input.shape(), std::move(out), {input, bias},
                         [=](detail::Node& self) {
                           auto& in = *self.parents[0];
                           auto& b = *self.parents[1];
                           for (std::size_t p = 0; p < n * c; ++p) {
                             for (std::size_t i = 0; i < hw; ++i) {
                               const double g = self.grad[p * hw + i];
                               if (in.requires_grad) in.grad_buffer()[p * hw + i] += g;
                               if (b.requires_grad) b.grad_buffer()[p % c] += g;
                             }
                           }
                         });
}

// ---- spatial ---------------------------------------------------------------

Tensor crop2d(const Tensor& input, std::size_t top, std::size_t left, std::size_t height,
              std::size_t width) {
  require_rank(input, 4, "crop2d", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (top + height > h || left + width > w || height == 0 || width == 0) {
    throw ShapeError("crop2d: window out of bounds for " + shape_str(input.shape()));
  }
  std::vector<double> out(n * c * height * width);
  const auto& src = input.data();
  for (std::size_t p = 0; p < n * c; ++p) {
    for (std::size_t y = 0; y < height; ++y) {
      const double* row = src.data() + (p * h + top + y) * w + left;
      std::copy(row, row + width, out.begin() + static_cast<std::ptrdiff_t>((p * height + y) * width));
    }
  }
  return Tensor::make_op("crop2d", {n, c, height, width}, std::move(out), {input},
                         [=](detail::Node& self) {
                           auto& g = self.parents[0]->grad_buffer();
                           for (std::size_t p = 0; p < n * c; ++p) {
                             for (std::size_t y = 0; y < height; ++y) {
                               for (std::size_t x = 0; x < width; ++x) {
                                 g[(p * h + top + y) * w + left + x] +=
                                     self.grad[(p * height + y) * width + x];
                               }
                             }
                           }
                         });
}

Tensor pad_replicate(const Tensor& input, std::size_t pad) {
  require_rank(input, 4, "pad_replicate", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t ph = h + 2 * pad, pw = w + 2 * pad;
  auto source = [=](std::size_t y, std::size_t x) {
    const std::size_t sy = std::min(h - 1, y < pad ? 0 : y - pad);
    const std::size_t sx = std::min(w - 1, x < pad ? 0 : x - pad);
    return sy * w + sx;
  };
  std::vector<double> out(n * c * ph * pw);
  const auto& src = input.data();
  for (std::size_t p = 0; p < n * c; ++p) {
    for (std::size_t y = 0; y < ph; ++y) {
      for (std::size_t x = 0; x < pw; ++x) out[(p * ph + y) * pw + x] = src[p * h * w + source(y, x)];
    }
  }
  return Tensor::make_op("pad_replicate", {n, c, ph, pw}, std::move(out), {input},
                         [=](detail::Node& self) {
                           auto& g = self.parents[0]->grad_buffer();
                           for (std::size_t p = 0; p < n * c; ++p) {
                             for (std::size_t y = 0; y < ph; ++y) {
                               for (std::size_t x = 0; x < pw; ++x) {
                                 g[p * h * w + source(y, x)] += self.grad[(p * ph + y) * pw + x];
                               }
                             }
                           }
                         });
}

Tensor upsample_nearest2x(const Tensor& input) {
  require_rank(input, 4, "upsample_nearest2x", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oh = 2 * h, ow = 2 * w;
  std::vector<double> out(n * c * oh * ow);
  const auto& src = input.data();
  for (std::size_t p = 0; p < n * c; ++p) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) out[(p * oh + y) * ow + x] = src[(p * h + y / 2) * w + x / 2];
    }
  }
  return Tensor::make_op("upsample_nearest2x", {n, c, oh, ow}, std::move(out), {input},
                         [=](detail::Node& self) {
                           auto& g = self.parents[0]->grad_buffer();
                           for (std::size_t p = 0; p < n * c; ++p) {
                             for (std::size_t y = 0; y < oh; ++y) {
                               for (std::size_t x = 0; x < ow; ++x) {
                                 g[(p * h + y / 2) * w + x / 2] += self.grad[(p * oh + y) * ow + x];
                               }
                             }
                           }
                         });
}

// ---- elementwise -----------------------------------------------------------

namespace {

template <typename Fwd, typename DA, typename DB>
Tensor binary_op(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  Shape shape = broadcast_shape(a, b, op);
  const std::size_t count = shape_numel(shape);
  const bool a_scalar = a.numel() != count, b_scalar = b.numel() != count;
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = fwd(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
  return Tensor::make_op(op, std::move(shape), std::move(out), {a, b}, [=](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    std::vector<double> g(count);
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < count; ++i) {
        g[i] = self.grad[i] * da(pa.data[a_scalar ? 0 : i], pb.data[b_scalar ? 0 : i]);
      }
      accumulate_into(pa, g, 1.0);
    }
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < count; ++i) {
        g[i] = self.grad[i] * db(pa.data[a_scalar ? 0 : i], pb.data[b_scalar ? 0 : i]);
      }
      accumulate_into(pb, g, 1.0);
    }
  });
}

template <typename Fwd, typename Deriv>
Tensor unary_op(const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
  require(a.defined(), std::string(op) + ": undefined operand");
  auto out = map_values(a.data(), fwd);
  return Tensor::make_op(op, a.shape(), std::move(out), {a}, [=](detail::Node& self) {
    auto& p = *self.parents[0];
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(p.data[i], self.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary_op(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary_op(
      "add_scalar", a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary_op(
      "leaky_relu", a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sum(const Tensor& a) {
  require(a.defined(), "sum: undefined operand");
  double total = 0.0;
  for (double v : a.data()) total += v;
  return Tensor::make_op("sum", {1}, {total}, {a}, [](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  require(a.defined(), "mean: undefined operand");
  double total = 0.0;
  for (double v : a.data()) total += v;
  const double count = static_cast<double>(a.numel());
  return Tensor::make_op("mean", {1}, {total / count}, {a}, [count](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    const double share = self.grad[0] / count;
    for (double& v : g) v += share;
  });
}

Tensor l1_distance(const Tensor& a, const Tensor& b) {
  if (!a.defined() || !b.defined() || a.shape() != b.shape()) {
    throw ShapeError("l1_distance: shape mismatch " + (a.defined() ? shape_str(a.shape()) : "[]") +
                     " vs " + (b.defined() ? shape_str(b.shape()) : "[]"));
  }
  const auto av = a.data();
  const auto bv = b.data();
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) total += std::abs(av[i] - bv[i]);
  const double count = static_cast<double>(av.size());
  return Tensor::make_op("l1_distance", {1}, {total / count}, {a, b}, [count](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const double share = self.grad[0] / count;
    for (std::size_t i = 0; i < pa.data.size(); ++i) {
      const double d = pa.data[i] - pb.data[i];
      const double s = d > 0.0 ? share : (d < 0.0 ? -share : 0.0);
      if (pa.requires_grad) pa.grad_buffer()[i] += s;
      if (pb.requires_grad) pb.grad_buffer()[i] -= s;
    }
  });
}

// ---- normalization ---------------------------------------------------------

Tensor instance_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank(input, 4, "instance_norm", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  require(hw >= 2, "instance_norm: needs at least 2 spatial elements, got shape " +
                       shape_str(input.shape()));
  require(gamma.defined() && gamma.numel() == c,
          "instance_norm: gamma must have " + std::to_string(c) + " entries");
  require(beta.defined() && beta.numel() == c,
          "instance_norm: beta must have " + std::to_string(c) + " entries");
  require(eps > 0.0, "instance_norm: eps must be positive");

  const auto x = input.data();
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(n * c);
  std::vector<double> out(x.size());
  for (std::size_t p = 0; p < n * c; ++p) {
    const double* slice = x.data() + p * hw;
    double m = 0.0;
    for (std::size_t i = 0; i < hw; ++i) m += slice[i];
    m /= static_cast<double>(hw);
    double var = 0.0;
    for (std::size_t i = 0; i < hw; ++i) var += (slice[i] - m) * (slice[i] - m);
    var /= static_cast<double>(hw);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[p] = is;
    const double g = gamma.data()[p % c], b = beta.data()[p % c];
    for (std::size_t i = 0; i < hw; ++i) {
      xhat[p * hw + i] = (slice[i] - m) * is;
      out[p * hw + i] = g * xhat[p * hw + i] + b;
    }
  }

  return Tensor::make_op(
      "instance_norm", input.shape(), std::move(out), {input, gamma, beta},
      [n, c, hw, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& self) {
        auto& in = *self.parents[0];
        auto& gm = *self.parents[1];
        auto& bt = *self.parents[2];
        const double count = static_cast<double>(hw);
        for (std::size_t p = 0; p < n * c; ++p) {
          const std::size_t ch = p % c;
          const double* g = self.grad.data() + p * hw;
          const double* xh = xhat.data() + p * hw;
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t i = 0; i < hw; ++i) {
            sum_g += g[i];
            sum_gx += g[i] * xh[i];
          }
          if (gm.requires_grad) gm.grad_buffer()[ch] += sum_gx;
          if (bt.requires_grad) bt.grad_buffer()[ch] += sum_g;
          if (in.requires_grad) {
            const double gam = gm.data[ch];
            auto& ig = in.grad_buffer();
            const double mean_g = sum_g / count, mean_gx = sum_gx / count;
            for (std::size_t i = 0; i < hw; ++i) {
              ig[p * hw + i] += gam * inv_std[p] * (g[i] - mean_g - xh[i] * mean_gx);
            }
          }
        }
      });
}

}  // namespace ganf
