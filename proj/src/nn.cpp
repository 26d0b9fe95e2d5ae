#include "ganf/nn.hpp"

#include <cmath>
#include <numeric>

namespace ganf {

namespace {

double norm2(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

// Divides by the L2 norm; a zero vector means the weight has no range.
void normalize_in_place(std::vector<double>& x, const char* what) {
  const double n = norm2(x);
  if (!(n > 0.0)) throw NumericError(std::string("spectral_normalize: ") + what + " collapsed to zero");
  for (double& v : x) v /= n;
}

}  // namespace

// ---- FixedKernel -----------------------------------------------------------

FixedKernel::FixedKernel() : FixedKernel(2, 2, {0.25, 0.25, 0.25, 0.25}) {}

FixedKernel::FixedKernel(std::size_t height, std::size_t width, std::vector<double> coefficients)
    : height_(height), width_(width), coefficients_(std::move(coefficients)) {
  if (height_ == 0 || width_ == 0 || coefficients_.size() != height_ * width_) {
    throw ShapeError("FixedKernel: need " + std::to_string(height_ * width_) + " coefficients, got " +
                     std::to_string(coefficients_.size()));
  }
  const double total = std::accumulate(coefficients_.begin(), coefficients_.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("FixedKernel: coefficients must sum to 1, got " + std::to_string(total));
  }
}

Tensor FixedKernel::as_conv_weight(std::size_t channels) const {
  std::vector<double> w(channels * channels * height_ * width_, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    std::copy(coefficients_.begin(), coefficients_.end(),
              w.begin() + static_cast<std::ptrdiff_t>((c * channels + c) * height_ * width_));
  }
  return Tensor::from({channels, channels, height_, width_}, std::move(w));
}

Tensor fixed_smooth(const Tensor& input, const FixedKernel& kernel) {
  if (!input.defined() || input.rank() != 4) throw ShapeError("fixed_smooth: input must have rank 4");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t kh = kernel.height(), kw = kernel.width();
  if (h < kh || w < kw) {
    throw ShapeError("fixed_smooth: spatial size " + shape_str(input.shape()) + " smaller than kernel");
  }
  const std::size_t oh = h - kh + 1, ow = w - kw + 1;
  std::vector<double> out(n * c * oh * ow, 0.0);
  const auto x = input.data();
  for (std::size_t p = 0; p < n * c; ++p) {
    for (std::size_t ky = 0; ky < kh; ++ky) {
      for (std::size_t kx = 0; kx < kw; ++kx) {
        const double k = kernel(ky, kx);
        for (std::size_t y = 0; y < oh; ++y) {
          const double* src = x.data() + (p * h + y + ky) * w + kx;
          double* dst = out.data() + (p * oh + y) * ow;
          for (std::size_t xx = 0; xx < ow; ++xx) dst[xx] += k * src[xx];
        }
      }
    }
  }
  return Tensor::make_op("fixed_smooth", {n, c, oh, ow}, std::move(out), {input},
                         [=](detail::Node& self) {
                           auto& g = self.parents[0]->grad_buffer();
                           for (std::size_t p = 0; p < n * c; ++p) {
                             for (std::size_t ky = 0; ky < kh; ++ky) {
                               for (std::size_t kx = 0; kx < kw; ++kx) {
                                 const double k = kernel(ky, kx);
                                 for (std::size_t y = 0; y < oh; ++y) {
                                   double* dst = g.data() + (p * h + y + ky) * w + kx;
                                   const double* src = self.grad.data() + (p * oh + y) * ow;
                                   for (std::size_t xx = 0; xx < ow; ++xx) dst[xx] += k * src[xx];
                                 }
                               }
                             }
                           }
                         });
}

Tensor fixed_upsample2x(const Tensor& input, const FixedKernel& kernel) {
  if (!input.defined() || input.rank() != 4) throw ShapeError("fixed_upsample2x: input must have rank 4");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t kh = kernel.height(), kw = kernel.width();
  const std::size_t oh = 2 * h, ow = 2 * w;
  // out[y][x] = sum_{a,b} 4 k[a][b] stuffed[y-a][x-b]; stuffed is nonzero
  // only at even coordinates, where it holds input[y/2][x/2].
  std::vector<double> out(n * c * oh * ow, 0.0);
  const auto src = input.data();
  for (std::size_t p = 0; p < n * c; ++p) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (std::size_t a = 0; a < kh && a <= y; ++a) {
          if ((y - a) % 2) continue;
          for (std::size_t b = 0; b < kw && b <= x; ++b) {
            if ((x - b) % 2) continue;
            acc += 4.0 * kernel(a, b) * src[(p * h + (y - a) / 2) * w + (x - b) / 2];
          }
        }
        out[(p * oh + y) * ow + x] = acc;
      }
    }
  }
  return Tensor::make_op("fixed_upsample2x", {n, c, oh, ow}, std::move(out), {input},
                         [=](detail::Node& self) {
                           auto& g = self.parents[0]->grad_buffer();
                           for (std::size_t p = 0; p < n * c; ++p) {
                             for (std::size_t y = 0; y < oh; ++y) {
                               for (std::size_t x = 0; x < ow; ++x) {
                                 const double go = self.grad[(p * oh + y) * ow + x];
                                 for (std::size_t a = 0; a < kh && a <= y; ++a) {
                                   if ((y - a) % 2) continue;
                                   for (std::size_t b = 0; b < kw && b <= x; ++b) {
                                     if ((x - b) % 2) continue;
                                     g[(p * h + (y - a) / 2) * w + (x - b) / 2] += 4.0 * kernel(a, b) * go;
                                   }
                                 }
                               }
                             }
                           }
                         });
}

Tensor artifact_free_upsample(const Tensor& input, const Tensor& weight, const Tensor& bias,
                              const FixedKernel& fixed) {
  if (!weight.defined() || weight.rank() != 4) {
    throw ShapeError("artifact_free_upsample: weight must have rank 4");
  }
  const std::size_t kh = weight.dim(2), kw = weight.dim(3);
  if (kh != kw || kh % 2 == 0) {
    throw ShapeError("artifact_free_upsample: kernel must be square and odd, got " +
                     shape_str(weight.shape()));
  }
  Tensor up = fixed_upsample2x(input, fixed);
  return conv2d(pad_replicate(up, (kh - 1) / 2), weight, bias, 1, 0);
}

Tensor artifact_free_downsample(const Tensor& input, const Tensor& weight, const Tensor& bias,
                                const FixedKernel& fixed) {
  if (!input.defined() || input.rank() != 4) {
    throw ShapeError("artifact_free_downsample: input must have rank 4");
  }
  const std::size_t h = input.dim(2), w = input.dim(3);
  if (h % 2 || w % 2) {
    throw ShapeError("artifact_free_downsample: height and width must be even, got " +
                     shape_str(input.shape()));
  }
  if (!weight.defined() || weight.rank() != 4) {
    throw ShapeError("artifact_free_downsample: weight must have rank 4");
  }
  const std::size_t pad = (weight.dim(3) - 1) / 2;
  Tensor out = conv2d(fixed_smooth(input, fixed), weight, bias, 2, pad);
  if (out.dim(2) != h / 2 || out.dim(3) != w / 2) {
    throw ShapeError("artifact_free_downsample: kernel geometry gives " + shape_str(out.shape()) +
                     " instead of half size");
  }
  return out;
}

// ---- spectral normalization -------------------------------------------------

SpectralNormState SpectralNormState::init(const Tensor& weight, std::mt19937_64& rng) {
  const std::size_t rows = weight.dim(0);
  const std::size_t cols = weight.numel() / rows;
  SpectralNormState s;
  s.u.resize(rows);
  s.v.resize(cols);
  for (double& x : s.u) x = standard_normal(rng);
  for (double& x : s.v) x = standard_normal(rng);
  normalize_in_place(s.u, "u");
  normalize_in_place(s.v, "v");
  return s;
}

SpectralNormResult spectral_normalize(const Tensor& weight, SpectralNormState& state, int iterations) {
  if (!weight.defined() || weight.rank() < 1) throw ShapeError("spectral_normalize: undefined weight");
  const std::size_t rows = weight.dim(0);
  const std::size_t cols = weight.numel() / rows;
  if (state.u.size() != rows || state.v.size() != cols) {
    throw ShapeError("spectral_normalize: state sized for " + std::to_string(state.u.size()) + "x" +
                     std::to_string(state.v.size()) + ", weight flattens to " + std::to_string(rows) +
                     "x" + std::to_string(cols));
  }
  const auto w = weight.data();
  double frob = 0.0;
  for (double x : w) frob += x * x;
  if (frob == 0.0) throw NumericError("spectral_normalize: zero weight matrix has no spectral norm");

  if (iterations < 0) iterations = state.n_power_iterations;
  auto& u = state.u;
  auto& v = state.v;
  for (int it = 0; it < iterations; ++it) {
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = w.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) v[c] += row[c] * u[r];
    }
    normalize_in_place(v, "v");
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = w.data() + r * cols;
      double acc = 0.0;
      for (std::size_t c = 0; c < cols; ++c) acc += row[c] * v[c];
      u[r] = acc;
    }
    normalize_in_place(u, "u");
  }

  double sigma = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * v[c];
    sigma += u[r] * acc;
  }
  if (!(sigma > 0.0)) throw NumericError("spectral_normalize: non-positive sigma estimate");

  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] / sigma;
  Tensor normalized = Tensor::make_op(
      "spectral_normalize", weight.shape(), std::move(out), {weight},
      [sigma, rows, cols, u = u, v = v](detail::Node& self) {
        // d(W/sigma)/dW with sigma = u^T W v:  G/sigma - <G,W>/sigma^2 u v^T
        auto& p = *self.parents[0];
        double gw = 0.0;
        for (std::size_t i = 0; i < p.data.size(); ++i) gw += self.grad[i] * p.data[i];
        const double coef = gw / (sigma * sigma);
        auto& g = p.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            g[i] += self.grad[i] / sigma - coef * u[r] * v[c];
          }
        }
      });
  return {std::move(normalized), sigma};
}

// ---- losses ----------------------------------------------------------------

Tensor hinge_d_loss(const Tensor& real_scores, const Tensor& fake_scores) {
  if (!real_scores.defined() || !fake_scores.defined()) {
    throw ShapeError("hinge_d_loss: empty score tensor");
  }
  Tensor real_term = mean(relu(add_scalar(scale(real_scores, -1.0), 1.0)));
  Tensor fake_term = mean(relu(add_scalar(fake_scores, 1.0)));
  return add(real_term, fake_term);
}

Tensor hinge_g_loss(const Tensor& fake_scores) {
  if (!fake_scores.defined()) throw ShapeError("hinge_g_loss: empty score tensor");
  return scale(mean(fake_scores), -1.0);
}

// ---- initialisation --------------------------------------------------------

double standard_normal(std::mt19937_64& rng) {
  // Box-Muller on two 53-bit uniforms; u1 is kept away from zero.
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

Tensor random_normal(Shape shape, double stddev, std::mt19937_64& rng, bool requires_grad) {
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = stddev * standard_normal(rng);
  return Tensor::from(std::move(shape), std::move(values), requires_grad);
}

// ---- ConvLayer -------------------------------------------------------------

void LayerConfig::validate() const {
  if (in_channels == 0 || out_channels == 0 || kernel_size == 0) {
    throw std::invalid_argument("LayerConfig: channels and kernel_size must be positive");
  }
  if (stride != 1 && stride != 2) throw std::invalid_argument("LayerConfig: stride must be 1 or 2");
  if (upsample && stride != 2) throw std::invalid_argument("LayerConfig: upsampling layers use stride 2");
  if ((artifact_free || upsample) && kernel_size % 2 == 0) {
    throw std::invalid_argument("LayerConfig: resampling layers need an odd kernel_size");
  }
}

std::size_t LayerConfig::effective_padding() const {
  return padding >= 0 ? static_cast<std::size_t>(padding) : (kernel_size - 1) / 2;
}

ConvLayer::ConvLayer(const LayerConfig& config, std::mt19937_64& rng, double init_std)
    : config_(config) {
  config_.validate();
  const std::size_t k = config_.kernel_size;
  Shape shape = config_.upsample && !config_.artifact_free
                    ? Shape{config_.in_channels, config_.out_channels, k, k}
                    : Shape{config_.out_channels, config_.in_channels, k, k};
  weight_ = random_normal(std::move(shape), init_std, rng, true);
  if (config_.bias) bias_ = Tensor::zeros({config_.out_channels}, true);
  if (config_.use_spectral_norm) sn_ = SpectralNormState::init(weight_, rng);
}

Tensor ConvLayer::effective_weight(int power_iterations) {
  if (!config_.use_spectral_norm) return weight_;
  return spectral_normalize(weight_, sn_, power_iterations).weight;
}

Tensor ConvLayer::forward(const Tensor& input, const Tensor& weight) const {
  const std::size_t k = config_.kernel_size;
  if (config_.stride == 1) return conv2d(input, weight, bias_, 1, config_.effective_padding());
  if (config_.upsample) {
    if (config_.artifact_free) return artifact_free_upsample(input, weight, bias_, fixed_);
    // Transposed conv with the output window of padding (k-1)/2 and
    // output_padding 1, giving exactly 2H x 2W.
    Tensor full = conv2d_transposed(input, weight, 2);
    const std::size_t h = input.dim(2), w = input.dim(3);
    Tensor cropped = crop2d(full, (k - 1) / 2, (k - 1) / 2, 2 * h, 2 * w);
    return bias_.defined() ? add_channel_bias(cropped, bias_) : cropped;
  }
  if (config_.artifact_free) return artifact_free_downsample(input, weight, bias_, fixed_);
  return conv2d(input, weight, bias_, 2, config_.effective_padding());
}

void ConvLayer::collect_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".weight", weight_});
  if (bias_.defined()) out.push_back({prefix + ".bias", bias_});
}

// ---- instance norm / residual ----------------------------------------------

InstanceNormParams InstanceNormParams::create(std::size_t channels) {
  return {Tensor::full({channels}, 1.0, true), Tensor::zeros({channels}, true)};
}

void InstanceNormParams::collect_parameters(const std::string& prefix,
                                            std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

ResidualBlockParams ResidualBlockParams::create(std::size_t channels, std::mt19937_64& rng,
                                                double init_std) {
  ResidualBlockParams p;
  p.conv1 = random_normal({channels, channels, 3, 3}, init_std, rng, true);
  p.norm1 = InstanceNormParams::create(channels);
  p.conv2 = random_normal({channels, channels, 3, 3}, init_std, rng, true);
  p.norm2 = InstanceNormParams::create(channels);
  return p;
}

void ResidualBlockParams::collect_parameters(const std::string& prefix,
                                             std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".conv1.weight", conv1});
  norm1.collect_parameters(prefix + ".norm1", out);
  out.push_back({prefix + ".conv2.weight", conv2});
  norm2.collect_parameters(prefix + ".norm2", out);
}

Tensor residual_block(const Tensor& input, const ResidualBlockParams& params) {
  Tensor h = relu(params.norm1.forward(conv2d(input, params.conv1, 1, 1)));
  h = params.norm2.forward(conv2d(h, params.conv2, 1, 1));
  return add(input, h);
}

}  // namespace ganf
