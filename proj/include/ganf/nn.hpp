#pragma once

// Layers for checkerboard-free resampling, spectral normalization and hinge
// losses, built on the autodiff tensors.

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "ganf/tensor.hpp"

namespace ganf {

// Non-trainable smoothing kernel inserted into every resampling path.
// Coefficients are row-major and must sum to 1.
class FixedKernel {
 public:
  // 2x2 uniform (all 0.25): pairs with x2 resampling as a zero-order hold.
  FixedKernel();
  FixedKernel(std::size_t height, std::size_t width, std::vector<double> coefficients);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  const std::vector<double>& coefficients() const { return coefficients_; }
  double operator()(std::size_t y, std::size_t x) const { return coefficients_[y * width_ + x]; }

  // Dense [C,C,Kh,Kw] weight applying the kernel to each channel separately.
  Tensor as_conv_weight(std::size_t channels) const;

  bool operator==(const FixedKernel&) const = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<double> coefficients_;
};

// Per-channel "valid" correlation with the fixed kernel (stride 1, no
// padding): [N,C,H,W] -> [N,C,H-Kh+1,W-Kw+1].  No gradient reaches the kernel.
Tensor fixed_smooth(const Tensor& input, const FixedKernel& kernel);

// Zero-stuffs x2 and correlates each channel with 4*kernel.  With the default
// 2x2 kernel this is exactly nearest-neighbour (zero-order hold) upsampling.
Tensor fixed_upsample2x(const Tensor& input, const FixedKernel& kernel);

// x2 upsampling that cannot imprint a period-2 pattern: fixed-kernel
// upsampling, edge-replicate padding, then a trainable stride-1 convolution.
// Constant inputs produce bitwise-constant outputs for any weights.
Tensor artifact_free_upsample(const Tensor& input, const Tensor& weight, const Tensor& bias,
                              const FixedKernel& fixed = FixedKernel());

// x2 downsampling: fixed smoothing (stride 1) then a trainable stride-2
// convolution with zero padding (Kw-1)/2.  Requires even H and W.
Tensor artifact_free_downsample(const Tensor& input, const Tensor& weight, const Tensor& bias,
                                const FixedKernel& fixed = FixedKernel());

// Power-iteration state for one weight, flattened to (out) x (rest).
struct SpectralNormState {
  std::vector<double> u;
  std::vector<double> v;
  int n_power_iterations = 1;

  // Random unit vectors sized for `weight`.
  static SpectralNormState init(const Tensor& weight, std::mt19937_64& rng);
};

struct SpectralNormResult {
  Tensor weight;  // weight / sigma, differentiable w.r.t. the raw weight
  double sigma;
};

// Runs `iterations` power-iteration steps (state.n_power_iterations when
// negative), warm-starting from and updating state.u / state.v, then divides
// by sigma = u^T W v.  u and v are treated as constants for the gradient.
SpectralNormResult spectral_normalize(const Tensor& weight, SpectralNormState& state,
                                      int iterations = -1);

// mean(max(0, 1 - real)) + mean(max(0, 1 + fake))
Tensor hinge_d_loss(const Tensor& real_scores, const Tensor& fake_scores);
// -mean(fake)
Tensor hinge_g_loss(const Tensor& fake_scores);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// N(0, std) initialisation driven by the engine only, so results do not
// depend on the standard library's distribution implementations.
double standard_normal(std::mt19937_64& rng);
Tensor random_normal(Shape shape, double stddev, std::mt19937_64& rng, bool requires_grad);

struct LayerConfig {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_size = 3;
  std::size_t stride = 1;  // 1 or 2
  // Stride-2 layers either downsample (default) or upsample.
  bool upsample = false;
  bool artifact_free = false;
  bool use_spectral_norm = false;
  bool bias = true;
  // Zero padding for plain convolutions; defaults to (kernel_size-1)/2.
  int padding = -1;

  void validate() const;
  std::size_t effective_padding() const;
};

// One convolutional layer.  Depending on the config this is a plain conv,
// a checkerboard-prone strided / transposed conv, or its artifact-free
// counterpart.  The trainable parameter count does not depend on
// artifact_free.
class ConvLayer {
 public:
  ConvLayer() = default;
  ConvLayer(const LayerConfig& config, std::mt19937_64& rng, double init_std = 0.02);

  const LayerConfig& config() const { return config_; }
  Tensor& weight() { return weight_; }
  const Tensor& weight() const { return weight_; }
  Tensor& bias() { return bias_; }
  const Tensor& bias() const { return bias_; }
  SpectralNormState& sn_state() { return sn_; }
  const SpectralNormState& sn_state() const { return sn_; }
  const FixedKernel& fixed_kernel() const { return fixed_; }

  // Weight actually used in forward: spectrally normalized when enabled.
  // `power_iterations` < 0 uses the state's default.
  Tensor effective_weight(int power_iterations = -1);

  Tensor forward(const Tensor& input, const Tensor& weight) const;
  Tensor forward(const Tensor& input) { return forward(input, effective_weight()); }

  void collect_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const;

 private:
  LayerConfig config_;
  Tensor weight_;
  Tensor bias_;
  SpectralNormState sn_;
  FixedKernel fixed_;
};

struct InstanceNormParams {
  Tensor gamma;
  Tensor beta;

  static InstanceNormParams create(std::size_t channels);
  Tensor forward(const Tensor& input) const { return instance_norm(input, gamma, beta); }
  void collect_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

// x + IN(conv(relu(IN(conv(x))))) with 3x3 zero-padded convs and no biases.
struct ResidualBlockParams {
  Tensor conv1;
  InstanceNormParams norm1;
  Tensor conv2;
  InstanceNormParams norm2;

  static ResidualBlockParams create(std::size_t channels, std::mt19937_64& rng,
                                    double init_std = 0.02);
  void collect_parameters(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

Tensor residual_block(const Tensor& input, const ResidualBlockParams& params);

}  // namespace ganf
