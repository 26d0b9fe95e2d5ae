#pragma once

// CycleGAN at desk scale: two generators (conventional or artifact-free
// resampling), two spectrally normalized PatchGAN discriminators, hinge
// adversarial losses, L1 cycle consistency and Adam.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ganf/image.hpp"
#include "ganf/nn.hpp"
#include "ganf/tensor.hpp"

namespace ganf {

struct GeneratorConfig {
  std::size_t base_channels = 16;
  std::size_t n_downsamples = 2;
  std::size_t n_residual_blocks = 3;
  std::size_t image_size = 32;
  bool artifact_free = false;

  void validate() const;
};

struct DiscriminatorConfig {
  std::size_t base_channels = 16;
  std::size_t depth = 3;  // number of stride-2 stages
  std::size_t image_size = 32;

  void validate() const;
  std::size_t score_size() const { return image_size >> depth; }
};

class Generator {
 public:
  Generator() = default;
  Generator(const GeneratorConfig& config, std::mt19937_64& rng);

  const GeneratorConfig& config() const { return config_; }

  // [N,3,S,S] in [-1,1] -> [N,3,S,S] in [-1,1].
  Tensor forward(const Tensor& input) const;
  // Stem and downsampling stages.
  Tensor encode(const Tensor& input) const;
  Tensor trunk(const Tensor& features) const;
  // Upsampling stages and the tanh head.  When `stage_outputs` is given it
  // receives each upsampling stage's activation (after norm and ReLU).
  Tensor decode(const Tensor& features, std::vector<Tensor>* stage_outputs = nullptr) const;

  std::vector<NamedTensor> parameters() const;
  std::vector<ResidualBlockParams>& residual_blocks() { return blocks_; }
  std::vector<ConvLayer>& up_layers() { return up_; }
  std::vector<ConvLayer>& down_layers() { return down_; }

 private:
  GeneratorConfig config_;
  ConvLayer stem_;
  InstanceNormParams stem_norm_;
  std::vector<ConvLayer> down_;
  std::vector<InstanceNormParams> down_norm_;
  std::vector<ResidualBlockParams> blocks_;
  std::vector<ConvLayer> up_;
  std::vector<InstanceNormParams> up_norm_;
  ConvLayer head_;
};

class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const DiscriminatorConfig& config, std::mt19937_64& rng);

  const DiscriminatorConfig& config() const { return config_; }

  // Spectrally normalized weights for every layer.  power_iterations < 0
  // uses one warm-started iteration; 0 re-estimates sigma from the current
  // u, v without advancing them.
  std::vector<Tensor> normalized_weights(int power_iterations = -1);
  // [N,3,S,S] -> score map [N,1,S/2^depth,S/2^depth]
  Tensor forward(const Tensor& input, const std::vector<Tensor>& weights) const;
  Tensor forward(const Tensor& input) { return forward(input, normalized_weights()); }

  std::vector<NamedTensor> parameters() const;
  std::vector<ConvLayer>& layers() { return layers_; }
  const std::vector<ConvLayer>& layers() const { return layers_; }

 private:
  DiscriminatorConfig config_;
  std::vector<ConvLayer> layers_;
};

Generator build_generator(const GeneratorConfig& config, std::mt19937_64& rng);
Discriminator build_discriminator(const DiscriminatorConfig& config, std::mt19937_64& rng);

std::size_t count_parameters(const std::vector<NamedTensor>& params);

// mean(|x - x_rec|)
Tensor cycle_loss(const Tensor& x, const Tensor& x_rec);

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<NamedTensor> params, AdamConfig config);

  void zero_grad();
  void step();

  const std::vector<NamedTensor>& params() const { return params_; }
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }

 private:
  std::vector<NamedTensor> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t t_ = 0;
};

struct TrainingConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double cycle_weight = 10.0;
  // Identity-mapping loss weight; 0 disables the term.
  double identity_weight = 0.0;
  std::size_t batch_size = 1;
  std::size_t total_steps = 1000;
  std::uint64_t rng_seed = 7;

  void validate() const;
};

struct LossRecord {
  std::uint64_t step = 0;
  double adv_d_a = 0.0;   // hinge loss of D_A
  double adv_d_b = 0.0;   // hinge loss of D_B
  double adv_g_ab = 0.0;  // hinge generator loss of G_AB against D_B
  double adv_g_ba = 0.0;  // hinge generator loss of G_BA against D_A
  double cycle_a = 0.0;   // |G_BA(G_AB(a)) - a|
  double cycle_b = 0.0;   // |G_AB(G_BA(b)) - b|
  double identity = 0.0;
  double total_g = 0.0;

  double adv_d() const { return adv_d_a + adv_d_b; }
  double adv_g() const { return adv_g_ab + adv_g_ba; }
  double cycle() const { return cycle_a + cycle_b; }
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The four networks, their optimizers, the sampling RNG and the loss history.
class CycleGAN {
 public:
  CycleGAN(const GeneratorConfig& generator, const DiscriminatorConfig& discriminator,
           const TrainingConfig& training);

  // One alternating update: D_A and D_B on hinge loss, then both generators
  // on hinge + cycle_weight * cycle (+ identity).  Batches are [N,3,S,S] in
  // model range.
  LossRecord train_step(const Tensor& batch_a, const Tensor& batch_b);

  // Draws batch_size images per domain with the session RNG and steps until
  // `step()` reaches `until_step`.
  void train(const std::vector<ImageBuffer>& domain_a, const std::vector<ImageBuffer>& domain_b,
             std::uint64_t until_step);

  std::uint64_t step() const { return step_; }
  const std::vector<LossRecord>& history() const { return history_; }

  Generator& g_ab() { return g_ab_; }
  Generator& g_ba() { return g_ba_; }
  Discriminator& d_a() { return d_a_; }
  Discriminator& d_b() { return d_b_; }
  const Generator& g_ab() const { return g_ab_; }
  const Generator& g_ba() const { return g_ba_; }

  const GeneratorConfig& generator_config() const { return gen_config_; }
  const DiscriminatorConfig& discriminator_config() const { return disc_config_; }
  const TrainingConfig& training_config() const { return train_config_; }

  // Versioned binary container; the layout is described in README.md.
  void save(const std::filesystem::path& path) const;
  static CycleGAN load(const std::filesystem::path& path);

 private:
  GeneratorConfig gen_config_;
  DiscriminatorConfig disc_config_;
  TrainingConfig train_config_;
  std::mt19937_64 rng_;
  Generator g_ab_, g_ba_;
  Discriminator d_a_, d_b_;
  Adam opt_g_, opt_d_;
  std::uint64_t step_ = 0;
  std::vector<LossRecord> history_;
};

// Runs the generator on one image: [0,1] -> [-1,1] -> G -> [0,1].
ImageBuffer generate(const Generator& generator, const ImageBuffer& image);

// Writes step,adv_d_a,... with round-trip precision.
void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history);
std::vector<LossRecord> read_loss_csv(const std::filesystem::path& path);

}  // namespace ganf
