#include "ganf/model.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "ganf/config_json.hpp"
#include "ganf/numfmt.hpp"

namespace ganf {

namespace {

constexpr char kCheckpointMagic[8] = {'G', 'A', 'N', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kLeakySlope = 0.2;

bool power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

template <typename F>
auto guarded(std::uint64_t step, const char* stage, F&& f) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw TrainingError("step " + std::to_string(step) + ": non-finite value in " + stage + " (" + e.what() + ")");
  }
}

void check_finite_params(std::uint64_t step, const std::vector<NamedTensor>& params) {
  for (const auto& p : params) {
    for (double v : p.tensor.data()) {
      if (!std::isfinite(v)) {
        throw TrainingError("step " + std::to_string(step) + ": parameter " + p.name + " became non-finite");
      }
    }
  }
}

void append_prefixed(std::vector<NamedTensor>& out, const std::string& prefix, std::vector<NamedTensor> params) {
  for (auto& p : params) out.push_back({prefix + "/" + p.name, std::move(p.tensor)});
}

}  // namespace

// ---- configs ---------------------------------------------------------------

void GeneratorConfig::validate() const {
  if (base_channels == 0) throw std::invalid_argument("GeneratorConfig: base_channels must be positive");
  if (image_size < 4 || !power_of_two(image_size)) {
    throw std::invalid_argument("GeneratorConfig: image_size must be a power of two >= 4, got " +
                                std::to_string(image_size));
  }
  if (n_downsamples >= 63 || image_size % (std::size_t{1} << n_downsamples) != 0 ||
      (image_size >> n_downsamples) < 2) {
    throw std::invalid_argument("GeneratorConfig: image_size " + std::to_string(image_size) +
                                " is not divisible into >= 2x2 maps by 2^" + std::to_string(n_downsamples));
  }
}

void DiscriminatorConfig::validate() const {
  if (base_channels == 0 || depth == 0) throw std::invalid_argument("DiscriminatorConfig: base_channels and depth must be positive");
  if (depth >= 63 || image_size % (std::size_t{1} << depth) != 0 || (image_size >> depth) < 1) {
    throw std::invalid_argument("DiscriminatorConfig: image_size " + std::to_string(image_size) +
                                " not divisible by 2^" + std::to_string(depth));
  }
}

void TrainingConfig::validate() const {
  if (cycle_weight < 0.0) throw std::invalid_argument("TrainingConfig: cycle_weight must be >= 0");
  if (identity_weight < 0.0) throw std::invalid_argument("TrainingConfig: identity_weight must be >= 0");
  if (total_steps == 0) throw std::invalid_argument("TrainingConfig: total_steps must be > 0");
  if (batch_size == 0) throw std::invalid_argument("TrainingConfig: batch_size must be > 0");
  if (learning_rate < 0.0) throw std::invalid_argument("TrainingConfig: learning_rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("TrainingConfig: Adam betas must lie in [0,1)");
  }
}

// ---- Generator -------------------------------------------------------------

Generator::Generator(const GeneratorConfig& config, std::mt19937_64& rng) : config_(config) {
  config_.validate();
  const std::size_t c = config_.base_channels;
  stem_ = ConvLayer({.in_channels = 3, .out_channels = c, .kernel_size = 7, .bias = false}, rng);
  stem_norm_ = InstanceNormParams::create(c);
  std::size_t ch = c;
  for (std::size_t i = 0; i < config_.n_downsamples; ++i) {
    down_.emplace_back(LayerConfig{.in_channels = ch,
                                   .out_channels = 2 * ch,
                                   .kernel_size = 3,
                                   .stride = 2,
                                   .artifact_free = config_.artifact_free,
                                   .bias = false},
                       rng);
    down_norm_.push_back(InstanceNormParams::create(2 * ch));
    ch *= 2;
  }
  for (std::size_t i = 0; i < config_.n_residual_blocks; ++i) blocks_.push_back(ResidualBlockParams::create(ch, rng));
  for (std::size_t i = 0; i < config_.n_downsamples; ++i) {
    up_.emplace_back(LayerConfig{.in_channels = ch,
                                 .out_channels = ch / 2,
                                 .kernel_size = 3,
                                 .stride = 2,
                                 .upsample = true,
                                 .artifact_free = config_.artifact_free,
                                 .bias = false},
                     rng);
    up_norm_.push_back(InstanceNormParams::create(ch / 2));
    ch /= 2;
  }
  head_ = ConvLayer({.in_channels = c, .out_channels = 3, .kernel_size = 7, .bias = true}, rng);
}

Tensor Generator::encode(const Tensor& input) const {
  if (input.rank() != 4 || input.dim(1) != 3 || input.dim(2) != config_.image_size ||
      input.dim(3) != config_.image_size) {
    throw ShapeError("generator expects [N,3," + std::to_string(config_.image_size) + "," +
                     std::to_string(config_.image_size) + "], got " + shape_str(input.shape()));
  }
  Tensor h = relu(stem_norm_.forward(stem_.forward(input, stem_.weight())));
  for (std::size_t i = 0; i < down_.size(); ++i) h = relu(down_norm_[i].forward(down_[i].forward(h, down_[i].weight())));
  return h;
}

Tensor Generator::trunk(const Tensor& features) const {
  Tensor h = features;
  for (const auto& block : blocks_) h = residual_block(h, block);
  return h;
}

Tensor Generator::decode(const Tensor& features, std::vector<Tensor>* stage_outputs) const {
  Tensor h = features;
  for (std::size_t i = 0; i < up_.size(); ++i) {
    h = relu(up_norm_[i].forward(up_[i].forward(h, up_[i].weight())));
    if (stage_outputs) stage_outputs->push_back(h);
  }
  return tanh(head_.forward(h, head_.weight()));
}

Tensor Generator::forward(const Tensor& input) const { return decode(trunk(encode(input))); }

std::vector<NamedTensor> Generator::parameters() const {
  std::vector<NamedTensor> out;
  stem_.collect_parameters("stem", out);
  stem_norm_.collect_parameters("stem_norm", out);
  for (std::size_t i = 0; i < down_.size(); ++i) {
    down_[i].collect_parameters("down" + std::to_string(i), out);
    down_norm_[i].collect_parameters("down" + std::to_string(i) + "_norm", out);
  }
  for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect_parameters("res" + std::to_string(i), out);
  for (std::size_t i = 0; i < up_.size(); ++i) {
    up_[i].collect_parameters("up" + std::to_string(i), out);
    up_norm_[i].collect_parameters("up" + std::to_string(i) + "_norm", out);
  }
  head_.collect_parameters("head", out);
  return out;
}

// ---- Discriminator ---------------------------------------------------------

Discriminator::Discriminator(const DiscriminatorConfig& config, std::mt19937_64& rng) : config_(config) {
  config_.validate();
  std::size_t in = 3, out = config_.base_channels;
  for (std::size_t i = 0; i < config_.depth; ++i) {
    layers_.emplace_back(LayerConfig{.in_channels = in,
                                     .out_channels = out,
                                     .kernel_size = 4,
                                     .stride = 2,
                                     .use_spectral_norm = true,
                                     .padding = 1},
                         rng);
    in = out;
    out *= 2;
  }
  layers_.emplace_back(LayerConfig{.in_channels = in, .out_channels = 1, .kernel_size = 3, .use_spectral_norm = true},
                       rng);
}

std::vector<Tensor> Discriminator::normalized_weights(int power_iterations) {
  std::vector<Tensor> ws;
  ws.reserve(layers_.size());
  for (auto& layer : layers_) ws.push_back(layer.effective_weight(power_iterations));
  return ws;
}

Tensor Discriminator::forward(const Tensor& input, const std::vector<Tensor>& weights) const {
  if (weights.size() != layers_.size()) throw ShapeError("discriminator: wrong number of layer weights");
  Tensor h = input;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) h = leaky_relu(layers_[i].forward(h, weights[i]), kLeakySlope);
  return layers_.back().forward(h, weights.back());
}

std::vector<NamedTensor> Discriminator::parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect_parameters("layer" + std::to_string(i), out);
  return out;
}

Generator build_generator(const GeneratorConfig& config, std::mt19937_64& rng) { return Generator(config, rng); }

Discriminator build_discriminator(const DiscriminatorConfig& config, std::mt19937_64& rng) {
  return Discriminator(config, rng);
}

std::size_t count_parameters(const std::vector<NamedTensor>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

Tensor cycle_loss(const Tensor& x, const Tensor& x_rec) { return l1_distance(x_rec, x); }

// ---- Adam ------------------------------------------------------------------

Adam::Adam(std::vector<NamedTensor> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto data = params_[i].tensor.mutable_data();
    const auto grad = params_[i].tensor.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < data.size(); ++k) {
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * grad[k];
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * grad[k] * grad[k];
      data[k] -= config_.learning_rate * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + config_.eps);
    }
  }
}

// ---- CycleGAN --------------------------------------------------------------

CycleGAN::CycleGAN(const GeneratorConfig& generator, const DiscriminatorConfig& discriminator,
                   const TrainingConfig& training)
    : gen_config_(generator), disc_config_(discriminator), train_config_(training), rng_(training.rng_seed) {
  gen_config_.validate();
  disc_config_.validate();
  train_config_.validate();
  if (disc_config_.image_size != gen_config_.image_size) {
    throw std::invalid_argument("CycleGAN: generator and discriminator image sizes differ");
  }
  g_ab_ = build_generator(gen_config_, rng_);
  g_ba_ = build_generator(gen_config_, rng_);
  d_a_ = build_discriminator(disc_config_, rng_);
  d_b_ = build_discriminator(disc_config_, rng_);

  const AdamConfig adam{train_config_.learning_rate, train_config_.beta1, train_config_.beta2};
  std::vector<NamedTensor> gp, dp;
  append_prefixed(gp, "G_AB", g_ab_.parameters());
  append_prefixed(gp, "G_BA", g_ba_.parameters());
  append_prefixed(dp, "D_A", d_a_.parameters());
  append_prefixed(dp, "D_B", d_b_.parameters());
  opt_g_ = Adam(std::move(gp), adam);
  opt_d_ = Adam(std::move(dp), adam);
}

LossRecord CycleGAN::train_step(const Tensor& batch_a, const Tensor& batch_b) {
  const std::size_t s = gen_config_.image_size;
  for (const Tensor* b : {&batch_a, &batch_b}) {
    if (b->rank() != 4 || b->dim(1) != 3 || b->dim(2) != s || b->dim(3) != s) {
      throw ShapeError("train_step: batches must be [N,3," + std::to_string(s) + "," + std::to_string(s) +
                       "], got " + shape_str(b->shape()));
    }
  }
  if (batch_a.dim(0) != batch_b.dim(0)) throw ShapeError("train_step: domain batches differ in size");

  const std::uint64_t step = step_ + 1;
  LossRecord rec;
  rec.step = step;

  // Generator graphs are built once and reused for the generator update.
  Tensor fake_b = guarded(step, "G_AB(A)", [&] { return g_ab_.forward(batch_a); });
  Tensor rec_a = guarded(step, "G_BA(G_AB(A))", [&] { return g_ba_.forward(fake_b); });
  Tensor fake_a = guarded(step, "G_BA(B)", [&] { return g_ba_.forward(batch_b); });
  Tensor rec_b = guarded(step, "G_AB(G_BA(B))", [&] { return g_ab_.forward(fake_a); });

  // Discriminators: real vs detached fakes.
  opt_d_.zero_grad();
  Tensor loss_d = guarded(step, "discriminator loss", [&] {
    auto wa = d_a_.normalized_weights();
    auto wb = d_b_.normalized_weights();
    Tensor la = hinge_d_loss(d_a_.forward(batch_a, wa), d_a_.forward(fake_a.detach(), wa));
    Tensor lb = hinge_d_loss(d_b_.forward(batch_b, wb), d_b_.forward(fake_b.detach(), wb));
    rec.adv_d_a = la.item();
    rec.adv_d_b = lb.item();
    return add(la, lb);
  });
  guarded(step, "discriminator backward", [&] { loss_d.backward(); return 0; });
  opt_d_.step();
  check_finite_params(step, opt_d_.params());

  // Generators against the updated discriminators.
  opt_g_.zero_grad();
  Tensor loss_g = guarded(step, "generator loss", [&] {
    auto wa = d_a_.normalized_weights(0);
    auto wb = d_b_.normalized_weights(0);
    Tensor adv_ab = hinge_g_loss(d_b_.forward(fake_b, wb));
    Tensor adv_ba = hinge_g_loss(d_a_.forward(fake_a, wa));
    Tensor cyc_a = cycle_loss(batch_a, rec_a);
    Tensor cyc_b = cycle_loss(batch_b, rec_b);
    rec.adv_g_ab = adv_ab.item();
    rec.adv_g_ba = adv_ba.item();
    rec.cycle_a = cyc_a.item();
    rec.cycle_b = cyc_b.item();
    Tensor total = add(add(adv_ab, adv_ba), scale(add(cyc_a, cyc_b), train_config_.cycle_weight));
    if (train_config_.identity_weight > 0.0) {
      Tensor idt = add(l1_distance(g_ba_.forward(batch_a), batch_a), l1_distance(g_ab_.forward(batch_b), batch_b));
      rec.identity = idt.item();
      total = add(total, scale(idt, train_config_.identity_weight));
    }
    rec.total_g = total.item();
    return total;
  });
  guarded(step, "generator backward", [&] { loss_g.backward(); return 0; });
  opt_g_.step();
  check_finite_params(step, opt_g_.params());

  step_ = step;
  history_.push_back(rec);
  return rec;
}

void CycleGAN::train(const std::vector<ImageBuffer>& domain_a, const std::vector<ImageBuffer>& domain_b,
                     std::uint64_t until_step) {
  if (domain_a.empty() || domain_b.empty()) throw std::invalid_argument("CycleGAN::train: empty domain set");
  const std::size_t n = train_config_.batch_size;
  while (step_ < until_step) {
    std::vector<const ImageBuffer*> pa(n), pb(n);
    for (std::size_t i = 0; i < n; ++i) {
      pa[i] = &domain_a[rng_() % domain_a.size()];
      pb[i] = &domain_b[rng_() % domain_b.size()];
    }
    train_step(to_model_batch(pa), to_model_batch(pb));
  }
}

// ---- checkpoint ------------------------------------------------------------
//
// Layout: 8-byte magic "GANFCKPT", uint32 version, uint64 header length,
// UTF-8 JSON header, then float64 payload.  Integers and doubles are stored
// in host byte order (little-endian on all supported targets).  The header's
// "tensors" array lists name, shape and element offset into the payload.

namespace {

struct TensorSlot {
  std::string name;
  Shape shape;
  std::vector<double>* values;
};

std::vector<TensorSlot> checkpoint_slots(CycleGAN& model, Adam& opt_g, Adam& opt_d) {
  std::vector<TensorSlot> slots;
  for (Adam* opt : {&opt_g, &opt_d}) {
    for (const auto& p : opt->params()) slots.push_back({p.name, p.tensor.shape(), &p.tensor.node().data});
  }
  for (auto [prefix, disc] : {std::pair{"D_A", &model.d_a()}, std::pair{"D_B", &model.d_b()}}) {
    auto& layers = disc->layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& sn = layers[i].sn_state();
      const std::string base = std::string(prefix) + "/layer" + std::to_string(i);
      slots.push_back({base + ".sn_u", {sn.u.size()}, &sn.u});
      slots.push_back({base + ".sn_v", {sn.v.size()}, &sn.v});
    }
  }
  for (auto [tag, opt] : {std::pair{"adam_g", &opt_g}, std::pair{"adam_d", &opt_d}}) {
    for (std::size_t i = 0; i < opt->params().size(); ++i) {
      const auto& p = opt->params()[i];
      slots.push_back({std::string(tag) + ".m/" + p.name, p.tensor.shape(), &opt->first_moments()[i]});
      slots.push_back({std::string(tag) + ".v/" + p.name, p.tensor.shape(), &opt->second_moments()[i]});
    }
  }
  return slots;
}

nlohmann::json history_to_json(const std::vector<LossRecord>& history) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : history) {
    rows.push_back({r.step, r.adv_d_a, r.adv_d_b, r.adv_g_ab, r.adv_g_ba, r.cycle_a, r.cycle_b, r.identity,
                    r.total_g});
  }
  return rows;
}

std::vector<LossRecord> history_from_json(const nlohmann::json& rows) {
  std::vector<LossRecord> out;
  for (const auto& r : rows) {
    out.push_back({r.at(0).get<std::uint64_t>(), r.at(1).get<double>(), r.at(2).get<double>(),
                   r.at(3).get<double>(), r.at(4).get<double>(), r.at(5).get<double>(), r.at(6).get<double>(),
                   r.at(7).get<double>(), r.at(8).get<double>()});
  }
  return out;
}

}  // namespace

void CycleGAN::save(const std::filesystem::path& path) const {
  auto& self = const_cast<CycleGAN&>(*this);
  const auto slots = checkpoint_slots(self, self.opt_g_, self.opt_d_);

  std::ostringstream rng_state;
  rng_state << rng_;
  nlohmann::json header{{"format", "gan-forensics-checkpoint"},
                        {"version", kCheckpointVersion},
                        {"generator", to_json(gen_config_)},
                        {"discriminator", to_json(disc_config_)},
                        {"training", to_json(train_config_)},
                        {"step", step_},
                        {"adam_g_steps", opt_g_.steps()},
                        {"adam_d_steps", opt_d_.steps()},
                        {"rng_state", rng_state.str()},
                        {"loss_history", history_to_json(history_)}};
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& s : slots) {
    index.push_back({{"name", s.name}, {"shape", s.shape}, {"offset", offset}});
    offset += s.values->size();
  }
  header["tensors"] = index;
  header["payload_length"] = offset;
  const std::string text = header.dump();

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    const std::uint64_t len = text.size();
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    out.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof(kCheckpointVersion));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& s : slots) {
      out.write(reinterpret_cast<const char*>(s.values->data()),
                static_cast<std::streamsize>(s.values->size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CycleGAN CycleGAN::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error(path.string() + " is not a gan-forensics checkpoint");
  }
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  if (len > (std::uint64_t{1} << 32)) throw std::runtime_error("corrupt checkpoint header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated checkpoint header in " + path.string());
  const auto header = nlohmann::json::parse(text);

  GeneratorConfig gc;
  DiscriminatorConfig dc;
  TrainingConfig tc;
  from_json(header.at("generator"), gc);
  from_json(header.at("discriminator"), dc);
  from_json(header.at("training"), tc);
  CycleGAN model(gc, dc, tc);

  std::vector<double> payload(header.at("payload_length").get<std::uint64_t>());
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated checkpoint payload in " + path.string());

  std::map<std::string, std::pair<Shape, std::uint64_t>> entries;
  for (const auto& t : header.at("tensors")) {
    entries[t.at("name").get<std::string>()] = {t.at("shape").get<Shape>(), t.at("offset").get<std::uint64_t>()};
  }
  const auto slots = checkpoint_slots(model, model.opt_g_, model.opt_d_);
  if (slots.size() != entries.size()) throw std::runtime_error("checkpoint tensor count does not match the model");
  for (const auto& s : slots) {
    auto it = entries.find(s.name);
    if (it == entries.end()) throw std::runtime_error("checkpoint is missing tensor " + s.name);
    const auto& [shape, offset] = it->second;
    if (shape != s.shape || offset + s.values->size() > payload.size()) {
      throw std::runtime_error("checkpoint tensor " + s.name + " has shape " + shape_str(shape) + ", model expects " +
                               shape_str(s.shape));
    }
    std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(offset), s.values->size(), s.values->begin());
  }

  model.step_ = header.at("step").get<std::uint64_t>();
  model.opt_g_.set_steps(header.at("adam_g_steps").get<std::uint64_t>());
  model.opt_d_.set_steps(header.at("adam_d_steps").get<std::uint64_t>());
  std::istringstream rng_state(header.at("rng_state").get<std::string>());
  rng_state >> model.rng_;
  if (!rng_state) throw std::runtime_error("corrupt RNG state in checkpoint");
  model.history_ = history_from_json(header.at("loss_history"));
  return model;
}

// ---- inference / CSV -------------------------------------------------------

ImageBuffer generate(const Generator& generator, const ImageBuffer& image) {
  NoGradGuard no_grad;
  return from_model_tensor(generator.forward(to_model_tensor(image)));
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,adv_d_a,adv_d_b,adv_g_ab,adv_g_ba,cycle_a,cycle_b,identity,total_g\n";
  for (const auto& r : history) {
    out << r.step;
    for (double v : {r.adv_d_a, r.adv_d_b, r.adv_g_ab, r.adv_g_ba, r.cycle_a, r.cycle_b, r.identity, r.total_g}) {
      out << ',' << format_double(v);
    }
    out << '\n';
  }
}

std::vector<LossRecord> read_loss_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "step,adv_d_a,adv_d_b,adv_g_ab,adv_g_ba,cycle_a,cycle_b,identity,total_g") {
    throw std::runtime_error("unexpected loss CSV header in " + path.string());
  }
  std::vector<LossRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double v[9];
    const char* p = line.data();
    const char* end = p + line.size();
    for (int i = 0; i < 9; ++i) {
      auto [next, ec] = std::from_chars(p, end, v[i]);
      if (ec != std::errc()) throw std::runtime_error("malformed loss CSV row in " + path.string());
      p = next + (next < end && *next == ',' ? 1 : 0);
    }
    out.push_back({static_cast<std::uint64_t>(v[0]), v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]});
  }
  return out;
}

}  // namespace ganf
