// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   ganf_acceptance [--steps N] [--only 1,2,...] [--work-dir DIR]

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ganf/dataset.hpp"
#include "ganf/detector.hpp"
#include "ganf/model.hpp"
#include "ganf/nn.hpp"
#include "ganf/spectrum.hpp"
#include "oracles.hpp"

using namespace ganf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

double spread(std::span<const double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

// Largest per-plane spread of an [N,C,H,W] tensor over rows/cols [border, size-border).
double plane_spread(std::span<const double> data, const Shape& shape, std::size_t border) {
  const std::size_t h = shape[2], w = shape[3];
  double worst = 0.0;
  for (std::size_t p = 0; p < shape[0] * shape[1]; ++p) {
    std::vector<double> v;
    for (std::size_t y = border; y + border < h; ++y)
      for (std::size_t x = border; x + border < w; ++x) v.push_back(data[(p * h + y) * w + x]);
    worst = std::max(worst, spread(v));
  }
  return worst;
}

// [Co,Ci,K,K] -> [Ci,Co,K,K]
Tensor swap_io(const Tensor& w) {
  const std::size_t co = w.dim(0), ci = w.dim(1), k2 = w.dim(2) * w.dim(3);
  std::vector<double> out(w.numel());
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t i = 0; i < ci; ++i)
      for (std::size_t k = 0; k < k2; ++k) out[(i * co + o) * k2 + k] = w.data()[(o * ci + i) * k2 + k];
  return Tensor::from({ci, co, w.dim(2), w.dim(3)}, std::move(out));
}

Outcome gradients() {
  constexpr double tol = 1e-4;
  constexpr int trials = 20;
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t checks = 0;
  auto record = [&](const std::string& name, const oracle::GradCheck& r) {
    ++checks;
    if (r.max_relative_error > worst || std::isnan(r.max_relative_error)) {
      worst = std::isnan(r.max_relative_error) ? INFINITY : r.max_relative_error;
      worst_name = name;
    }
  };

  std::mt19937_64 rng(101);
  for (int trial = 0; trial < trials; ++trial) {
    auto a = oracle::away_from_zero(oracle::random_tensor({2, 3, 4, 4}, rng, true));
    auto b = oracle::away_from_zero(oracle::random_tensor({2, 3, 4, 4}, rng, true));
    auto w = oracle::random_tensor({2, 3, 3, 3}, rng, true);
    auto bias = oracle::random_tensor({2}, rng, true);
    auto wt = oracle::random_tensor({3, 2, 3, 3}, rng, true);
    auto gamma = oracle::random_tensor({3}, rng, true, 0.5, 1.5);
    auto beta = oracle::random_tensor({3}, rng, true);
    auto s = oracle::random_tensor({1}, rng, true);
    auto rw = oracle::random_tensor({4, 3, 3, 3}, rng, true);
    auto rb = oracle::random_tensor({4}, rng, true);
    auto sn_w = oracle::random_tensor({4, 2, 2, 2}, rng, true);
    auto sn_state = SpectralNormState::init(sn_w, rng);
    spectral_normalize(sn_w, sn_state, 3);
    auto block = ResidualBlockParams::create(3, rng, 0.5);
    const std::uint64_t probe_seed = rng();
    auto probe = [&](const Tensor& t) {
      std::mt19937_64 prng(probe_seed);
      return sum(mul(t, oracle::random_tensor(t.shape(), prng)));
    };
    const std::vector<std::pair<const char*, std::function<Tensor()>>> cases = {
        {"add", [&] { return probe(add(a, b)); }},
        {"sub", [&] { return probe(sub(a, b)); }},
        {"mul", [&] { return probe(mul(a, b)); }},
        {"mul_broadcast", [&] { return probe(mul(a, s)); }},
        {"scale", [&] { return probe(scale(a, -1.7)); }},
        {"add_scalar", [&] { return probe(add_scalar(a, 0.3)); }},
        {"relu", [&] { return probe(relu(a)); }},
        {"leaky_relu", [&] { return probe(leaky_relu(a, 0.2)); }},
        {"tanh", [&] { return probe(ganf::tanh(a)); }},
        {"mean", [&] { return mul(mean(a), mean(b)); }},
        {"sum", [&] { return mul(sum(a), sum(b)); }},
        {"l1_distance", [&] { return l1_distance(a, b); }},
        {"conv2d", [&] { return probe(conv2d(a, w, bias, 1 + trial % 2, trial % 2)); }},
        {"conv2d_transposed", [&] { return probe(conv2d_transposed(a, wt, 2)); }},
        {"add_channel_bias", [&] { return probe(add_channel_bias(a, beta)); }},
        {"crop2d", [&] { return probe(crop2d(a, 1, 0, 2, 3)); }},
        {"pad_replicate", [&] { return probe(pad_replicate(a, 2)); }},
        {"upsample_nearest2x", [&] { return probe(upsample_nearest2x(a)); }},
        {"instance_norm", [&] { return probe(instance_norm(a, gamma, beta)); }},
        {"fixed_smooth", [&] { return probe(fixed_smooth(a, FixedKernel())); }},
        {"fixed_upsample2x", [&] { return probe(fixed_upsample2x(a, FixedKernel())); }},
        {"artifact_free_upsample", [&] { return probe(artifact_free_upsample(a, rw, rb)); }},
        {"artifact_free_downsample", [&] { return probe(artifact_free_downsample(a, rw, rb)); }},
        {"spectral_normalize", [&] { return probe(spectral_normalize(sn_w, sn_state, 0).weight); }},
        {"hinge_d_loss", [&] { return hinge_d_loss(a, b); }},
        {"hinge_g_loss", [&] { return hinge_g_loss(mul(a, b)); }},
        {"cycle_loss", [&] { return cycle_loss(a, b); }},
        {"residual_block", [&] { return probe(residual_block(a, block)); }},
    };
    std::vector<Tensor> params{a, b, w, bias, wt, gamma, beta, s, rw, rb, sn_w};
    std::vector<NamedTensor> block_params;
    block.collect_parameters("block", block_params);
    for (const auto& p : block_params) params.push_back(p.tensor);
    for (const auto& [name, fn] : cases) record(name, oracle::check_gradients(fn, params));
  }

  for (int trial = 0; trial < trials; ++trial) {
    for (bool af : {false, true}) {
      Generator g(GeneratorConfig{.base_channels = 2, .n_downsamples = 2, .n_residual_blocks = 1, .image_size = 16,
                                  .artifact_free = af},
                  rng);
      auto x = oracle::random_tensor({1, 3, 16, 16}, rng, true);
      auto probe = oracle::random_tensor({1, 3, 16, 16}, rng);
      std::vector<Tensor> params{x};
      for (const auto& p : g.parameters()) params.push_back(p.tensor);
      auto f = [&] { return sum(mul(g.forward(x), probe)); };
      // A smaller step than for single ops: with instance norm after small
      // weights, 1e-5 can push activations across ReLU kinks.
      record(af ? "generator(artifact_free)" : "generator(conventional)", oracle::check_gradients(f, params, 1e-6, 6));
    }
    Discriminator d(DiscriminatorConfig{.base_channels = 2, .depth = 2, .image_size = 8}, rng);
    d.normalized_weights(5);
    auto real = oracle::random_tensor({1, 3, 8, 8}, rng, true);
    auto fake = oracle::random_tensor({1, 3, 8, 8}, rng, true);
    std::vector<Tensor> params{real, fake};
    for (const auto& p : d.parameters()) params.push_back(p.tensor);
    auto f = [&] {
      const auto ws = d.normalized_weights(0);
      return hinge_d_loss(d.forward(real, ws), d.forward(fake, ws));
    };
    record("discriminator", oracle::check_gradients(f, params, 1e-6, 6));
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Outcome o;
  o.pass = worst < tol && seconds < 60.0;
  o.detail = std::to_string(checks) + " checks over " + std::to_string(trials) +
             " instances each, max relative error " + fmt(worst) + " (" + worst_name + "), " + fmt(seconds) + " s";
  return o;
}

Outcome resampling_invariants() {
  constexpr int draws = 100;
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> value(-2.0, 2.0);
  int up_const = 0, down_const = 0, up_witness = 0, down_witness = 0;
  double worst_down = 0.0;
  for (int i = 0; i < draws; ++i) {
    // Upsampling: a constant map stays bitwise constant, a transposed conv does not.
    auto w = oracle::random_tensor({3, 2, 3, 3}, rng);
    auto b = oracle::random_tensor({3}, rng);
    std::vector<double> cx(2 * 8 * 8);
    const double c0 = value(rng), c1 = value(rng);
    std::fill(cx.begin(), cx.begin() + 64, c0);
    std::fill(cx.begin() + 64, cx.end(), c1);
    const auto x = Tensor::from({1, 2, 8, 8}, cx);
    const auto up = artifact_free_upsample(x, w, b);
    if (plane_spread(up.data(), up.shape(), 0) == 0.0) ++up_const;
    const auto conv = add_channel_bias(crop2d(conv2d_transposed(x, swap_io(w), 2), 1, 1, 16, 16), b);
    if (plane_spread(conv.data(), conv.shape(), 2) > 1e-6) ++up_witness;

    // Downsampling: a constant upstream gradient reaches the interior of the
    // input constant, the plain strided conv's gradient does not.
    auto wd = oracle::random_tensor({3, 2, 3, 3}, rng);
    auto xd = oracle::random_tensor({1, 2, 16, 16}, rng, true);
    const double g = value(rng);
    sum(scale(artifact_free_downsample(xd, wd, Tensor{}), g)).backward();
    const double s = plane_spread(xd.grad(), xd.shape(), 3);
    worst_down = std::max(worst_down, s);
    if (s <= 1e-12) ++down_const;
    auto xs = oracle::random_tensor({1, 2, 16, 16}, rng, true);
    sum(scale(conv2d(xs, wd, 2, 1), g)).backward();
    if (plane_spread(xs.grad(), xs.shape(), 3) > 1e-6) ++down_witness;
  }
  Outcome o;
  o.pass = up_const == draws && down_const == draws && up_witness == draws && down_witness == draws;
  o.detail = "upsample constant " + std::to_string(up_const) + "/100, downsample gradient constant " +
             std::to_string(down_const) + "/100 (max spread " + fmt(worst_down) + "), transposed witness " +
             std::to_string(up_witness) + "/100, strided witness " + std::to_string(down_witness) + "/100";
  return o;
}

Outcome spectral_norm() {
  constexpr int matrices = 50;
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<std::size_t> rows(1, 64), cols(1, 128);
  double worst_sigma = 0.0, worst_unit = 0.0;
  for (int i = 0; i < matrices; ++i) {
    const std::size_t r = i == 0 ? 64 : rows(rng), c = i == 0 ? 128 : cols(rng);
    auto w = oracle::random_tensor({r, c}, rng);
    auto state = SpectralNormState::init(w, rng);
    const auto result = spectral_normalize(w, state, 1000);
    const double sigma = oracle::largest_singular_value(w);
    worst_sigma = std::max(worst_sigma, std::abs(result.sigma - sigma));
    worst_unit = std::max(worst_unit, std::abs(oracle::largest_singular_value(result.weight) - 1.0));
  }
  Outcome o;
  o.pass = worst_sigma <= 1e-3 && worst_unit <= 1e-3;
  o.detail = std::to_string(matrices) + " matrices up to 64x128, 1000 power iterations: max |sigma - svd| " +
             fmt(worst_sigma) + ", max |sigma(W/sigma) - 1| " + fmt(worst_unit);
  return o;
}

ImageBuffer pattern_image(std::size_t h, std::size_t w, const std::function<double(std::size_t, std::size_t)>& f) {
  std::vector<double> v(h * w * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) v[(y * w + x) * 3 + c] = f(y, x);
  return ImageBuffer(h, w, std::move(v));
}

Outcome fft_spectrum() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  double fft_err = 0.0;
  for (std::size_t n = 1; n <= 32; ++n) {
    std::vector<Complex> x(n);
    for (auto& v : x) v = {d(rng), d(rng)};
    auto fast = x;
    fft(fast);
    const auto slow = oracle::dft1d(x);
    for (std::size_t k = 0; k < n; ++k) fft_err = std::max(fft_err, std::abs(fast[k] - slow[k]));
  }
  double profile_err = 0.0;
  std::size_t shapes = 0;
  for (std::size_t h = 4; h <= 32; ++h)
    for (std::size_t w = 4; w <= 32; ++w) {
      const auto img = oracle::random_image(h, w, rng);
      profile_err = std::max(profile_err, oracle::profile_error(log_spectrum(img), oracle::naive_profile(img)));
      ++shapes;
    }
  bool checker_ok = true, constant_ok = true;
  for (std::size_t n = 4; n <= 32; n += 2) {
    const auto checker = pattern_image(n, n, [](std::size_t y, std::size_t x) { return (y + x) % 2 ? 0.0 : 1.0; });
    checker_ok = checker_ok && std::abs(nyquist_energy_ratio(checker) - 1.0) <= 1e-12;
    const double c = (d(rng) + 1.0) / 2.0;
    const auto flat = pattern_image(n, n, [c](std::size_t, std::size_t) { return c; });
    constant_ok = constant_ok && nyquist_energy_ratio(flat) == 0.0;
  }
  Outcome o;
  o.pass = fft_err <= 1e-9 && profile_err <= 1e-9 && checker_ok && constant_ok;
  o.detail = "fft vs DFT n=1..32 max error " + fmt(fft_err) + "; log_spectrum vs naive DFT on " +
             std::to_string(shapes) + " sizes HxW in 4..32 max error " + fmt(profile_err) +
             "; checkerboard ratio 1: " + (checker_ok ? "yes" : "no") + "; constant ratio 0: " +
             (constant_ok ? "yes" : "no");
  return o;
}

// Brightness detector on 8x8 grey images: score > 0.5 iff the grey level
// exceeds 0.5, so the confusion counts are set by the query brightness.
Outcome detection_metrics() {
  constexpr std::size_t n = 8;
  DetectorModel det;
  det.image_height = n;
  det.image_width = n;
  det.feature_mean.assign(n / 2 + 1, 0.0);
  det.feature_scale.assign(n / 2 + 1, 1.0);
  det.weights.assign(n / 2 + 1, 0.0);
  det.weights[0] = 1.0;
  det.bias = -std::log1p(static_cast<double>(n) * 0.5);
  auto grey = [](double v) { return pattern_image(n, n, [v](std::size_t, std::size_t) { return v; }); };
  const auto bright = grey(0.8), dark = grey(0.2);

  struct Row {
    const char* name;
    std::size_t n_tn, n_tp;
    double acc, acc_fake;
  };
  const Row rows[] = {{"w/ artifacts", 92, 78, 0.85, 0.92}, {"w/o artifacts", 12, 80, 0.46, 0.12}};
  bool ok = true;
  std::string detail;
  for (const auto& row : rows) {
    std::vector<ImageBuffer> reals, fakes;
    for (std::size_t i = 0; i < 100; ++i) reals.push_back(i < row.n_tp ? bright : dark);
    for (std::size_t i = 0; i < 100; ++i) fakes.push_back(i < row.n_tn ? dark : bright);
    const auto r = evaluate(det, reals, fakes);
    const auto expected = DetectionReport::from_counts(row.n_tn, row.n_tp, 100, 100);
    const bool row_ok = r == expected && r.acc == row.acc && r.acc_fake == row.acc_fake;
    ok = ok && row_ok;
    if (!detail.empty()) detail += "; ";
    detail += std::string(row.name) + " N_tn=" + std::to_string(r.n_tn) + " N_tp=" + std::to_string(r.n_tp) +
              " ACC=" + fmt(r.acc) + " ACC(Fake)=" + fmt(r.acc_fake);
  }
  return {ok, detail};
}

struct EndToEnd {
  double nyquist_conventional = 0.0;
  double nyquist_artifact_free = 0.0;
  DetectionReport conventional;
  DetectionReport artifact_free;
};

double mean_nyquist(const std::vector<ImageBuffer>& images) {
  double s = 0.0;
  for (const auto& img : images) s += nyquist_energy_ratio(img);
  return s / static_cast<double>(images.size());
}

std::vector<ImageBuffer> translate(const Generator& g, const std::vector<ImageBuffer>& images) {
  std::vector<ImageBuffer> out;
  for (const auto& img : images) out.push_back(generate(g, img));
  return out;
}

void save_all(const std::vector<ImageBuffer>& images, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%04zu.png", i);
    save_image(images[i], dir / name);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

// Default synthetic dataset and default configs, fixed seed; every artifact
// goes under `dir`.
EndToEnd end_to_end(const fs::path& dir, std::uint64_t steps) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const SyntheticSpec spec;
  const Dataset data = synth_dataset(spec);
  TrainingConfig training;
  training.total_steps = steps;

  std::vector<ImageBuffer> fakes_train_conventional;
  std::vector<ImageBuffer> fakes_test[2];
  for (int variant = 0; variant < 2; ++variant) {
    const bool af = variant == 1;
    const std::string name = af ? "artifact_free" : "conventional";
    GeneratorConfig gen;
    gen.artifact_free = af;
    CycleGAN model(gen, DiscriminatorConfig{}, training);
    const auto start = std::chrono::steady_clock::now();
    model.train(data.a.train, data.b.train, steps);
    std::cerr << "  trained " << name << " for " << steps << " steps in "
              << fmt(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()) << " s\n";
    write_loss_csv(dir / (name + "_losses.csv"), model.history());
    if (!af) fakes_train_conventional = translate(model.g_ab(), data.a.train);
    fakes_test[variant] = translate(model.g_ab(), data.a.test);
    save_all(fakes_test[variant], dir / (name + "_fakes"));
  }

  const auto detector = train_detector(data.b.train, fakes_train_conventional, DetectorConfig{});
  save_detector(detector, dir / "detector.json");
  EndToEnd r;
  r.conventional = evaluate(detector, data.b.test, fakes_test[0]);
  r.artifact_free = evaluate(detector, data.b.test, fakes_test[1]);
  r.nyquist_conventional = mean_nyquist(fakes_test[0]);
  r.nyquist_artifact_free = mean_nyquist(fakes_test[1]);
  write_text(dir / "conventional_detection.csv", report_csv(r.conventional));
  write_text(dir / "artifact_free_detection.csv", report_csv(r.artifact_free));
  nlohmann::json summary = {{"conventional", to_json(r.conventional)},
                            {"artifact_free", to_json(r.artifact_free)},
                            {"mean_nyquist_energy_ratio",
                             {{"conventional", r.nyquist_conventional}, {"artifact_free", r.nyquist_artifact_free}}}};
  write_text(dir / "report.json", summary.dump(2) + "\n");
  return r;
}

Outcome counter_forensics(const EndToEnd& r, std::uint64_t steps) {
  const double quotient = r.nyquist_artifact_free / r.nyquist_conventional;
  const double drop = r.conventional.acc_fake - r.artifact_free.acc_fake;
  Outcome o;
  o.pass = quotient <= 0.5 && drop >= 0.3;
  o.detail = std::to_string(steps) + " steps; mean Nyquist ratio conventional " + fmt(r.nyquist_conventional) +
             ", artifact-free " + fmt(r.nyquist_artifact_free) + " (quotient " + fmt(quotient) +
             ", need <= 0.5); ACC(Fake) conventional " + fmt(r.conventional.acc_fake) + ", artifact-free " +
             fmt(r.artifact_free.acc_fake) + " (drop " + fmt(drop) + ", need >= 0.3); ACC " + fmt(r.conventional.acc) +
             " / " + fmt(r.artifact_free.acc);
  return o;
}

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Outcome determinism(const fs::path& first, const fs::path& second) {
  const auto a = files_under(first), b = files_under(second);
  std::size_t differing = 0;
  std::string example;
  if (a != b) {
    return {false, "runs produced different file sets (" + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()) + ")"};
  }
  for (const auto& rel : a)
    if (slurp(first / rel) != slurp(second / rel)) {
      ++differing;
      if (example.empty()) example = rel.string();
    }
  Outcome o;
  o.pass = differing == 0;
  o.detail = std::to_string(a.size()) + " files (loss CSVs, generated PNGs, detector, reports) compared, " +
             std::to_string(differing) + " differ" + (example.empty() ? "" : " (e.g. " + example + ")");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::uint64_t steps = 1000;
  std::vector<int> only;
  std::string work_dir = GANF_TEST_TMP;
  app.add_option("--steps", steps, "Training steps per variant for the end-to-end run");
  app.add_option("--only", only, "Criteria to run")->delimiter(',');
  app.add_option("--work-dir", work_dir, "Directory for end-to-end artifacts");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int c) { return selected.empty() || selected.count(c) > 0; };

  bool all_pass = true;
  auto report = [&](int criterion, const char* title, const std::function<Outcome()>& fn) {
    if (!wanted(criterion)) return;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all_pass = all_pass && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << criterion << " (" << title << "): " << o.detail
              << std::endl;
  };

  report(1, "gradient correctness", gradients);
  report(2, "artifact-free layer invariants", resampling_invariants);
  report(3, "spectral normalization", spectral_norm);
  report(4, "FFT and spectrum", fft_spectrum);
  report(5, "detection metrics", detection_metrics);

  const fs::path root = fs::path(work_dir);
  std::optional<EndToEnd> first;
  if (wanted(6) || wanted(7)) {
    try {
      first = end_to_end(root / "run1", steps);
    } catch (const std::exception& e) {
      std::cerr << "end-to-end run failed: " << e.what() << "\n";
    }
  }
  report(6, "counter-forensics direction", [&]() -> Outcome {
    if (!first) return {false, "end-to-end run failed"};
    return counter_forensics(*first, steps);
  });
  report(7, "determinism", [&]() -> Outcome {
    if (!first) return {false, "end-to-end run failed"};
    end_to_end(root / "run2", steps);
    return determinism(root / "run1", root / "run2");
  });
  return all_pass ? 0 : 1;
}
