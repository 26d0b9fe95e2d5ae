#include "ganf/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "ganf/nn.hpp"

namespace ganf {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

struct DomainStyle {
  std::array<double, 3> background;
  std::array<double, 3> blob;
  double min_radius;  // fraction of the image size
  double max_radius;
  std::size_t max_blobs;
};

const DomainStyle& style_for(Domain d) {
  static const DomainStyle a{{0.55, 0.42, 0.30}, {0.82, 0.12, 0.10}, 0.16, 0.26, 2};
  static const DomainStyle b{{0.22, 0.30, 0.45}, {0.96, 0.58, 0.12}, 0.20, 0.32, 2};
  return d == Domain::A ? a : b;
}

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

const char* folder_name(Domain d, Split s) {
  if (s == Split::Train) return d == Domain::A ? "trainA" : "trainB";
  return d == Domain::A ? "testA" : "testB";
}

void write_split(const std::vector<ImageBuffer>& images, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  char name[32];
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::snprintf(name, sizeof(name), "%05zu.png", i);
    save_image(images[i], dir / name);
  }
}

}  // namespace

void SyntheticSpec::validate() const {
  if (image_size < 4) throw std::invalid_argument("SyntheticSpec: image_size must be at least 4");
  if (n_train < 1 || n_test < 1) throw std::invalid_argument("SyntheticSpec: n_train and n_test must be >= 1");
  if (!(grain_stddev >= 0.0)) throw std::invalid_argument("SyntheticSpec: grain_stddev must be >= 0");
}

ImageBuffer synth_image(const SyntheticSpec& spec, Domain domain, Split split, std::size_t index) {
  spec.validate();
  std::uint64_t seed = splitmix64(spec.rng_seed);
  seed = splitmix64(seed ^ (domain == Domain::A ? 0xA11CEULL : 0xB0BULL));
  seed = splitmix64(seed ^ (split == Split::Train ? 0x7124ULL : 0x7E57ULL));
  seed = splitmix64(seed ^ index);
  std::mt19937_64 rng(seed);

  const auto& style = style_for(domain);
  const std::size_t size = spec.image_size;
  const double s = static_cast<double>(size);

  std::array<double, 3> bg{};
  for (std::size_t c = 0; c < 3; ++c) bg[c] = style.background[c] + uniform(rng, -0.05, 0.05);

  struct Wave {
    double fy, fx, phase, amp;
  };
  std::array<Wave, 3> waves{};
  for (auto& wave : waves) {
    do {
      wave.fy = static_cast<double>(uniform_int(rng, 0, 6)) - 3.0;
      wave.fx = static_cast<double>(uniform_int(rng, 0, 6)) - 3.0;
    } while (wave.fy == 0.0 && wave.fx == 0.0);
    wave.phase = uniform(rng, 0.0, 2.0 * kPi);
    wave.amp = uniform(rng, 0.02, 0.05);
  }

  struct Blob {
    double cy, cx, r;
    std::array<double, 3> color;
  };
  std::vector<Blob> blobs(uniform_int(rng, 1, style.max_blobs));
  for (auto& blob : blobs) {
    blob.r = s * uniform(rng, style.min_radius, style.max_radius);
    blob.cy = uniform(rng, blob.r, s - blob.r);
    blob.cx = uniform(rng, blob.r, s - blob.r);
    for (std::size_t c = 0; c < 3; ++c) blob.color[c] = style.blob[c] + uniform(rng, -0.04, 0.04);
  }

  ImageBuffer img(size, size);
  const double edge = std::max(1.0, 0.06 * s);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      double texture = 0.0;
      for (const auto& wave : waves) {
        texture += wave.amp * std::sin(2.0 * kPi * (wave.fy * static_cast<double>(y) + wave.fx * static_cast<double>(x)) / s + wave.phase);
      }
      std::array<double, 3> px{bg[0] + texture, bg[1] + texture, bg[2] + texture};
      for (const auto& blob : blobs) {
        const double dy = static_cast<double>(y) + 0.5 - blob.cy, dx = static_cast<double>(x) + 0.5 - blob.cx;
        const double d = std::sqrt(dy * dy + dx * dx);
        const double alpha = 1.0 - smoothstep(blob.r - edge, blob.r + edge, d);
        if (alpha <= 0.0) continue;
        const double shade = 1.08 - 0.3 * std::min(1.0, (d / blob.r) * (d / blob.r));
        for (std::size_t c = 0; c < 3; ++c) px[c] = (1.0 - alpha) * px[c] + alpha * blob.color[c] * shade;
      }
      const double grain = spec.grain_stddev * standard_normal(rng);
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = std::clamp(px[c] + grain, 0.0, 1.0);
    }
  }
  return img;
}

Dataset synth_dataset(const SyntheticSpec& spec) {
  spec.validate();
  Dataset ds;
  for (Domain d : {Domain::A, Domain::B}) {
    DomainSet& set = d == Domain::A ? ds.a : ds.b;
    for (std::size_t i = 0; i < spec.n_train; ++i) set.train.push_back(synth_image(spec, d, Split::Train, i));
    for (std::size_t i = 0; i < spec.n_test; ++i) set.test.push_back(synth_image(spec, d, Split::Test, i));
  }
  return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& root) {
  write_split(dataset.a.train, root / folder_name(Domain::A, Split::Train));
  write_split(dataset.b.train, root / folder_name(Domain::B, Split::Train));
  write_split(dataset.a.test, root / folder_name(Domain::A, Split::Test));
  write_split(dataset.b.test, root / folder_name(Domain::B, Split::Test));
}

Dataset load_dataset(const std::filesystem::path& root, std::size_t image_size) {
  Dataset ds;
  ds.a.train = load_folder(root / folder_name(Domain::A, Split::Train), image_size);
  ds.b.train = load_folder(root / folder_name(Domain::B, Split::Train), image_size);
  ds.a.test = load_folder(root / folder_name(Domain::A, Split::Test), image_size);
  ds.b.test = load_folder(root / folder_name(Domain::B, Split::Test), image_size);
  return ds;
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ImageIOError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<ImageBuffer> load_folder(const std::filesystem::path& dir, std::size_t image_size) {
  std::vector<ImageBuffer> images;
  for (const auto& path : list_images(dir)) images.push_back(fit_to_size(load_image(path), image_size));
  return images;
}

}  // namespace ganf
