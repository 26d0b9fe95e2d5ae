#include "ganf/spectrum.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ganf/numfmt.hpp"

namespace ganf {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

void fft_radix2(std::vector<Complex>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    std::vector<Complex> twiddle(half);
    for (std::size_t k = 0; k < half; ++k) {
      twiddle[k] = std::polar(1.0, -2.0 * kPi * static_cast<double>(k) / static_cast<double>(len));
    }
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = a[start + k];
        const Complex v = a[start + k + half] * twiddle[k];
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

void inverse_radix2(std::vector<Complex>& a) {
  for (auto& x : a) x = std::conj(x);
  fft_radix2(a);
  const double scale = 1.0 / static_cast<double>(a.size());
  for (auto& x : a) x = std::conj(x) * scale;
}

// Chirp-z: X[k] = conj(c_k) * sum_n (x[n] conj(c_n)) c_{k-n}, c_m = exp(i pi m^2 / N).
void fft_bluestein(std::vector<Complex>& a) {
  const std::size_t n = a.size();
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  std::vector<Complex> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k2 = (k * k) % (2 * n);  // keeps the angle argument small
    chirp[k] = std::polar(1.0, kPi * static_cast<double>(k2) / static_cast<double>(n));
  }
  std::vector<Complex> lhs(m), rhs(m);
  for (std::size_t k = 0; k < n; ++k) lhs[k] = a[k] * std::conj(chirp[k]);
  rhs[0] = chirp[0];
  for (std::size_t k = 1; k < n; ++k) rhs[k] = rhs[m - k] = chirp[k];
  fft_radix2(lhs);
  fft_radix2(rhs);
  for (std::size_t i = 0; i < m; ++i) lhs[i] *= rhs[i];
  inverse_radix2(lhs);
  for (std::size_t k = 0; k < n; ++k) a[k] = lhs[k] * std::conj(chirp[k]);
}

void require_spectrum_size(const ImageBuffer& image) {
  if (image.height() < 4 || image.width() < 4) {
    throw std::invalid_argument("spectrum needs an image of at least 4x4, got " +
                                std::to_string(image.height()) + "x" + std::to_string(image.width()));
  }
}

std::vector<double> parse_csv_row(const std::string& line, const std::filesystem::path& path) {
  std::vector<double> out;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    double v = 0.0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc()) throw std::runtime_error("malformed number in " + path.string());
    out.push_back(v);
    p = next;
    if (p < end && *p == ',') ++p;
  }
  return out;
}

}  // namespace

void fft(std::vector<Complex>& data) {
  if (data.size() <= 1) return;
  if (is_power_of_two(data.size())) {
    fft_radix2(data);
  } else {
    fft_bluestein(data);
  }
}

std::vector<Complex> fft2d(const std::vector<double>& plane, std::size_t height, std::size_t width) {
  if (plane.size() != height * width) throw std::invalid_argument("fft2d: plane size mismatch");
  std::vector<Complex> out(plane.begin(), plane.end());
  std::vector<Complex> line(width);
  for (std::size_t y = 0; y < height; ++y) {
    std::copy(out.begin() + static_cast<std::ptrdiff_t>(y * width),
              out.begin() + static_cast<std::ptrdiff_t>((y + 1) * width), line.begin());
    fft(line);
    std::copy(line.begin(), line.end(), out.begin() + static_cast<std::ptrdiff_t>(y * width));
  }
  line.resize(height);
  for (std::size_t x = 0; x < width; ++x) {
    for (std::size_t y = 0; y < height; ++y) line[y] = out[y * width + x];
    fft(line);
    for (std::size_t y = 0; y < height; ++y) out[y * width + x] = line[y];
  }
  return out;
}

std::vector<double> grayscale(const ImageBuffer& image) {
  std::vector<double> g(image.height() * image.width());
  for (std::size_t y = 0; y < image.height(); ++y) {
    for (std::size_t x = 0; x < image.width(); ++x) {
      g[y * image.width() + x] =
          0.299 * image.at(y, x, 0) + 0.587 * image.at(y, x, 1) + 0.114 * image.at(y, x, 2);
    }
  }
  return g;
}

SpectrumProfile log_spectrum(const ImageBuffer& image) {
  require_spectrum_size(image);
  const std::size_t h = image.height(), w = image.width();
  const auto gray = grayscale(image);
  const auto spec = fft2d(gray, h, w);

  SpectrumProfile p;
  p.height = h;
  p.width = w;
  p.spectrum_2d.resize(h * w);
  for (std::size_t ky = 0; ky < h; ++ky) {
    for (std::size_t kx = 0; kx < w; ++kx) {
      const std::size_t y = (ky + h / 2) % h, x = (kx + w / 2) % w;
      p.spectrum_2d[y * w + x] = std::log1p(std::abs(spec[ky * w + kx]));
    }
  }

  p.spectrum_1d.assign(w / 2 + 1, 0.0);
  std::vector<Complex> row(w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) row[x] = gray[y * w + x];
    fft(row);
    for (std::size_t k = 0; k <= w / 2; ++k) p.spectrum_1d[k] += std::log1p(std::abs(row[k]));
  }
  for (double& v : p.spectrum_1d) v /= static_cast<double>(h);
  return p;
}

double nyquist_energy_ratio(const ImageBuffer& image) {
  require_spectrum_size(image);
  const std::size_t h = image.height(), w = image.width();
  const auto spec = fft2d(grayscale(image), h, w);
  double total = 0.0, nyquist = 0.0;
  for (std::size_t ky = 0; ky < h; ++ky) {
    for (std::size_t kx = 0; kx < w; ++kx) {
      if (ky == 0 && kx == 0) continue;
      const double power = std::norm(spec[ky * w + kx]);
      total += power;
      const bool on_nyquist = (h % 2 == 0 && ky == h / 2) || (w % 2 == 0 && kx == w / 2);
      if (on_nyquist) nyquist += power;
    }
  }
  // Rounding leaves a tiny AC residue on constant images.
  const double dc = std::norm(spec[0]);
  if (total <= 1e-24 * std::max(1.0, dc)) return 0.0;
  return std::clamp(nyquist / total, 0.0, 1.0);
}

ArtifactReport analyze_artifacts(const ImageBuffer& image, double prominence_threshold) {
  ArtifactReport report;
  report.nyquist_energy_ratio = nyquist_energy_ratio(image);
  const auto profile = log_spectrum(image);
  const std::size_t h = profile.height, w = profile.width;
  for (std::size_t ky = 0; ky < h; ++ky) {
    for (std::size_t kx = 0; kx < w; ++kx) {
      if (ky == 0 && kx == 0) continue;
      const std::size_t y = (ky + h / 2) % h, x = (kx + w / 2) % w;
      double neighbours = 0.0;
      for (std::size_t oy = 0; oy < 3; ++oy) {
        for (std::size_t ox = 0; ox < 3; ++ox) {
          if (oy == 1 && ox == 1) continue;
          neighbours += profile.at((y + h + oy - 1) % h, (x + w + ox - 1) % w);
        }
      }
      const double excess = profile.at(y, x) - neighbours / 8.0;
      if (excess > prominence_threshold) {
        const long fy = ky <= h / 2 ? static_cast<long>(ky) : static_cast<long>(ky) - static_cast<long>(h);
        const long fx = kx <= w / 2 ? static_cast<long>(kx) : static_cast<long>(kx) - static_cast<long>(w);
        report.peak_frequencies.push_back({fy, fx, excess});
      }
    }
  }
  return report;
}

nlohmann::json to_json(const ArtifactReport& report) {
  nlohmann::json peaks = nlohmann::json::array();
  for (const auto& p : report.peak_frequencies) {
    peaks.push_back({{"fy", p.fy}, {"fx", p.fx}, {"prominence", p.prominence}});
  }
  return {{"nyquist_energy_ratio", report.nyquist_energy_ratio}, {"peak_frequencies", peaks}};
}

void write_spectrum_pgm(const SpectrumProfile& profile, const std::filesystem::path& path) {
  const auto [lo, hi] = std::minmax_element(profile.spectrum_2d.begin(), profile.spectrum_2d.end());
  const double range = *hi - *lo;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << profile.width << ' ' << profile.height << "\n255\n";
  for (double v : profile.spectrum_2d) {
    const double t = range > 0.0 ? (v - *lo) / range : 0.0;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
  }
}

void write_spectrum_2d_csv(const SpectrumProfile& profile, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t y = 0; y < profile.height; ++y) {
    for (std::size_t x = 0; x < profile.width; ++x) {
      if (x) out << ',';
      out << format_double(profile.at(y, x));
    }
    out << '\n';
  }
}

void write_spectrum_1d_csv(const SpectrumProfile& profile, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "frequency,log_magnitude\n";
  for (std::size_t k = 0; k < profile.spectrum_1d.size(); ++k) {
    out << k << ',' << format_double(profile.spectrum_1d[k]) << '\n';
  }
}

SpectrumProfile read_spectrum_csv(const std::filesystem::path& csv_2d, const std::filesystem::path& csv_1d) {
  SpectrumProfile p;
  std::ifstream in2(csv_2d);
  if (!in2) throw std::runtime_error("cannot read " + csv_2d.string());
  std::string line;
  while (std::getline(in2, line)) {
    if (line.empty()) continue;
    auto row = parse_csv_row(line, csv_2d);
    if (p.width == 0) p.width = row.size();
    if (row.size() != p.width) throw std::runtime_error("ragged rows in " + csv_2d.string());
    p.spectrum_2d.insert(p.spectrum_2d.end(), row.begin(), row.end());
    ++p.height;
  }
  std::ifstream in1(csv_1d);
  if (!in1) throw std::runtime_error("cannot read " + csv_1d.string());
  std::getline(in1, line);
  if (line != "frequency,log_magnitude") throw std::runtime_error("unexpected header in " + csv_1d.string());
  while (std::getline(in1, line)) {
    if (line.empty()) continue;
    auto row = parse_csv_row(line, csv_1d);
    if (row.size() != 2) throw std::runtime_error("expected 2 columns in " + csv_1d.string());
    p.spectrum_1d.push_back(row[1]);
  }
  return p;
}

}  // namespace ganf
