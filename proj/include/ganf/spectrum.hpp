#pragma once

// Frequency-domain fingerprints of images: centred 2D log-magnitude
// spectrum, mean 1D horizontal spectrum, and a Nyquist-energy summary of
// checkerboard artifacts.

#include <complex>
#include <cstddef>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "ganf/image.hpp"

namespace ganf {

using Complex = std::complex<double>;

// Unnormalized forward DFT, X[k] = sum_n x[n] exp(-2 pi i k n / N), for any
// N >= 1: iterative radix-2 for powers of two, Bluestein otherwise.
void fft(std::vector<Complex>& data);
// Row-major H x W real plane -> row-major H x W spectrum.
std::vector<Complex> fft2d(const std::vector<double>& plane, std::size_t height, std::size_t width);

// 0.299 R + 0.587 G + 0.114 B, row-major.
std::vector<double> grayscale(const ImageBuffer& image);

struct SpectrumProfile {
  std::size_t height = 0;
  std::size_t width = 0;
  // log(1 + |DFT|), DC moved to (height/2, width/2); row-major.
  std::vector<double> spectrum_2d;
  // Mean over rows of log(1 + |row DFT|) for k = 0 .. width/2.
  std::vector<double> spectrum_1d;

  double at(std::size_t y, std::size_t x) const { return spectrum_2d[y * width + x]; }
  bool operator==(const SpectrumProfile&) const = default;
};

// Requires H, W >= 4.
SpectrumProfile log_spectrum(const ImageBuffer& image);

// Power on the Nyquist row and column (even dimensions only) over all
// non-DC power.  0 for images with no AC energy.
double nyquist_energy_ratio(const ImageBuffer& image);

struct PeakFrequency {
  // Signed bin indices in (-H/2, H/2] and (-W/2, W/2].
  long fy;
  long fx;
  // Log-magnitude excess over the mean of the 8 circular neighbours.
  double prominence;
};

struct ArtifactReport {
  double nyquist_energy_ratio = 0.0;
  std::vector<PeakFrequency> peak_frequencies;
};

ArtifactReport analyze_artifacts(const ImageBuffer& image, double prominence_threshold = 1.0);

nlohmann::json to_json(const ArtifactReport& report);

// 8-bit PGM of spectrum_2d, min-max scaled to 0..255 (all zeros when flat).
void write_spectrum_pgm(const SpectrumProfile& profile, const std::filesystem::path& path);
// H lines of W comma-separated values, round-trip precision.
void write_spectrum_2d_csv(const SpectrumProfile& profile, const std::filesystem::path& path);
// Header "frequency,log_magnitude", one row per bin.
void write_spectrum_1d_csv(const SpectrumProfile& profile, const std::filesystem::path& path);
// Rebuilds a profile from the two CSV files.
SpectrumProfile read_spectrum_csv(const std::filesystem::path& csv_2d, const std::filesystem::path& csv_1d);

}  // namespace ganf
