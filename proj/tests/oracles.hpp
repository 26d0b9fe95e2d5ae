#pragma once

// Independent reference computations shared by the unit and acceptance
// tests: direct-summation convolution and DFT, SVD, finite differences.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include "ganf/image.hpp"
#include "ganf/spectrum.hpp"
#include "ganf/tensor.hpp"

namespace oracle {

using ganf::Tensor;

inline Tensor random_tensor(const ganf::Shape& shape, std::mt19937_64& rng, bool requires_grad = false,
                            double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(ganf::shape_numel(shape));
  for (double& x : v) x = dist(rng);
  return Tensor::from(shape, std::move(v), requires_grad);
}

// Moves entries closer than `margin` to zero out to +-margin, so that central
// differences of relu-type ops never straddle the kink.
inline Tensor away_from_zero(Tensor t, double margin = 1e-3) {
  for (double& v : t.mutable_data())
    if (std::abs(v) < margin) v = v < 0.0 ? -margin : margin;
  return t;
}

inline ganf::ImageBuffer random_image(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(h * w * 3);
  for (double& x : v) x = dist(rng);
  return ganf::ImageBuffer(h, w, std::move(v));
}

// Nested-loop cross-correlation with zero padding.
inline std::vector<double> conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t stride,
                                  std::size_t pad, std::size_t& oh, std::size_t& ow) {
  const std::size_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  oh = (h + 2 * pad - kh) / stride + 1;
  ow = (wd + 2 * pad - kw) / stride + 1;
  std::vector<double> out(n * co * oh * ow, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double s = bias ? bias->data()[o] : 0.0;
          for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long iy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
                const long ix = static_cast<long>(xx * stride + j) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                s += x.at({b, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)}) * w.at({o, c, i, j});
              }
          out[((b * co + o) * oh + y) * ow + xx] = s;
        }
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Direct O(N^4) 2D DFT.
inline std::vector<std::complex<double>> dft2d(const std::vector<double>& plane, std::size_t h, std::size_t w) {
  const double pi = std::acos(-1.0);
  std::vector<std::complex<double>> out(h * w);
  for (std::size_t ky = 0; ky < h; ++ky)
    for (std::size_t kx = 0; kx < w; ++kx) {
      std::complex<double> s = 0.0;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const double angle = -2.0 * pi *
                               (static_cast<double>((ky * y) % h) / static_cast<double>(h) +
                                static_cast<double>((kx * x) % w) / static_cast<double>(w));
          s += plane[y * w + x] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
      out[ky * w + kx] = s;
    }
  return out;
}

inline std::vector<std::complex<double>> dft1d(const std::vector<std::complex<double>>& x) {
  const double pi = std::acos(-1.0);
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = -2.0 * pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      out[k] += x[t] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
  return out;
}

// log_spectrum recomputed from direct-summation DFTs.
inline ganf::SpectrumProfile naive_profile(const ganf::ImageBuffer& img) {
  const std::size_t h = img.height(), w = img.width();
  const auto gray = ganf::grayscale(img);
  const auto spec = dft2d(gray, h, w);
  ganf::SpectrumProfile p;
  p.height = h;
  p.width = w;
  p.spectrum_2d.resize(h * w);
  for (std::size_t ky = 0; ky < h; ++ky)
    for (std::size_t kx = 0; kx < w; ++kx)
      p.spectrum_2d[((ky + h / 2) % h) * w + (kx + w / 2) % w] = std::log1p(std::abs(spec[ky * w + kx]));
  p.spectrum_1d.assign(w / 2 + 1, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    std::vector<std::complex<double>> row(gray.begin() + static_cast<std::ptrdiff_t>(y * w),
                                          gray.begin() + static_cast<std::ptrdiff_t>((y + 1) * w));
    const auto r = dft1d(row);
    for (std::size_t k = 0; k <= w / 2; ++k) p.spectrum_1d[k] += std::log1p(std::abs(r[k])) / static_cast<double>(h);
  }
  return p;
}

inline double profile_error(const ganf::SpectrumProfile& a, const ganf::SpectrumProfile& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.spectrum_2d.size(); ++i) m = std::max(m, std::abs(a.spectrum_2d[i] - b.spectrum_2d[i]));
  for (std::size_t i = 0; i < a.spectrum_1d.size(); ++i) m = std::max(m, std::abs(a.spectrum_1d[i] - b.spectrum_1d[i]));
  return m;
}

// Largest singular value of a weight flattened to (dim 0) x (rest).
inline double largest_singular_value(const Tensor& w) {
  const std::size_t rows = w.dim(0), cols = w.numel() / rows;
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = w.data()[r * cols + c];
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

struct GradCheck {
  double max_relative_error = 0.0;
  std::size_t entries = 0;
};

// Compares backward() against central differences (step h) for every
// requires_grad tensor in `params`.  At most `max_entries` entries per tensor
// are probed (evenly spaced).  The error per tensor is
// ||analytic - numeric|| / max(||analytic||, ||numeric||, floor).  The floor
// keeps the ratio meaningful for gradients that vanish identically, where the
// central difference is pure roundoff (about 1e-9 at h = 1e-6).
inline GradCheck check_gradients(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                                 double h = 1e-5, std::size_t max_entries = 1u << 30, double floor = 1e-4) {
  for (auto& p : params) p.zero_grad();
  loss_fn().backward();
  GradCheck result;
  for (auto& p : params) {
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    const std::size_t n = p.numel();
    const std::size_t step = std::max<std::size_t>(1, n / std::min(n, max_entries));
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < n; i += step) {
      ganf::NoGradGuard no_grad;
      auto data = p.mutable_data();
      const double saved = data[i];
      data[i] = saved + h;
      const double up = loss_fn().item();
      data[i] = saved - h;
      const double down = loss_fn().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
      ++result.entries;
    }
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), floor});
    result.max_relative_error = std::max(result.max_relative_error, rel);
  }
  return result;
}

}  // namespace oracle
