#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "ganf/tensor.hpp"

namespace ganf {

// H x W x 3 image, interleaved RGB, values in [0,1].
class ImageBuffer {
 public:
  static constexpr std::size_t kChannels = 3;

  ImageBuffer() = default;
  ImageBuffer(std::size_t height, std::size_t width);
  // Throws std::invalid_argument unless values has H*W*3 entries in [0,1].
  ImageBuffer(std::size_t height, std::size_t width, std::vector<double> values);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double& at(std::size_t y, std::size_t x, std::size_t c) { return values_[(y * width_ + x) * kChannels + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return values_[(y * width_ + x) * kChannels + c];
  }

  bool operator==(const ImageBuffer&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

class ImageIOError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reads 8-bit PNG (any colour type, converted to RGB) or binary PPM (P6,
// maxval <= 255).  The format is sniffed from the file contents.
ImageBuffer load_image(const std::filesystem::path& path);
// Writes 8-bit RGB; ".ppm" selects P6, anything else PNG.  Values are
// rounded to the nearest 1/255.
void save_image(const ImageBuffer& image, const std::filesystem::path& path);

// [0,1] <-> [-1,1]
inline double to_model_range(double v) { return 2.0 * v - 1.0; }
double to_file_range(double t);

// [1,3,H,W] tensor in model range.
Tensor to_model_tensor(const ImageBuffer& image);
// Stacks same-size images into [N,3,H,W].
Tensor to_model_batch(const std::vector<const ImageBuffer*>& images);
// Picks image `index` of an [N,3,H,W] tensor, mapping back to [0,1] with clamping.
ImageBuffer from_model_tensor(const Tensor& tensor, std::size_t index = 0);

// Center-crops to a square and box-downscales to `size` x `size`.  Images
// that already have that size are returned unchanged.
ImageBuffer fit_to_size(const ImageBuffer& image, std::size_t size);

}  // namespace ganf
