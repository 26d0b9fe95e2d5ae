#include "ganf/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace ganf {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIOError("cannot open image file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

unsigned char quantize(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

ImageBuffer from_bytes(std::size_t h, std::size_t w, const unsigned char* rgb) {
  std::vector<double> values(h * w * 3);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = rgb[i] / 255.0;
  return ImageBuffer(h, w, std::move(values));
}

ImageBuffer decode_png(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw ImageIOError("invalid PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw ImageIOError("truncated or corrupt PNG " + path.string() + ": " + message);
  }
  return from_bytes(image.height, image.width, rgb.data());
}

// Parses the P6 header: magic, width, height, maxval, comments allowed.
ImageBuffer decode_ppm(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  std::size_t pos = 2;
  auto next_int = [&]() -> long {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw ImageIOError("malformed PPM header in " + path.string());
    }
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1'000'000) throw ImageIOError("PPM dimension too large in " + path.string());
    }
    return v;
  };
  const long w = next_int(), h = next_int(), maxval = next_int();
  if (w <= 0 || h <= 0) throw ImageIOError("PPM with empty dimensions in " + path.string());
  if (maxval <= 0 || maxval > 255) {
    throw ImageIOError("only 8-bit PPM is supported (maxval " + std::to_string(maxval) + ") in " +
                       path.string());
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw ImageIOError("malformed PPM header in " + path.string());
  }
  ++pos;
  const auto count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  if (bytes.size() - pos < count) throw ImageIOError("truncated PPM pixel data in " + path.string());
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = bytes[pos + i] / static_cast<double>(maxval);
  return ImageBuffer(static_cast<std::size_t>(h), static_cast<std::size_t>(w), std::move(values));
}

std::vector<unsigned char> to_bytes(const ImageBuffer& image) {
  std::vector<unsigned char> rgb(image.values().size());
  std::transform(image.values().begin(), image.values().end(), rgb.begin(), quantize);
  return rgb;
}

}  // namespace

ImageBuffer::ImageBuffer(std::size_t height, std::size_t width)
    : height_(height), width_(width), values_(height * width * kChannels, 0.0) {
  if (height == 0 || width == 0) throw std::invalid_argument("ImageBuffer: dimensions must be positive");
}

ImageBuffer::ImageBuffer(std::size_t height, std::size_t width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height == 0 || width == 0) throw std::invalid_argument("ImageBuffer: dimensions must be positive");
  if (values_.size() != height * width * kChannels) {
    throw std::invalid_argument("ImageBuffer: expected " + std::to_string(height * width * kChannels) +
                                " values, got " + std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("ImageBuffer: value outside [0,1]");
  }
}

ImageBuffer load_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  static constexpr std::array<unsigned char, 8> kPngMagic{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= kPngMagic.size() && std::equal(kPngMagic.begin(), kPngMagic.end(), bytes.begin())) {
    return decode_png(bytes, path);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes, path);
  throw ImageIOError("unsupported image format (expected PNG or binary PPM): " + path.string());
}

void save_image(const ImageBuffer& image, const std::filesystem::path& path) {
  if (image.values().empty()) throw ImageIOError("cannot save an empty image to " + path.string());
  const auto rgb = to_bytes(image);
  if (path.extension() == ".ppm") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageIOError("cannot write " + path.string());
    out << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!out) throw ImageIOError("failed writing " + path.string());
    return;
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, rgb.data(), 0, nullptr)) {
    throw ImageIOError("failed writing PNG " + path.string() + ": " + png.message);
  }
}

double to_file_range(double t) { return std::clamp((t + 1.0) / 2.0, 0.0, 1.0); }

Tensor to_model_tensor(const ImageBuffer& image) { return to_model_batch({&image}); }

Tensor to_model_batch(const std::vector<const ImageBuffer*>& images) {
  if (images.empty()) throw ShapeError("to_model_batch: no images");
  const std::size_t h = images.front()->height(), w = images.front()->width();
  std::vector<double> values(images.size() * 3 * h * w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = *images[n];
    if (img.height() != h || img.width() != w) {
      throw ShapeError("to_model_batch: image " + std::to_string(n) + " is " + std::to_string(img.height()) +
                       "x" + std::to_string(img.width()) + ", expected " + std::to_string(h) + "x" +
                       std::to_string(w));
    }
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          values[((n * 3 + c) * h + y) * w + x] = to_model_range(img.at(y, x, c));
        }
      }
    }
  }
  return Tensor::from({images.size(), 3, h, w}, std::move(values));
}

ImageBuffer from_model_tensor(const Tensor& tensor, std::size_t index) {
  if (tensor.rank() != 4 || tensor.dim(1) != 3 || index >= tensor.dim(0)) {
    throw ShapeError("from_model_tensor: expected [N,3,H,W] with N > " + std::to_string(index) + ", got " +
                     shape_str(tensor.shape()));
  }
  const std::size_t h = tensor.dim(2), w = tensor.dim(3);
  ImageBuffer out(h, w);
  const auto data = tensor.data();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out.at(y, x, c) = to_file_range(data[((index * 3 + c) * h + y) * w + x]);
    }
  }
  return out;
}

ImageBuffer fit_to_size(const ImageBuffer& image, std::size_t size) {
  if (size == 0) throw std::invalid_argument("fit_to_size: size must be positive");
  if (image.height() == size && image.width() == size) return image;
  const std::size_t side = std::min(image.height(), image.width());
  if (side < size) {
    throw ImageIOError("image " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                       " is smaller than the configured size " + std::to_string(size));
  }
  const std::size_t y0 = (image.height() - side) / 2, x0 = (image.width() - side) / 2;
  ImageBuffer out(size, size);
  // Box filter: each output pixel averages the source pixels whose index
  // maps onto it.
  for (std::size_t oy = 0; oy < size; ++oy) {
    const std::size_t sy0 = oy * side / size, sy1 = (oy + 1) * side / size;
    for (std::size_t ox = 0; ox < size; ++ox) {
      const std::size_t sx0 = ox * side / size, sx1 = (ox + 1) * side / size;
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (std::size_t y = sy0; y < sy1; ++y) {
          for (std::size_t x = sx0; x < sx1; ++x) acc += image.at(y0 + y, x0 + x, c);
        }
        out.at(oy, ox, c) = std::clamp(acc / static_cast<double>((sy1 - sy0) * (sx1 - sx0)), 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace ganf
