#pragma once

// Synthetic two-domain image sets and the on-disk CycleGAN dataset layout
// root/{trainA,trainB,testA,testB}/*.png.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ganf/image.hpp"

namespace ganf {

enum class Domain { A, B };
enum class Split { Train, Test };

// Domain A: red, smaller blobs on a warm brown background.  Domain B:
// orange, larger blobs on a cool blue-grey background.  Both carry a
// low-frequency luminance texture and per-pixel luminance grain (about
// 1.5/255 by default, a clean camera's noise floor).  The background colours
// put the mean red channel of A roughly 0.2 above that of B.
struct SyntheticSpec {
  std::size_t image_size = 32;
  std::size_t n_train = 200;
  std::size_t n_test = 50;
  double grain_stddev = 0.006;
  std::uint64_t rng_seed = 7;

  void validate() const;
};

struct DomainSet {
  std::vector<ImageBuffer> train;
  std::vector<ImageBuffer> test;
};

struct Dataset {
  DomainSet a;
  DomainSet b;
};

// Every image has its own seed stream derived from (seed, domain, split, index).
ImageBuffer synth_image(const SyntheticSpec& spec, Domain domain, Split split, std::size_t index);
Dataset synth_dataset(const SyntheticSpec& spec);

void write_dataset(const Dataset& dataset, const std::filesystem::path& root);
Dataset load_dataset(const std::filesystem::path& root, std::size_t image_size);

// PNG / PPM files of a directory in lexicographic order.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);
// Loads every image in `dir`, fitting each to image_size x image_size.
std::vector<ImageBuffer> load_folder(const std::filesystem::path& dir, std::size_t image_size);

}  // namespace ganf
