#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "bprg/ops.hpp"
#include "bprg/rng.hpp"
#include "bprg/tensor.hpp"

namespace bprg {

using ops::Label;

// Features are [n x d] or [n x c x h x w], normalized to [0, 1].
struct Dataset {
  Tensor features;
  std::vector<Label> labels;
  std::size_t class_count = 0;

  std::size_t size() const { return labels.size(); }
  // Shape of one sample (features shape without the leading n).
  Shape sample_shape() const;
  void validate() const;
};

enum class IdxLayout { flat, image };

// MNIST-style IDX pair. Pixels are scaled by 1/255. `limit` keeps the first
// `limit` samples when non-zero. Throws FormatError on bad magic, truncation
// or a count mismatch between the two files.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 IdxLayout layout = IdxLayout::flat, std::size_t limit = 0);

// Inverse of load_idx: features are rounded back to bytes. Images are written
// with rows = 1 for flat datasets.
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels, const Dataset& ds);

// Class c is centred on the d-bit pattern of c (bit j -> coordinate j).
// Sample i has class i % classes; coordinates are mean + spread * (2u - 1),
// clamped to [0, 1], drawn sample-major.
Dataset synth_blobs(std::size_t n, std::size_t d, std::size_t classes, double spread, RngState& rng);

// Fisher-Yates permutation from `rng`, cut into contiguous chunks; the last
// chunk may be short.
std::vector<std::vector<std::size_t>> minibatches(const Dataset& ds, std::size_t batch_size, RngState& rng);

// Copies the selected samples into a batch tensor and label vector.
std::pair<Tensor, std::vector<Label>> gather(const Dataset& ds, std::span<const std::size_t> indices);

// First `count` samples (or all, if fewer).
Dataset head(const Dataset& ds, std::size_t count);

}  // namespace bprg
