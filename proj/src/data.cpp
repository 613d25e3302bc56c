#include "bprg/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>

#include "bprg/error.hpp"

namespace bprg {

Shape Dataset::sample_shape() const {
  const auto& s = features.shape();
  return Shape(s.begin() + 1, s.end());
}

void Dataset::validate() const {
  if (features.rank() < 2 || features.dim(0) != labels.size())
    throw ConfigError("dataset: feature rows (" + shape_to_string(features.shape()) + ") do not match " +
                      std::to_string(labels.size()) + " labels");
  for (Label l : labels)
    if (l >= class_count)
      throw ConfigError("dataset: label " + std::to_string(l) + " >= class count " + std::to_string(class_count));
}

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t offset, const std::filesystem::path& path) {
  if (offset + 4 > buf.size()) throw FormatError(path.string() + ": truncated header");
  return (std::uint32_t(buf[offset]) << 24) | (std::uint32_t(buf[offset + 1]) << 16) |
         (std::uint32_t(buf[offset + 2]) << 8) | std::uint32_t(buf[offset + 3]);
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  out.write(bytes, 4);
}

std::string hex(std::uint32_t v) {
  static const char* digits = "0123456789ABCDEF";
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) s += digits[(v >> shift) & 0xF];
  return s;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, IdxLayout layout,
                 std::size_t limit) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);

  const std::uint32_t img_magic = read_be32(img, 0, images);
  if (img_magic != kImageMagic) throw FormatError(images.string() + ": bad magic " + hex(img_magic));
  const std::uint32_t lab_magic = read_be32(lab, 0, labels);
  if (lab_magic != kLabelMagic) throw FormatError(labels.string() + ": bad magic " + hex(lab_magic));

  const std::size_t count = read_be32(img, 4, images);
  const std::size_t rows = read_be32(img, 8, images);
  const std::size_t cols = read_be32(img, 12, images);
  const std::size_t label_count = read_be32(lab, 4, labels);
  if (count != label_count)
    throw FormatError("IDX count mismatch: " + std::to_string(count) + " images vs " + std::to_string(label_count) +
                      " labels");
  if (count == 0 || rows == 0 || cols == 0) throw FormatError(images.string() + ": empty image set");

  const std::size_t pixels = rows * cols;
  if (img.size() != 16 + count * pixels)
    throw FormatError(images.string() + ": expected " + std::to_string(16 + count * pixels) + " bytes, found " +
                      std::to_string(img.size()));
  if (lab.size() != 8 + count)
    throw FormatError(labels.string() + ": expected " + std::to_string(8 + count) + " bytes, found " +
                      std::to_string(lab.size()));

  const std::size_t n = limit ? std::min(limit, count) : count;
  std::vector<float> values(n * pixels);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = float(img[16 + i]) / 255.0f;

  Dataset ds;
  ds.features = layout == IdxLayout::flat ? Tensor(Shape{n, pixels}, std::move(values))
                                          : Tensor(Shape{n, 1, rows, cols}, std::move(values));
  ds.labels.assign(lab.begin() + 8, lab.begin() + 8 + std::ptrdiff_t(n));
  ds.class_count = std::size_t(*std::max_element(ds.labels.begin(), ds.labels.end())) + 1;
  return ds;
}

void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels, const Dataset& ds) {
  const auto sample = ds.sample_shape();
  std::size_t rows = 1, cols = 0;
  if (sample.size() == 1) {
    cols = sample[0];
  } else if (sample.size() == 3 && sample[0] == 1) {
    rows = sample[1];
    cols = sample[2];
  } else {
    throw UsageError("write_idx: features must be [n x d] or [n x 1 x h x w]");
  }

  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw FormatError("write_idx: cannot open output files");
  put_be32(img, kImageMagic);
  put_be32(img, std::uint32_t(ds.size()));
  put_be32(img, std::uint32_t(rows));
  put_be32(img, std::uint32_t(cols));
  for (float v : ds.features.data()) {
    const long byte = std::lround(std::clamp(double(v), 0.0, 1.0) * 255.0);
    img.put(char(std::uint8_t(byte)));
  }
  put_be32(lab, kLabelMagic);
  put_be32(lab, std::uint32_t(ds.size()));
  for (Label l : ds.labels) {
    if (l > 255) throw UsageError("write_idx: label does not fit in a byte");
    lab.put(char(std::uint8_t(l)));
  }
  if (!img || !lab) throw FormatError("write_idx: write failed");
}

Dataset synth_blobs(std::size_t n, std::size_t d, std::size_t classes, double spread, RngState& rng) {
  if (n == 0 || d == 0 || classes == 0) throw ConfigError("synth_blobs: n, d and classes must be positive");
  if (d < 64 && classes > (std::size_t(1) << d))
    throw ConfigError("synth_blobs: " + std::to_string(classes) + " classes need more than " + std::to_string(d) +
                      " feature bits");
  if (!(spread >= 0)) throw ConfigError("synth_blobs: spread must be non-negative");

  std::vector<float> values(n * d);
  Dataset ds;
  ds.labels.resize(n);
  ds.class_count = classes;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    ds.labels[i] = Label(c);
    for (std::size_t j = 0; j < d; ++j) {
      const double mean = j < 64 ? double((c >> j) & 1u) : 0.0;
      const double v = mean + spread * (2.0 * rng.uniform() - 1.0);
      values[i * d + j] = float(std::clamp(v, 0.0, 1.0));
    }
  }
  ds.features = Tensor(Shape{n, d}, std::move(values));
  return ds;
}

std::vector<std::vector<std::size_t>> minibatches(const Dataset& ds, std::size_t batch_size, RngState& rng) {
  if (batch_size == 0) throw UsageError("minibatches: batch size must be positive");
  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + std::ptrdiff_t(start), order.begin() + std::ptrdiff_t(end));
  }
  return batches;
}

std::pair<Tensor, std::vector<Label>> gather(const Dataset& ds, std::span<const std::size_t> indices) {
  if (indices.empty()) throw UsageError("gather: empty index list");
  const std::size_t row = ds.features.numel() / ds.size();
  Shape shape = ds.features.shape();
  shape[0] = indices.size();
  std::vector<float> values(indices.size() * row);
  std::vector<Label> labels(indices.size());
  const auto src = ds.features.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t k = indices[i];
    if (k >= ds.size()) throw UsageError("gather: index out of range");
    std::copy_n(src.begin() + std::ptrdiff_t(k * row), row, values.begin() + std::ptrdiff_t(i * row));
    labels[i] = ds.labels[k];
  }
  return {Tensor(std::move(shape), std::move(values)), std::move(labels)};
}

Dataset head(const Dataset& ds, std::size_t count) {
  const std::size_t n = std::min(count, ds.size());
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  auto [features, labels] = gather(ds, idx);
  return Dataset{std::move(features), std::move(labels), ds.class_count};
}

}  // namespace bprg
