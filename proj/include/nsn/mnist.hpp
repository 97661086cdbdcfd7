#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nsn/tensor.hpp"

namespace nsn {

inline constexpr std::uint32_t kIdxImagesMagic = 2051;
inline constexpr std::uint32_t kIdxLabelsMagic = 2049;
inline constexpr std::size_t kImagePixels = 28 * 28;
inline constexpr std::size_t kNumClasses = 10;

using Labels = std::vector<std::uint8_t>;

/// Undecoded IDX image tensor: count images of rows*cols unsigned bytes each.
struct RawImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;
};

/// Parses an uncompressed IDX3 image file (magic 2051).
RawImages parse_idx_images(std::span<const std::uint8_t> bytes);

/// Parses an uncompressed IDX1 label file (magic 2049); labels must be in [0, 9].
Labels parse_idx_labels(std::span<const std::uint8_t> bytes);

std::array<std::uint8_t, 16> idx_images_header(const RawImages& images);
std::array<std::uint8_t, 8> idx_labels_header(std::uint32_t count);

/// Pixel / 255, one image per row.
Matrix normalize(const RawImages& raw);

struct Dataset {
  Matrix images;  // count x 784, values in [0, 1]
  Labels labels;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Checks the Dataset invariants and throws ShapeError / ValueError.
void validate(const Dataset& data);

struct MnistData {
  Dataset train;
  Dataset test;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Loads the four standard IDX files from `dir`.
MnistData load_mnist(const std::filesystem::path& dir);

struct BatchPlan {
  std::size_t batch_size = 128;
  bool shuffle = true;
  std::uint64_t seed = 0;
};

struct Batch {
  Matrix images;
  Labels labels;
};

/// Sample order for one epoch: a pure function of (seed, epoch), or the
/// identity when shuffling is off.
std::vector<std::size_t> epoch_order(std::size_t count, const BatchPlan& plan, std::uint64_t epoch);

/// One epoch of mini-batches, materialized lazily. The last batch may be short.
class EpochBatches {
 public:
  EpochBatches(const Dataset& data, const BatchPlan& plan, std::uint64_t epoch);

  std::size_t size() const noexcept { return num_batches_; }
  Batch operator[](std::size_t index) const;
  std::span<const std::size_t> order() const noexcept { return order_; }

 private:
  const Dataset* data_;
  std::size_t batch_size_;
  std::size_t num_batches_;
  std::vector<std::size_t> order_;
};

/// Gathers the given rows of a dataset into a batch.
Batch gather(const Dataset& data, std::span<const std::size_t> indices);

}  // namespace nsn
