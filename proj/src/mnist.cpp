#include "nsn/mnist.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "nsn/rng.hpp"

namespace nsn {
namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::uint8_t* out, std::uint32_t v) {
  out[0] = static_cast<std::uint8_t>(v >> 24);
  out[1] = static_cast<std::uint8_t>(v >> 16);
  out[2] = static_cast<std::uint8_t>(v >> 8);
  out[3] = static_cast<std::uint8_t>(v);
}

void require_length(std::span<const std::uint8_t> bytes, std::size_t expected, const char* what) {
  if (bytes.size() < expected) {
    throw LengthError(std::string(what) + ": truncated, expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(bytes.size()));
  }
}

}  // namespace

RawImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  require_length(bytes, 16, "IDX images header");
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxImagesMagic) {
    throw FormatError("IDX images: bad magic " + std::to_string(magic) + ", expected " +
                      std::to_string(kIdxImagesMagic));
  }
  RawImages raw;
  raw.count = read_be32(bytes, 4);
  raw.rows = read_be32(bytes, 8);
  raw.cols = read_be32(bytes, 12);
  const std::size_t payload = std::size_t{raw.count} * raw.rows * raw.cols;
  require_length(bytes, 16 + payload, "IDX images payload");
  raw.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
  return raw;
}

Labels parse_idx_labels(std::span<const std::uint8_t> bytes) {
  require_length(bytes, 8, "IDX labels header");
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kIdxLabelsMagic) {
    throw FormatError("IDX labels: bad magic " + std::to_string(magic) + ", expected " +
                      std::to_string(kIdxLabelsMagic));
  }
  const std::uint32_t count = read_be32(bytes, 4);
  require_length(bytes, 8 + std::size_t{count}, "IDX labels payload");
  Labels labels(bytes.begin() + 8, bytes.begin() + 8 + count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 9) {
      throw ValueError("IDX labels: label " + std::to_string(labels[i]) + " at index " +
                       std::to_string(i) + " is outside [0, 9]");
    }
  }
  return labels;
}

std::array<std::uint8_t, 16> idx_images_header(const RawImages& images) {
  std::array<std::uint8_t, 16> h{};
  write_be32(h.data(), kIdxImagesMagic);
  write_be32(h.data() + 4, images.count);
  write_be32(h.data() + 8, images.rows);
  write_be32(h.data() + 12, images.cols);
  return h;
}

std::array<std::uint8_t, 8> idx_labels_header(std::uint32_t count) {
  std::array<std::uint8_t, 8> h{};
  write_be32(h.data(), kIdxLabelsMagic);
  write_be32(h.data() + 4, count);
  return h;
}

Matrix normalize(const RawImages& raw) {
  const std::size_t per_image = std::size_t{raw.rows} * raw.cols;
  Matrix out(raw.count, per_image);
  float* dst = out.data();
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) dst[i] = static_cast<float>(raw.pixels[i]) / 255.0f;
  return out;
}

void validate(const Dataset& data) {
  if (data.images.rows() != data.labels.size()) {
    throw ShapeError("dataset: " + std::to_string(data.images.rows()) + " images but " +
                     std::to_string(data.labels.size()) + " labels");
  }
  for (float v : data.images.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ValueError("dataset: pixel value outside [0, 1]");
  }
  for (auto l : data.labels) {
    if (l > 9) throw ValueError("dataset: label outside [0, 9]");
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return bytes;
}

namespace {

Dataset load_pair(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto raw = parse_idx_images(read_file(images));
  Dataset d{normalize(raw), parse_idx_labels(read_file(labels))};
  if (d.images.rows() != d.labels.size()) {
    throw ShapeError(images.string() + " has " + std::to_string(d.images.rows()) + " images but " +
                     labels.string() + " has " + std::to_string(d.labels.size()) + " labels");
  }
  if (d.images.cols() != kImagePixels && d.size() > 0) {
    throw ShapeError(images.string() + ": expected 28x28 images");
  }
  return d;
}

}  // namespace

MnistData load_mnist(const std::filesystem::path& dir) {
  return {load_pair(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte"),
          load_pair(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte")};
}

std::vector<std::size_t> epoch_order(std::size_t count, const BatchPlan& plan, std::uint64_t epoch) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  if (!plan.shuffle || count < 2) return order;
  Rng rng(derive_seed(plan.seed, {static_cast<std::uint64_t>(Stream::kShuffle), epoch}));
  for (std::size_t i = count - 1; i > 0; --i) {
    std::swap(order[i], order[rng.uniform_index(i + 1)]);
  }
  return order;
}

EpochBatches::EpochBatches(const Dataset& data, const BatchPlan& plan, std::uint64_t epoch)
    : data_(&data), batch_size_(plan.batch_size) {
  if (plan.batch_size == 0) throw ConfigError("batch size must be positive");
  if (plan.batch_size > data.size() && data.size() > 0) {
    throw ConfigError("batch size " + std::to_string(plan.batch_size) + " exceeds dataset size " +
                      std::to_string(data.size()));
  }
  order_ = epoch_order(data.size(), plan, epoch);
  num_batches_ = (data.size() + batch_size_ - 1) / batch_size_;
}

Batch EpochBatches::operator[](std::size_t index) const {
  if (index >= num_batches_) throw IndexError("batch index out of range");
  const std::size_t begin = index * batch_size_;
  const std::size_t end = std::min(begin + batch_size_, order_.size());
  return gather(*data_, std::span(order_).subspan(begin, end - begin));
}

Batch gather(const Dataset& data, std::span<const std::size_t> indices) {
  const std::size_t width = data.images.cols();
  Batch b{Matrix(indices.size(), width), Labels(indices.size())};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::memcpy(b.images.data() + i * width, data.images.data() + indices[i] * width, width * sizeof(float));
    b.labels[i] = data.labels[indices[i]];
  }
  return b;
}

}  // namespace nsn
