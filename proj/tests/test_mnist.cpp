#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "nsn/mnist.hpp"

#ifndef NSN_TEST_DATA_DIR
#define NSN_TEST_DATA_DIR "data/mnist"
#endif

namespace nsn {
namespace {

std::vector<std::uint8_t> image_file(std::uint32_t count, std::uint32_t magic = kIdxImagesMagic) {
  RawImages raw{count, 28, 28, {}};
  auto header = idx_images_header(raw);
  header[0] = static_cast<std::uint8_t>(magic >> 24);
  header[1] = static_cast<std::uint8_t>(magic >> 16);
  header[2] = static_cast<std::uint8_t>(magic >> 8);
  header[3] = static_cast<std::uint8_t>(magic);
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (std::size_t i = 0; i < count * kImagePixels; ++i) bytes.push_back(static_cast<std::uint8_t>(i % 256));
  return bytes;
}

std::vector<std::uint8_t> label_file(const std::vector<std::uint8_t>& labels) {
  auto header = idx_labels_header(static_cast<std::uint32_t>(labels.size()));
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (auto l : labels) bytes.push_back(l);
  return bytes;
}

TEST(ParseIdx, ImagesRoundTripHeader) {
  const auto bytes = image_file(3);
  const auto raw = parse_idx_images(bytes);
  EXPECT_EQ(raw.count, 3u);
  EXPECT_EQ(raw.pixels.size(), 3 * kImagePixels);
  const auto header = idx_images_header(raw);
  EXPECT_TRUE(std::equal(header.begin(), header.end(), bytes.begin()));
  EXPECT_EQ(raw.pixels[kImagePixels], static_cast<std::uint8_t>(kImagePixels % 256));
}

TEST(ParseIdx, WrongMagicIsFormatError) {
  EXPECT_THROW(parse_idx_images(image_file(1, kIdxLabelsMagic)), FormatError);
  auto labels = label_file({1, 2});
  labels[3] = 0x03;  // 2051
  EXPECT_THROW(parse_idx_labels(labels), FormatError);
}

TEST(ParseIdx, TruncationStatesExpectedAndActual) {
  auto bytes = image_file(2);
  bytes.resize(bytes.size() - 1);
  try {
    parse_idx_images(bytes);
    FAIL() << "expected LengthError";
  } catch (const LengthError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(std::to_string(16 + 2 * kImagePixels)), std::string::npos);
    EXPECT_NE(msg.find(std::to_string(bytes.size())), std::string::npos);
  }
  auto labels = label_file({1, 2, 3});
  labels.pop_back();
  EXPECT_THROW(parse_idx_labels(labels), LengthError);
  EXPECT_THROW(parse_idx_labels(std::vector<std::uint8_t>{0, 0, 8}), LengthError);
}

TEST(ParseIdx, LabelsOutOfRangeIsValueError) { EXPECT_THROW(parse_idx_labels(label_file({3, 10})), ValueError); }

TEST(ParseIdx, ZeroCountLabels) {
  const auto bytes = label_file({});
  EXPECT_TRUE(parse_idx_labels(bytes).empty());
  const auto header = idx_labels_header(0);
  EXPECT_TRUE(std::equal(header.begin(), header.end(), bytes.begin()));
}

TEST(Normalize, ExactEndpointsAndMonotone) {
  RawImages raw{1, 16, 16, {}};
  for (int v = 0; v < 256; ++v) raw.pixels.push_back(static_cast<std::uint8_t>(v));
  const Matrix m = normalize(raw);
  EXPECT_EQ(m(0, 0), 0.0f);
  EXPECT_EQ(m(0, 255), 1.0f);
  EXPECT_NEAR(m(0, 128), 0.50196, 1e-5);
  std::set<float> distinct(m.values().begin(), m.values().end());
  EXPECT_EQ(distinct.size(), 256u);
  for (std::size_t i = 1; i < 256; ++i) EXPECT_LT(m(0, i - 1), m(0, i));
}

Dataset toy_dataset(std::size_t count) {
  Dataset d{Matrix(count, 2), Labels(count)};
  for (std::size_t i = 0; i < count; ++i) {
    d.images(i, 0) = static_cast<float>(i) / static_cast<float>(count);
    d.labels[i] = static_cast<std::uint8_t>(i % 10);
  }
  return d;
}

TEST(Batches, CountsAndLastBatchSize) {
  const Dataset d = toy_dataset(60000);
  const EpochBatches b(d, {128, true, 11}, 0);
  EXPECT_EQ(b.size(), 469u);
  EXPECT_EQ(b[468].labels.size(), 96u);
  EXPECT_EQ(b[0].images.rows(), 128u);
}

TEST(Batches, EveryEpochIsAPermutation) {
  const Dataset d = toy_dataset(1000);
  for (std::uint64_t epoch = 0; epoch < 5; ++epoch) {
    const EpochBatches b(d, {64, true, 3}, epoch);
    std::vector<std::size_t> seen;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const Batch batch = b[i];
      for (std::size_t r = 0; r < batch.images.rows(); ++r) {
        seen.push_back(static_cast<std::size_t>(std::lround(batch.images(r, 0) * 1000.0f)));
      }
    }
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < seen.size(); ++i) ASSERT_EQ(seen[i], i);
  }
}

TEST(Batches, ShuffleDeterminism) {
  const BatchPlan plan{32, true, 5};
  EXPECT_EQ(epoch_order(500, plan, 2), epoch_order(500, plan, 2));
  EXPECT_NE(epoch_order(500, plan, 2), epoch_order(500, plan, 3));
  const auto identity = epoch_order(500, {32, false, 5}, 7);
  for (std::size_t i = 0; i < identity.size(); ++i) EXPECT_EQ(identity[i], i);
}

TEST(Batches, InvalidPlans) {
  const Dataset d = toy_dataset(10);
  EXPECT_THROW(EpochBatches(d, {0, true, 1}, 0), ConfigError);
  EXPECT_THROW(EpochBatches(d, {11, true, 1}, 0), ConfigError);
}

class MnistFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    if (!std::filesystem::exists(std::filesystem::path(NSN_TEST_DATA_DIR) / "train-labels-idx1-ubyte")) {
      GTEST_SKIP() << "MNIST files not found in " << NSN_TEST_DATA_DIR;
    }
  }
};

TEST_F(MnistFiles, OfficialCountsAndFirstLabels) {
  const auto data = load_mnist(NSN_TEST_DATA_DIR);
  EXPECT_EQ(data.train.size(), 60000u);
  EXPECT_EQ(data.test.size(), 10000u);
  // Cross-checked with torchvision's read_label_file.
  EXPECT_EQ(data.train.labels[0], 5);
  EXPECT_EQ(data.test.labels[0], 7);
  EXPECT_NO_THROW(validate(data.train));
  EXPECT_NO_THROW(validate(data.test));
  // Pixel sum of the first training image (torchvision reader): 27525.
  double total = 0.0;
  for (float v : data.train.images.row(0)) total += v * 255.0;
  EXPECT_NEAR(total, 27525.0, 1e-2);
}

}  // namespace
}  // namespace nsn
