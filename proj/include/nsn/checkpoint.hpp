#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nsn/config.hpp"
#include "nsn/optim.hpp"

namespace nsn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Training state on disk. Parameter groups are in canonical order: group 0
/// is the 10-way head, group g the input layer of the g-hidden-layer model.
///
/// Layout (little-endian): "NSN1", u32 version, u32 n, u32 group count, then per
/// group: u32 rows, u32 cols, W values, u32 bias length, bias values, and the
/// same again for the momentum buffers; then u32 epoch, u64 init / shuffle /
/// dropout seeds, u32 byte length and the UTF-8 config echo.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint32_t n = 0;
  std::vector<DenseLayer<float>> groups;
  MomentumState momentum;
  std::uint32_t epoch = 0;  // completed epochs
  Seeds seeds;
  std::string config_echo;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the run configuration stored in the checkpoint's config echo.
TrainConfig config_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace nsn
