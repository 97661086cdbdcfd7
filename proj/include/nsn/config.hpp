#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "nsn/optim.hpp"

namespace nsn {

enum class TrainMode { kNsn, kReference };

struct Seeds {
  std::uint64_t init = 1;
  std::uint64_t shuffle = 1;
  std::uint64_t dropout = 1;
};

/// Every knob of a training run. Defaults are the MNIST setup for the
/// two-hidden-layer family.
struct TrainConfig {
  TrainMode mode = TrainMode::kNsn;
  std::size_t n_hidden = 2;
  std::size_t epochs = 600;
  std::size_t batch = 128;
  Schedule schedule;
  double l2_lambda = 9e-5;
  double input_keep = 0.8;
  double hidden_keep = 0.5;
  Seeds seeds;
  bool shuffle = true;
  std::size_t width = 784;  // input and hidden width
  std::filesystem::path data_dir = "data/mnist";
  std::filesystem::path out_dir;

  /// Throws ConfigError on any out-of-range field.
  void validate() const;

  /// Flat `key=value` lines, one per field; parsed back by `apply_key_values`.
  std::string to_key_values() const;
};

/// Applies `key=value` lines (blank lines and `#` comments ignored) on top of
/// `config`. Unknown keys and unparsable values throw ConfigError.
void apply_key_values(TrainConfig& config, const std::string& text);

/// Same, for a single key.
void apply_setting(TrainConfig& config, const std::string& key, const std::string& value);

std::string to_string(TrainMode mode);

}  // namespace nsn
