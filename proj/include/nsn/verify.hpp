#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nsn/config.hpp"
#include "nsn/family.hpp"
#include "nsn/graph.hpp"
#include "nsn/mnist.hpp"
#include "nsn/optim.hpp"

namespace nsn {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 7;
  // Swappable so the harness can be shown to catch a broken backward pass.
  ReluBackwardFn<double> relu_backward = &nsn::relu_backward<double>;
};

/// Uniform [0,1) features with uniform labels in [0, classes).
Dataset synthetic_dataset(std::size_t count, std::size_t width, std::size_t classes, std::uint64_t seed);

/// The default training config shrunk to a small width for property checks.
TrainConfig small_config(std::size_t n, std::size_t width);

/// Per-model parameter copies trained by applying the pairwise averaged
/// update to every model's own copy, followed by copy_up at the next step.
/// Serves as the literal reference the canonical shared-storage update is
/// checked against.
class LiteralNsnTrainer {
 public:
  explicit LiteralNsnTrainer(const ModelFamily& initial);

  void step(const Batch& batch, const TrainConfig& config, std::size_t epoch, std::size_t step);

  const ReplicatedFamily& models() const noexcept { return models_; }

 private:
  ReplicatedFamily models_;
  std::vector<MomentumState> momentum_;  // one per model copy
};

PropertyResult check_gradients(const VerifyOptions& options);
PropertyResult check_masked_gradients(const VerifyOptions& options);
PropertyResult check_family_gradients(const VerifyOptions& options);
PropertyResult check_log_softmax(const VerifyOptions& options);
PropertyResult check_tie_invariant(const VerifyOptions& options, std::size_t steps = 100);
PropertyResult check_detachment(const VerifyOptions& options);
PropertyResult check_momentum_equivalence(const VerifyOptions& options, std::size_t steps = 200);
PropertyResult check_canonical_vs_literal(const VerifyOptions& options, std::size_t steps = 50);

/// Every property above, in a fixed order.
std::vector<PropertyResult> run_verify(const VerifyOptions& options = {});

}  // namespace nsn
