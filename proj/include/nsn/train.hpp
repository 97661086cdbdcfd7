#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "nsn/checkpoint.hpp"
#include "nsn/config.hpp"
#include "nsn/family.hpp"
#include "nsn/mnist.hpp"
#include "nsn/optim.hpp"

namespace nsn {

/// One NSN mini-batch step:
///  1. copy_up (tie check on shared storage)
///  2. train-mode forward of models 0..n, independent dropout masks, none for model 0
///  3. backward of every model
///  4. L2 added to the base model's weight gradients
///  5. paired gradient averaging
///  6. NSN momentum per canonical group with lr_at(epoch)
///  7. W <- W - lr V
/// Returns each model's loss before the update.
std::vector<float> train_step(ModelFamily& family, MomentumState& momentum, const Batch& batch,
                              const TrainConfig& config, std::size_t epoch, std::size_t step);

/// Single-model step for the regularly trained baselines: plain gradient plus
/// L2, standard momentum, same update rule. `layers` are in canonical order
/// (head first); returns the loss before the update.
float reference_step(std::vector<DenseLayer<float>>& layers, MomentumState& momentum, const Batch& batch,
                     const TrainConfig& config, std::size_t epoch, std::size_t step);

/// Input-first view over canonically ordered layers.
LayerStack<float> reference_view(const std::vector<DenseLayer<float>>& layers);

/// Eval-mode classification accuracy; argmax ties go to the lowest class.
double evaluate(const LayerStack<float>& model, const Dataset& data, std::size_t chunk = 1000);

/// Seeded dropout stream for one model at one (epoch, step).
Rng dropout_rng(const TrainConfig& config, std::size_t epoch, std::size_t step, std::size_t model);

struct MetricsRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  std::vector<double> losses;      // per model, mean over the epoch's batches
  std::vector<double> accuracies;  // per model, test set
};

struct BestReport {
  std::size_t epoch = 0;
  std::vector<double> accuracies;  // all models, at the epoch with the best base accuracy
};

/// Model indices reported by a run: 0..n for NSN, the single hidden-layer count for references.
std::vector<std::size_t> reported_models(const TrainConfig& config);

/// Parameters plus optimizer state of an in-progress run.
struct TrainState {
  std::vector<DenseLayer<float>> groups;  // canonical order
  MomentumState momentum;
  std::size_t epoch = 0;  // completed epochs
};

TrainState initial_state(const TrainConfig& config);
TrainState state_from_checkpoint(const Checkpoint& checkpoint);
Checkpoint make_checkpoint(const TrainConfig& config, const std::vector<DenseLayer<float>>& groups,
                           const MomentumState& momentum, std::size_t epoch);

/// Test accuracy of every reported model for the given parameters.
std::vector<double> evaluate_models(const TrainConfig& config, const std::vector<DenseLayer<float>>& groups,
                                    const Dataset& test);

struct TrainResult {
  std::vector<MetricsRecord> history;
  BestReport best;
  TrainState final_state;
};

struct TrainHooks {
  std::function<void(const MetricsRecord&, double seconds)> on_epoch;
  std::size_t max_steps_per_epoch = 0;  // 0 = full epochs
};

/// Runs epochs [start.epoch, config.epochs). With a non-empty out_dir, writes
/// metrics.csv (flushed per epoch), best.csv, best.ckpt, last.ckpt and final.ckpt.
/// `prior_history` seeds the best-epoch tracking when resuming.
TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& test_set,
                  std::optional<TrainState> start = std::nullopt, std::vector<MetricsRecord> prior_history = {},
                  const TrainHooks& hooks = {});

/// Picks the epoch with the highest base-model accuracy (earliest on ties).
BestReport best_of(const std::vector<MetricsRecord>& history);

std::string metrics_header(const std::vector<std::size_t>& models);
std::string metrics_row(const MetricsRecord& record);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);
void write_best_csv(const std::filesystem::path& path, const std::vector<std::size_t>& models, const BestReport& best);
BestReport read_best_csv(const std::filesystem::path& path);

}  // namespace nsn
