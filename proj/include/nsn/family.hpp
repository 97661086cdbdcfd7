#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nsn/graph.hpp"

namespace nsn {

struct FamilyDims {
  std::size_t n = 2;  // hidden layers of the base model
  std::size_t input_dim = kImagePixels;
  std::size_t hidden_dim = kImagePixels;
  std::size_t classes = kNumClasses;
};

/// Base model with n hidden layers plus its n sub-models, stored as n+1
/// canonical parameter groups.
///
/// Group g is the input layer of model g. Model m's layer list is
/// [group m, group m-1, ..., group 0], so model 0 is softmax regression, model
/// n is the base model, and dropping model m's first layer leaves model m-1.
/// Every view aliases the same group storage, which makes the tying
/// W_{o+1,m+1} == W_{o,m} hold by construction.
class ModelFamily {
 public:
  ModelFamily(FamilyDims dims, std::vector<DenseLayer<float>> groups);

  std::size_t n() const noexcept { return dims_.n; }
  const FamilyDims& dims() const noexcept { return dims_; }

  std::vector<DenseLayer<float>>& groups() noexcept { return groups_; }
  const std::vector<DenseLayer<float>>& groups() const noexcept { return groups_; }
  DenseLayer<float>& group(std::size_t g);
  const DenseLayer<float>& group(std::size_t g) const;

  /// Canonical group behind model m's layer o (1-based): m - o + 1.
  std::size_t group_index(std::size_t model, std::size_t layer) const;

  /// Layers of model m, input first.
  LayerStack<float> view(std::size_t model) const;

 private:
  FamilyDims dims_;
  std::vector<DenseLayer<float>> groups_;
};

/// Allocates the n+1 groups; weights uniform in +-1/sqrt(fan_in), biases zero.
/// Requires n >= 1 and hidden_dim == input_dim.
ModelFamily build_family(const FamilyDims& dims, std::uint64_t init_seed);

/// Draws a layer's weights uniform in +-1/sqrt(fan_in) from its own seeded stream.
DenseLayer<float> init_layer(std::size_t out, std::size_t in, std::uint64_t init_seed, std::uint64_t layer_id);

/// Weights plus biases of model m.
std::size_t param_count(const ModelFamily& family, std::size_t model);

/// Enforces W_{o+1,m+1} = W_{o,m}. On shared storage this verifies that every
/// tied position aliases the same group and throws ConsistencyError otherwise.
void copy_up(const ModelFamily& family);

/// Gradient for each canonical group. A group owned by model m < n gets
/// 0.5 * (dL_m/dW_{1,m} + dL_{m+1}/dW_{2,m+1}); the base input layer (group n)
/// gets dL_n/dW_{1,n} alone. `per_model[m]` holds model m's gradients.
GradientSet<float> paired_average_gradients(const std::vector<GradientSet<float>>& per_model);

/// The base model with its first k weight layers removed (model n - k).
LayerStack<float> detach(const ModelFamily& family, std::size_t k);

/// Dropout configuration used for model m of a family: none for model 0.
ModelSpec family_model_spec(const ModelFamily& family, std::size_t model, double input_keep, double hidden_keep);

/// The same family with an independent parameter copy per model. Used to
/// check the canonical scheme against a literal per-model implementation.
class ReplicatedFamily {
 public:
  explicit ReplicatedFamily(const ModelFamily& source);

  std::size_t n() const noexcept { return models_.size() - 1; }
  std::vector<DenseLayer<float>>& model(std::size_t m) { return models_.at(m); }
  const std::vector<DenseLayer<float>>& model(std::size_t m) const { return models_.at(m); }

  /// Overwrites larger models' copies from smaller ones, model 0 upward:
  /// model m+1 layer o+1 <- model m layer o.
  void copy_up();

  /// True when every tied pair is bitwise equal.
  bool ties_hold() const;

  /// Owner values (each model's input layer) as canonical groups.
  std::vector<DenseLayer<float>> canonical() const;

 private:
  std::vector<std::vector<DenseLayer<float>>> models_;
};

}  // namespace nsn
