#include "nsn/family.hpp"

#include <cmath>
#include <string>

namespace nsn {

ModelFamily::ModelFamily(FamilyDims dims, std::vector<DenseLayer<float>> groups)
    : dims_(dims), groups_(std::move(groups)) {
  if (dims_.n < 1) throw ConfigError("family needs at least one hidden layer, got n=" + std::to_string(dims_.n));
  if (groups_.size() != dims_.n + 1) {
    throw ConsistencyError("family with n=" + std::to_string(dims_.n) + " needs " + std::to_string(dims_.n + 1) +
                           " groups, got " + std::to_string(groups_.size()));
  }
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const std::size_t out = g == 0 ? dims_.classes : dims_.hidden_dim;
    if (groups_[g].out() != out || groups_[g].in() != dims_.input_dim || groups_[g].bias.cols() != out) {
      throw ShapeError("group " + std::to_string(g) + " has weight " + groups_[g].weight.shape_string() +
                       ", expected [" + std::to_string(out) + "x" + std::to_string(dims_.input_dim) + "]");
    }
  }
}

DenseLayer<float>& ModelFamily::group(std::size_t g) {
  if (g > dims_.n) throw IndexError("group " + std::to_string(g) + " out of range [0, " + std::to_string(dims_.n) + "]");
  return groups_[g];
}

const DenseLayer<float>& ModelFamily::group(std::size_t g) const {
  if (g > dims_.n) throw IndexError("group " + std::to_string(g) + " out of range [0, " + std::to_string(dims_.n) + "]");
  return groups_[g];
}

std::size_t ModelFamily::group_index(std::size_t model, std::size_t layer) const {
  if (model > dims_.n) throw IndexError("model " + std::to_string(model) + " out of range");
  if (layer < 1 || layer > model + 1) {
    throw IndexError("model " + std::to_string(model) + " has no layer " + std::to_string(layer));
  }
  return model - layer + 1;
}

LayerStack<float> ModelFamily::view(std::size_t model) const {
  if (model > dims_.n) {
    throw IndexError("model " + std::to_string(model) + " out of range [0, " + std::to_string(dims_.n) + "]");
  }
  LayerStack<float> layers;
  layers.reserve(model + 1);
  for (std::size_t g = model + 1; g-- > 0;) layers.push_back(&groups_[g]);
  return layers;
}

DenseLayer<float> init_layer(std::size_t out, std::size_t in, std::uint64_t init_seed, std::uint64_t layer_id) {
  DenseLayer<float> layer(out, in);
  Rng rng(derive_seed(init_seed, {static_cast<std::uint64_t>(Stream::kInit), layer_id}));
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (float& w : layer.weight.values()) {
    w = static_cast<float>((2.0 * rng.uniform_double() - 1.0) * bound);
  }
  return layer;
}

ModelFamily build_family(const FamilyDims& dims, std::uint64_t init_seed) {
  if (dims.n < 1) throw ConfigError("n must be at least 1, got " + std::to_string(dims.n));
  if (dims.hidden_dim != dims.input_dim) {
    throw ConfigError("tied layers require hidden width " + std::to_string(dims.hidden_dim) +
                      " to equal input width " + std::to_string(dims.input_dim));
  }
  std::vector<DenseLayer<float>> groups;
  groups.reserve(dims.n + 1);
  for (std::size_t g = 0; g <= dims.n; ++g) {
    groups.push_back(init_layer(g == 0 ? dims.classes : dims.hidden_dim, dims.input_dim, init_seed, g));
  }
  return ModelFamily(dims, std::move(groups));
}

std::size_t param_count(const ModelFamily& family, std::size_t model) {
  std::size_t total = 0;
  for (const auto* layer : family.view(model)) total += layer->param_count();
  return total;
}

void copy_up(const ModelFamily& family) {
  for (std::size_t m = 1; m <= family.n(); ++m) {
    const auto bigger = family.view(m);
    const auto lesser = family.view(m - 1);
    for (std::size_t o = 0; o < lesser.size(); ++o) {
      if (bigger[o + 1] != lesser[o]) {
        throw ConsistencyError("model " + std::to_string(m) + " layer " + std::to_string(o + 2) +
                               " is not tied to model " + std::to_string(m - 1) + " layer " + std::to_string(o + 1));
      }
      if (!bigger[o + 1]->weight.same_shape(lesser[o]->weight)) {
        throw ConsistencyError("tied layers differ in shape at model " + std::to_string(m));
      }
    }
  }
}

GradientSet<float> paired_average_gradients(const std::vector<GradientSet<float>>& per_model) {
  if (per_model.size() < 2) {
    throw ConsistencyError("paired averaging needs gradients for at least 2 models, got " +
                           std::to_string(per_model.size()));
  }
  const std::size_t n = per_model.size() - 1;
  for (std::size_t m = 0; m <= n; ++m) {
    if (per_model[m].size() != m + 1) {
      throw ConsistencyError("model " + std::to_string(m) + " gradient set has " + std::to_string(per_model[m].size()) +
                             " layers, expected " + std::to_string(m + 1));
    }
  }
  GradientSet<float> out(n + 1);
  for (std::size_t g = 0; g < n; ++g) {
    // Group g is layer 1 of model g and layer 2 of model g+1.
    const auto& own = per_model[g][0];
    const auto& partner = per_model[g + 1][1];
    auto half_sum = [](float a, float b) { return 0.5f * (a + b); };
    out[g].weight = map_zip(own.weight, partner.weight, half_sum);
    out[g].bias = map_zip(own.bias, partner.bias, half_sum);
  }
  out[n] = per_model[n][0];
  return out;
}

LayerStack<float> detach(const ModelFamily& family, std::size_t k) {
  if (k > family.n()) {
    throw IndexError("cannot drop " + std::to_string(k) + " layers from a base model with " +
                     std::to_string(family.n()) + " hidden layers");
  }
  LayerStack<float> layers = family.view(family.n());
  layers.erase(layers.begin(), layers.begin() + static_cast<std::ptrdiff_t>(k));
  return layers;
}

ModelSpec family_model_spec(const ModelFamily& family, std::size_t model, double input_keep, double hidden_keep) {
  ModelSpec spec;
  spec.classes = family.dims().classes;
  if (model > 0) {
    spec.input_keep = input_keep;
    spec.hidden_keep = hidden_keep;
  }
  return spec;
}

ReplicatedFamily::ReplicatedFamily(const ModelFamily& source) {
  for (std::size_t m = 0; m <= source.n(); ++m) {
    std::vector<DenseLayer<float>> layers;
    for (const auto* l : source.view(m)) layers.push_back(*l);
    models_.push_back(std::move(layers));
  }
}

void ReplicatedFamily::copy_up() {
  for (std::size_t m = 0; m + 1 < models_.size(); ++m) {
    for (std::size_t o = 0; o < models_[m].size(); ++o) {
      auto& dst = models_[m + 1][o + 1];
      const auto& src = models_[m][o];
      if (!dst.weight.same_shape(src.weight) || !dst.bias.same_shape(src.bias)) {
        throw ConsistencyError("copy_up: model " + std::to_string(m + 1) + " layer " + std::to_string(o + 2) + " " +
                               dst.weight.shape_string() + " cannot take model " + std::to_string(m) + " layer " +
                               std::to_string(o + 1) + " " + src.weight.shape_string());
      }
      dst = src;
    }
  }
}

bool ReplicatedFamily::ties_hold() const {
  for (std::size_t m = 0; m + 1 < models_.size(); ++m) {
    for (std::size_t o = 0; o < models_[m].size(); ++o) {
      if (!models_[m + 1][o + 1].bitwise_equal(models_[m][o])) return false;
    }
  }
  return true;
}

std::vector<DenseLayer<float>> ReplicatedFamily::canonical() const {
  std::vector<DenseLayer<float>> groups;
  for (const auto& layers : models_) groups.push_back(layers.front());
  return groups;
}

}  // namespace nsn
