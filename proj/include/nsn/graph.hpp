#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "nsn/mnist.hpp"
#include "nsn/rng.hpp"
#include "nsn/tensor.hpp"

namespace nsn {

/// Affine map out = x * W^T + b. Weight is [out x in], bias is [1 x out].
template <typename T>
struct DenseLayer {
  BasicMatrix<T> weight;
  BasicMatrix<T> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t out, std::size_t in) : weight(out, in), bias(1, out) {}
  DenseLayer(BasicMatrix<T> w, BasicMatrix<T> b);

  std::size_t in() const noexcept { return weight.cols(); }
  std::size_t out() const noexcept { return weight.rows(); }
  std::size_t param_count() const noexcept { return weight.size() + bias.size(); }

  bool bitwise_equal(const DenseLayer& other) const noexcept {
    return weight.bitwise_equal(other.weight) && bias.bitwise_equal(other.bias);
  }

  template <typename U>
  DenseLayer<U> cast() const {
    return DenseLayer<U>(weight.template cast<U>(), bias.template cast<U>());
  }
};

/// Ordered input -> output. Layers are borrowed, never owned, so nested
/// models can alias the same storage.
template <typename T>
using LayerStack = std::vector<const DenseLayer<T>*>;

template <typename T>
LayerStack<T> stack_of(const std::vector<DenseLayer<T>>& layers) {
  LayerStack<T> s;
  s.reserve(layers.size());
  for (const auto& l : layers) s.push_back(&l);
  return s;
}

/// Dropout keep probabilities; 1 disables dropout at that position.
struct ModelSpec {
  double input_keep = 1.0;
  double hidden_keep = 1.0;
  std::size_t classes = kNumClasses;

  bool has_dropout() const noexcept { return input_keep < 1.0 || hidden_keep < 1.0; }
};

/// Throws ShapeError if layers do not chain or the head is not `classes` wide,
/// ConfigError for keep probabilities outside (0, 1].
template <typename T>
void validate(const ModelSpec& spec, const LayerStack<T>& layers);

enum class Mode { kTrain, kEval };

template <typename T>
struct ForwardCache {
  std::vector<BasicMatrix<T>> inputs;  // input seen by each dense layer, after dropout
  std::vector<BasicMatrix<T>> pre;     // pre-activation of each dense layer
  std::vector<BasicMatrix<T>> masks;   // dropout mask applied to each layer input; empty = none
  BasicMatrix<T> logp;
};

template <typename T>
struct LayerGrad {
  BasicMatrix<T> weight;
  BasicMatrix<T> bias;
};

/// Per-layer gradients of one model, in the model's layer order.
template <typename T>
using GradientSet = std::vector<LayerGrad<T>>;

template <typename T>
BasicMatrix<T> dense_forward(const BasicMatrix<T>& x, const DenseLayer<T>& layer);

template <typename T>
BasicMatrix<T> relu(const BasicMatrix<T>& z);

/// Passes dOut where z > 0; zero elsewhere, including z == 0.
template <typename T>
BasicMatrix<T> relu_backward(const BasicMatrix<T>& d_out, const BasicMatrix<T>& z);

template <typename T>
using ReluBackwardFn = BasicMatrix<T> (*)(const BasicMatrix<T>&, const BasicMatrix<T>&);

/// Inverted dropout mask: each entry 1/keep with probability keep, else 0.
template <typename T>
BasicMatrix<T> dropout_mask(std::size_t rows, std::size_t cols, double keep, Rng& rng);

template <typename T>
BasicMatrix<T> log_softmax(const BasicMatrix<T>& z);

/// Mean over rows of -logp[i][label_i].
template <typename T>
T nll_loss(const BasicMatrix<T>& logp, std::span<const std::uint8_t> labels);

/// input-dropout -> [dense -> ReLU -> hidden-dropout] x (L-1) -> dense -> log-softmax.
/// `rng` is required in train mode when the spec has dropout.
template <typename T>
ForwardCache<T> model_forward(const ModelSpec& spec, const LayerStack<T>& layers, const BasicMatrix<T>& x,
                              Mode mode, Rng* rng = nullptr);

/// Forward pass with caller-supplied dropout masks (one per layer input, empty
/// entries mean no dropout at that position).
template <typename T>
ForwardCache<T> model_forward_masked(const LayerStack<T>& layers, const BasicMatrix<T>& x,
                                     std::span<const BasicMatrix<T>> masks);

/// Exact gradients of the mean NLL with respect to every weight and bias.
template <typename T>
GradientSet<T> model_backward(const LayerStack<T>& layers, const ForwardCache<T>& cache,
                              std::span<const std::uint8_t> labels,
                              ReluBackwardFn<T> relu_bwd = &relu_backward<T>);

/// Central differences (f(p+eps) - f(p-eps)) / 2eps for every entry of `params`.
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> params, double epsilon = 1e-4);

/// Finite-difference gradients of the mean NLL in 64-bit. With `masks` empty the
/// network runs without dropout; otherwise the given masks are held fixed.
GradientSet<double> numerical_gradient(const std::vector<DenseLayer<double>>& layers, const MatrixD& x,
                                       std::span<const std::uint8_t> labels, double epsilon = 1e-4,
                                       std::span<const MatrixD> masks = {});

/// max |a - n| / max(|a|, |n|, floor) over every entry of two gradient sets.
template <typename T>
double max_relative_error(const GradientSet<T>& analytic, const GradientSet<T>& numeric, double floor = 1e-8);

}  // namespace nsn
