#include "nsn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nsn {

template <typename T>
DenseLayer<T>::DenseLayer(BasicMatrix<T> w, BasicMatrix<T> b) : weight(std::move(w)), bias(std::move(b)) {
  if (bias.rows() != 1 || bias.cols() != weight.rows()) {
    throw ShapeError("dense layer: bias " + bias.shape_string() + " does not match weight " +
                     weight.shape_string());
  }
}

template <typename T>
void validate(const ModelSpec& spec, const LayerStack<T>& layers) {
  if (!(spec.input_keep > 0.0 && spec.input_keep <= 1.0) || !(spec.hidden_keep > 0.0 && spec.hidden_keep <= 1.0)) {
    throw ConfigError("keep probabilities must lie in (0, 1]");
  }
  if (layers.empty()) throw ShapeError("model has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = *layers[i];
    if (l.bias.rows() != 1 || l.bias.cols() != l.out()) {
      throw ShapeError("layer " + std::to_string(i) + ": bias " + l.bias.shape_string() +
                       " does not match weight " + l.weight.shape_string());
    }
    if (i + 1 < layers.size() && l.out() != layers[i + 1]->in()) {
      throw ShapeError("layer " + std::to_string(i) + " output " + std::to_string(l.out()) +
                       " does not feed layer " + std::to_string(i + 1) + " input " +
                       std::to_string(layers[i + 1]->in()));
    }
  }
  if (layers.back()->out() != spec.classes) {
    throw ShapeError("output layer has " + std::to_string(layers.back()->out()) + " units, expected " +
                     std::to_string(spec.classes));
  }
}

template <typename T>
BasicMatrix<T> dense_forward(const BasicMatrix<T>& x, const DenseLayer<T>& layer) {
  if (x.cols() != layer.in()) {
    throw ShapeError("dense_forward: input " + x.shape_string() + " does not fit weight " +
                     layer.weight.shape_string());
  }
  BasicMatrix<T> out = matmul(x, transpose(layer.weight));
  const T* b = layer.bias.data();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    T* r = out.data() + i * out.cols();
    for (std::size_t j = 0; j < out.cols(); ++j) r[j] += b[j];
  }
  return out;
}

template <typename T>
BasicMatrix<T> relu(const BasicMatrix<T>& z) {
  return map(z, [](T v) { return v > T{0} ? v : T{0}; });
}

template <typename T>
BasicMatrix<T> relu_backward(const BasicMatrix<T>& d_out, const BasicMatrix<T>& z) {
  return map_zip(d_out, z, [](T d, T v) { return v > T{0} ? d : T{0}; });
}

template <typename T>
BasicMatrix<T> dropout_mask(std::size_t rows, std::size_t cols, double keep, Rng& rng) {
  if (!(keep > 0.0 && keep <= 1.0)) {
    throw ConfigError("dropout keep probability " + std::to_string(keep) + " outside (0, 1]");
  }
  BasicMatrix<T> mask(rows, cols, T{1});
  if (keep == 1.0) return mask;
  const T scale = static_cast<T>(1.0 / keep);
  for (T& v : mask.values()) v = rng.bernoulli(keep) ? scale : T{0};
  return mask;
}

template <typename T>
BasicMatrix<T> log_softmax(const BasicMatrix<T>& z) {
  BasicMatrix<T> out(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto in = z.row(i);
    auto o = out.row(i);
    const T mx = *std::max_element(in.begin(), in.end());
    T total{0};
    for (T v : in) total += std::exp(v - mx);
    const T lse = std::log(total);
    for (std::size_t j = 0; j < in.size(); ++j) o[j] = in[j] - mx - lse;
  }
  return out;
}

template <typename T>
T nll_loss(const BasicMatrix<T>& logp, std::span<const std::uint8_t> labels) {
  if (labels.size() != logp.rows()) {
    throw ShapeError("nll_loss: " + std::to_string(labels.size()) + " labels for " + logp.shape_string());
  }
  if (labels.empty()) throw ShapeError("nll_loss: empty batch");
  T total{0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= logp.cols()) {
      throw ValueError("nll_loss: label " + std::to_string(labels[i]) + " out of range for " +
                       std::to_string(logp.cols()) + " classes");
    }
    total -= logp(i, labels[i]);
  }
  return total / static_cast<T>(labels.size());
}

template <typename T>
ForwardCache<T> model_forward_masked(const LayerStack<T>& layers, const BasicMatrix<T>& x,
                                     std::span<const BasicMatrix<T>> masks) {
  if (!masks.empty() && masks.size() != layers.size()) {
    throw ConsistencyError("model_forward: " + std::to_string(masks.size()) + " masks for " +
                           std::to_string(layers.size()) + " layers");
  }
  ForwardCache<T> cache;
  cache.inputs.reserve(layers.size());
  cache.pre.reserve(layers.size());
  cache.masks.resize(layers.size());
  BasicMatrix<T> act = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (l > 0) act = relu(cache.pre.back());
    if (!masks.empty() && !masks[l].empty()) {
      act = hadamard(act, masks[l]);
      cache.masks[l] = masks[l];
    }
    cache.pre.push_back(dense_forward(act, *layers[l]));
    cache.inputs.push_back(std::move(act));
  }
  cache.logp = log_softmax(cache.pre.back());
  return cache;
}

template <typename T>
ForwardCache<T> model_forward(const ModelSpec& spec, const LayerStack<T>& layers, const BasicMatrix<T>& x,
                              Mode mode, Rng* rng) {
  validate(spec, layers);
  std::vector<BasicMatrix<T>> masks;
  if (mode == Mode::kTrain && spec.has_dropout()) {
    if (rng == nullptr) throw ConfigError("model_forward: train mode with dropout needs an rng");
    masks.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const double keep = l == 0 ? spec.input_keep : spec.hidden_keep;
      if (keep < 1.0) masks[l] = dropout_mask<T>(x.rows(), layers[l]->in(), keep, *rng);
    }
  }
  return model_forward_masked<T>(layers, x, masks);
}

template <typename T>
GradientSet<T> model_backward(const LayerStack<T>& layers, const ForwardCache<T>& cache,
                              std::span<const std::uint8_t> labels, ReluBackwardFn<T> relu_bwd) {
  const std::size_t n_layers = layers.size();
  if (cache.inputs.size() != n_layers || cache.pre.size() != n_layers) {
    throw ConsistencyError("model_backward: cache holds " + std::to_string(cache.pre.size()) +
                           " layers, model has " + std::to_string(n_layers));
  }
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (cache.inputs[l].cols() != layers[l]->in() || cache.pre[l].cols() != layers[l]->out()) {
      throw ConsistencyError("model_backward: cache for layer " + std::to_string(l) +
                             " does not match its parameters");
    }
  }
  const std::size_t batch = cache.logp.rows();
  if (labels.size() != batch) {
    throw ShapeError("model_backward: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(batch));
  }

  // d(mean NLL)/dz at the head: (softmax - onehot) / b.
  const T inv_b = T{1} / static_cast<T>(batch);
  BasicMatrix<T> dz = map(cache.logp, [](T v) { return std::exp(v); });
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] >= dz.cols()) throw ValueError("model_backward: label out of range");
    dz(i, labels[i]) -= T{1};
  }
  for (T& v : dz.values()) v *= inv_b;

  GradientSet<T> grads(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    grads[l].weight = matmul(transpose(dz), cache.inputs[l]);
    grads[l].bias = column_sums(dz);
    if (l == 0) break;
    BasicMatrix<T> da = matmul(dz, layers[l]->weight);
    if (!cache.masks[l].empty()) da = hadamard(da, cache.masks[l]);
    dz = relu_bwd(da, cache.pre[l - 1]);
  }
  return grads;
}

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> params, double epsilon) {
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + epsilon;
    const double up = f(params);
    params[i] = saved - epsilon;
    const double down = f(params);
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * epsilon);
  }
  return grad;
}

GradientSet<double> numerical_gradient(const std::vector<DenseLayer<double>>& layers, const MatrixD& x,
                                       std::span<const std::uint8_t> labels, double epsilon,
                                       std::span<const MatrixD> masks) {
  std::vector<DenseLayer<double>> work = layers;
  const LayerStack<double> stack = stack_of(work);
  auto loss = [&] { return nll_loss(model_forward_masked<double>(stack, x, masks).logp, labels); };
  auto probe = [&](double& p) {
    const double saved = p;
    p = saved + epsilon;
    const double up = loss();
    p = saved - epsilon;
    const double down = loss();
    p = saved;
    return (up - down) / (2.0 * epsilon);
  };
  GradientSet<double> grads(work.size());
  for (std::size_t l = 0; l < work.size(); ++l) {
    grads[l].weight = MatrixD(work[l].weight.rows(), work[l].weight.cols());
    grads[l].bias = MatrixD(1, work[l].bias.cols());
    for (std::size_t i = 0; i < work[l].weight.size(); ++i) {
      grads[l].weight.data()[i] = probe(work[l].weight.data()[i]);
    }
    for (std::size_t i = 0; i < work[l].bias.size(); ++i) {
      grads[l].bias.data()[i] = probe(work[l].bias.data()[i]);
    }
  }
  return grads;
}

template <typename T>
double max_relative_error(const GradientSet<T>& analytic, const GradientSet<T>& numeric, double floor) {
  if (analytic.size() != numeric.size()) throw ConsistencyError("gradient sets differ in layer count");
  double worst = 0.0;
  auto visit = [&](const BasicMatrix<T>& a, const BasicMatrix<T>& n) {
    require_same_shape(a, n, "max_relative_error");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double av = a.data()[i];
      const double nv = n.data()[i];
      const double denom = std::max({std::abs(av), std::abs(nv), floor});
      worst = std::max(worst, std::abs(av - nv) / denom);
    }
  };
  for (std::size_t l = 0; l < analytic.size(); ++l) {
    visit(analytic[l].weight, numeric[l].weight);
    visit(analytic[l].bias, numeric[l].bias);
  }
  return worst;
}

#define NSN_INSTANTIATE(T)                                                                               \
  template struct DenseLayer<T>;                                                                         \
  template void validate(const ModelSpec&, const LayerStack<T>&);                                        \
  template BasicMatrix<T> dense_forward(const BasicMatrix<T>&, const DenseLayer<T>&);                    \
  template BasicMatrix<T> relu(const BasicMatrix<T>&);                                                   \
  template BasicMatrix<T> relu_backward(const BasicMatrix<T>&, const BasicMatrix<T>&);                   \
  template BasicMatrix<T> dropout_mask<T>(std::size_t, std::size_t, double, Rng&);                       \
  template BasicMatrix<T> log_softmax(const BasicMatrix<T>&);                                            \
  template T nll_loss(const BasicMatrix<T>&, std::span<const std::uint8_t>);                             \
  template ForwardCache<T> model_forward(const ModelSpec&, const LayerStack<T>&, const BasicMatrix<T>&,  \
                                         Mode, Rng*);                                                    \
  template ForwardCache<T> model_forward_masked(const LayerStack<T>&, const BasicMatrix<T>&,             \
                                                std::span<const BasicMatrix<T>>);                        \
  template GradientSet<T> model_backward(const LayerStack<T>&, const ForwardCache<T>&,                   \
                                         std::span<const std::uint8_t>, ReluBackwardFn<T>);              \
  template double max_relative_error(const GradientSet<T>&, const GradientSet<T>&, double);

NSN_INSTANTIATE(float)
NSN_INSTANTIATE(double)

#undef NSN_INSTANTIATE

}  // namespace nsn
