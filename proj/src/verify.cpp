#include "nsn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "nsn/train.hpp"

namespace nsn {
namespace {

constexpr double kGradTolerance = 1e-4;

std::string format(const char* fmt, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, fmt, a, b);
  return buf;
}

PropertyResult threshold_result(std::string name, double value, double limit, const char* what) {
  PropertyResult r{std::move(name), value <= limit, {}};
  r.detail = std::string(what) + " " + format("%.3e (limit %.0e)", value, limit);
  return r;
}

std::vector<DenseLayer<double>> random_double_layers(const std::vector<std::size_t>& widths, std::uint64_t seed) {
  std::vector<DenseLayer<double>> layers;
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(Stream::kSynthetic), 99}));
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    auto layer = init_layer(widths[i + 1], widths[i], seed, i).cast<double>();
    for (double& b : layer.bias.values()) b = 0.2 * (rng.uniform_double() - 0.5);
    layers.push_back(std::move(layer));
  }
  return layers;
}

double gradcheck(const std::vector<DenseLayer<double>>& layers, const Dataset& data,
                 ReluBackwardFn<double> relu_bwd, std::span<const MatrixD> masks = {}) {
  const MatrixD x = data.images.cast<double>();
  const auto stack = stack_of(layers);
  const auto cache = model_forward_masked<double>(stack, x, masks);
  const auto analytic = model_backward<double>(stack, cache, data.labels, relu_bwd);
  const auto numeric = numerical_gradient(layers, x, data.labels, 1e-4, masks);
  return max_relative_error(analytic, numeric);
}

double max_abs_diff(const std::vector<DenseLayer<float>>& a, const std::vector<DenseLayer<float>>& b) {
  double worst = 0.0;
  for (std::size_t g = 0; g < a.size(); ++g) {
    for (std::size_t i = 0; i < a[g].weight.size(); ++i) {
      worst = std::max(worst, static_cast<double>(std::abs(a[g].weight.data()[i] - b[g].weight.data()[i])));
    }
    for (std::size_t i = 0; i < a[g].bias.size(); ++i) {
      worst = std::max(worst, static_cast<double>(std::abs(a[g].bias.data()[i] - b[g].bias.data()[i])));
    }
  }
  return worst;
}

}  // namespace

Dataset synthetic_dataset(std::size_t count, std::size_t width, std::size_t classes, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(Stream::kSynthetic), count, width}));
  Dataset d{Matrix(count, width), Labels(count)};
  for (float& v : d.images.values()) v = rng.uniform_float();
  for (auto& l : d.labels) l = static_cast<std::uint8_t>(rng.uniform_index(classes));
  return d;
}

TrainConfig small_config(std::size_t n, std::size_t width) {
  TrainConfig c;
  c.n_hidden = n;
  c.width = width;
  c.batch = 8;
  c.epochs = 5;
  c.schedule.decay_every = 2;
  c.l2_lambda = 1e-2;
  return c;
}

LiteralNsnTrainer::LiteralNsnTrainer(const ModelFamily& initial) : models_(initial) {
  for (std::size_t m = 0; m <= models_.n(); ++m) momentum_.push_back(MomentumState::zeros_like(models_.model(m)));
}

void LiteralNsnTrainer::step(const Batch& batch, const TrainConfig& config, std::size_t epoch, std::size_t step) {
  models_.copy_up();
  const std::size_t n = models_.n();
  std::vector<GradientSet<float>> grads(n + 1);
  for (std::size_t m = 0; m <= n; ++m) {
    ModelSpec spec;
    if (m > 0) {
      spec.input_keep = config.input_keep;
      spec.hidden_keep = config.hidden_keep;
    }
    const auto stack = stack_of(models_.model(m));
    Rng rng = dropout_rng(config, epoch, step, m);
    const auto cache = model_forward(spec, stack, batch.images, Mode::kTrain, &rng);
    grads[m] = model_backward(stack, cache, batch.labels);
    if (m == n) add_l2(grads[m], stack, static_cast<float>(config.l2_lambda));
  }
  auto half_sum = [](float a, float b) { return 0.5f * (a + b); };
  const auto alpha = static_cast<float>(config.schedule.alpha);
  const auto lr = static_cast<float>(lr_at(config.schedule, epoch));
  for (std::size_t m = 0; m <= n; ++m) {
    GradientSet<float> g(m + 1);
    for (std::size_t o = 0; o <= m; ++o) {
      if (m < n) {
        // W_{o,m} is tied to W_{o+1,m+1}.
        g[o].weight = map_zip(grads[m][o].weight, grads[m + 1][o + 1].weight, half_sum);
        g[o].bias = map_zip(grads[m][o].bias, grads[m + 1][o + 1].bias, half_sum);
      } else if (o == 0) {
        g[o] = grads[n][0];
      } else {
        g[o].weight = map_zip(grads[n - 1][o - 1].weight, grads[n][o].weight, half_sum);
        g[o].bias = map_zip(grads[n - 1][o - 1].bias, grads[n][o].bias, half_sum);
      }
    }
    optimizer_step(models_.model(m), momentum_[m], g, MomentumFormat::kNsn, alpha, lr);
  }
}

PropertyResult check_gradients(const VerifyOptions& options) {
  const auto layers = random_double_layers({784, 16, 16, 10}, options.seed);
  const auto data = synthetic_dataset(4, 784, 10, options.seed);
  return threshold_result("gradcheck", gradcheck(layers, data, options.relu_backward), kGradTolerance,
                          "784-16-16-10 max rel err");
}

PropertyResult check_masked_gradients(const VerifyOptions& options) {
  const auto layers = random_double_layers({32, 16, 16, 10}, options.seed + 1);
  const auto data = synthetic_dataset(4, 32, 10, options.seed + 1);
  Rng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(Stream::kDropout)}));
  std::vector<MatrixD> masks;
  masks.push_back(dropout_mask<double>(4, 32, 0.8, rng));
  masks.push_back(dropout_mask<double>(4, 16, 0.5, rng));
  masks.push_back(dropout_mask<double>(4, 16, 0.5, rng));
  return threshold_result("gradcheck-masked", gradcheck(layers, data, options.relu_backward, masks), kGradTolerance,
                          "fixed dropout masks, max rel err");
}

PropertyResult check_family_gradients(const VerifyOptions& options) {
  const std::size_t width = 32;
  const ModelFamily family = build_family({3, width, width, 10}, options.seed);
  const auto data = synthetic_dataset(4, width, 10, options.seed + 2);
  double worst = 0.0;
  for (std::size_t m = 0; m <= family.n(); ++m) {
    std::vector<DenseLayer<double>> layers;
    Rng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(Stream::kSynthetic), m}));
    for (const auto* l : family.view(m)) {
      auto d = l->cast<double>();
      for (double& b : d.bias.values()) b = 0.2 * (rng.uniform_double() - 0.5);
      layers.push_back(std::move(d));
    }
    worst = std::max(worst, gradcheck(layers, data, options.relu_backward));
  }
  return threshold_result("gradcheck-family", worst, kGradTolerance, "every view of a width-32 n=3 family");
}

PropertyResult check_log_softmax(const VerifyOptions& options) {
  Rng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(Stream::kSynthetic), 5}));
  Matrix z(64, 10);
  for (float& v : z.values()) v = static_cast<float>((rng.uniform_double() - 0.5) * 200.0);
  const Matrix logp = log_softmax(z);
  double worst = 0.0;
  for (std::size_t i = 0; i < logp.rows(); ++i) {
    double total = 0.0;
    for (float v : logp.row(i)) total += std::exp(static_cast<double>(v));
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return threshold_result("log-softmax-normalization", worst, 1e-6, "max |sum exp - 1|");
}

PropertyResult check_tie_invariant(const VerifyOptions& options, std::size_t steps) {
  const TrainConfig config = small_config(3, 4);
  ModelFamily family = build_family({config.n_hidden, 4, 4, 10}, options.seed);
  MomentumState momentum = MomentumState::zeros_like(family.groups());
  LiteralNsnTrainer literal(family);
  const auto data = synthetic_dataset(64, 4, 10, options.seed);
  const BatchPlan plan{config.batch, true, options.seed};
  PropertyResult r{"tie-invariant", true, "ties bitwise equal after every step"};
  std::size_t done = 0;
  for (std::size_t epoch = 0; done < steps; ++epoch) {
    const EpochBatches batches(data, plan, epoch);
    for (std::size_t s = 0; s < batches.size() && done < steps; ++s, ++done) {
      const Batch batch = batches[s];
      train_step(family, momentum, batch, config, epoch, s);
      literal.step(batch, config, epoch, s);
      copy_up(family);
      bool ok = ReplicatedFamily(family).ties_hold();
      for (std::size_t m = 1; m <= family.n() && ok; ++m) {
        const auto bigger = family.view(m);
        const auto lesser = family.view(m - 1);
        for (std::size_t o = 0; o < lesser.size(); ++o) ok = ok && bigger[o + 1]->bitwise_equal(*lesser[o]);
      }
      ReplicatedFamily copied = literal.models();
      copied.copy_up();
      ok = ok && copied.ties_hold();
      if (!ok) {
        r.passed = false;
        r.detail = "tie broken after step " + std::to_string(done);
        return r;
      }
    }
  }
  r.detail += " (" + std::to_string(steps) + " steps, width 4, n=3)";
  return r;
}

PropertyResult check_detachment(const VerifyOptions& options) {
  const TrainConfig config = small_config(3, 8);
  ModelFamily family = build_family({config.n_hidden, 8, 8, 10}, options.seed);
  MomentumState momentum = MomentumState::zeros_like(family.groups());
  const auto data = synthetic_dataset(32, 8, 10, options.seed + 3);
  const EpochBatches batches(data, {config.batch, true, options.seed}, 0);
  for (std::size_t s = 0; s < batches.size(); ++s) train_step(family, momentum, batches[s], config, 0, s);

  PropertyResult r{"detachment-exactness", true, "detach(k) logits bitwise equal view(n-k), k=0..3"};
  for (std::size_t k = 0; k <= family.n(); ++k) {
    ModelSpec spec;
    const auto a = model_forward(spec, detach(family, k), data.images, Mode::kEval);
    const auto b = model_forward(spec, family.view(family.n() - k), data.images, Mode::kEval);
    if (!a.pre.back().bitwise_equal(b.pre.back()) || !a.logp.bitwise_equal(b.logp)) {
      r.passed = false;
      r.detail = "logits differ at k=" + std::to_string(k);
    }
  }
  return r;
}

PropertyResult check_momentum_equivalence(const VerifyOptions& options, std::size_t steps) {
  // f(w) = 0.5 * sum c_i (w_i - t_i)^2
  const std::size_t dim = 16;
  Rng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(Stream::kSynthetic), 8}));
  Matrix curvature(1, dim), target(1, dim), w0(1, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    curvature(0, i) = static_cast<float>(0.5 + 1.5 * rng.uniform_double());
    target(0, i) = static_cast<float>(2.0 * rng.uniform_double() - 1.0);
    w0(0, i) = static_cast<float>(4.0 * rng.uniform_double() - 2.0);
  }
  auto grad = [&](const Matrix& w) { return hadamard(curvature, subtract(w, target)); };
  const float alpha = 0.9f;
  const float lr = 0.05f;
  Matrix w_nsn = w0, v_nsn(1, dim), w_std = w0, v_std(1, dim);
  double worst = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    v_nsn = momentum_nsn(v_nsn, grad(w_nsn), alpha);
    w_nsn = apply_update(w_nsn, v_nsn, lr);
    v_std = momentum_standard(v_std, grad(w_std), alpha);
    w_std = apply_update(w_std, v_std, lr * (1.0f - alpha));
    for (std::size_t i = 0; i < dim; ++i) {
      worst = std::max(worst, static_cast<double>(std::abs(w_nsn(0, i) - w_std(0, i))));
    }
  }
  return threshold_result("momentum-equivalence", worst, 1e-6,
                          ("max |W_nsn - W_std| over " + std::to_string(steps) + " steps").c_str());
}

PropertyResult check_canonical_vs_literal(const VerifyOptions& options, std::size_t steps) {
  const TrainConfig config = small_config(2, 4);
  ModelFamily family = build_family({config.n_hidden, 4, 4, 10}, options.seed + 4);
  MomentumState momentum = MomentumState::zeros_like(family.groups());
  LiteralNsnTrainer literal(family);
  const auto data = synthetic_dataset(80, 4, 10, options.seed + 4);
  const BatchPlan plan{config.batch, true, options.seed};
  double worst = 0.0;
  std::size_t done = 0;
  for (std::size_t epoch = 0; done < steps; ++epoch) {
    const EpochBatches batches(data, plan, epoch);
    for (std::size_t s = 0; s < batches.size() && done < steps; ++s, ++done) {
      const Batch batch = batches[s];
      train_step(family, momentum, batch, config, epoch, s);
      literal.step(batch, config, epoch, s);
      worst = std::max(worst, max_abs_diff(family.groups(), literal.models().canonical()));
    }
  }
  return threshold_result("canonical-vs-literal", worst, 1e-6,
                          ("max |canonical - literal owner| over " + std::to_string(steps) + " steps").c_str());
}

std::vector<PropertyResult> run_verify(const VerifyOptions& options) {
  return {check_gradients(options),          check_masked_gradients(options),    check_family_gradients(options),
          check_log_softmax(options),        check_tie_invariant(options),       check_detachment(options),
          check_momentum_equivalence(options), check_canonical_vs_literal(options)};
}

}  // namespace nsn
