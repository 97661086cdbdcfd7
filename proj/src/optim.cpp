#include "nsn/optim.hpp"

#include <cmath>
#include <string>

namespace nsn {

void Schedule::validate() const {
  if (!(base_lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("momentum alpha must lie in [0, 1)");
  if (decay_every == 0) throw ConfigError("decay interval must be positive");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("decay factor must lie in (0, 1]");
}

double lr_at(const Schedule& schedule, std::size_t epoch) {
  const auto steps = static_cast<double>(epoch / schedule.decay_every);
  return schedule.base_lr * std::pow(schedule.decay_factor, steps);
}

Matrix momentum_standard(const Matrix& v, const Matrix& g, float alpha) {
  return map_zip(v, g, [alpha](float vv, float gg) { return alpha * vv + gg; });
}

Matrix momentum_nsn(const Matrix& v, const Matrix& g, float alpha) {
  const float beta = 1.0f - alpha;
  return map_zip(v, g, [alpha, beta](float vv, float gg) { return alpha * vv + beta * gg; });
}

Matrix apply_update(const Matrix& w, const Matrix& v, float lr) {
  return map_zip(w, v, [lr](float ww, float vv) { return ww - lr * vv; });
}

Matrix l2_gradient(float lambda, const Matrix& w) {
  if (!(lambda >= 0.0f)) throw ConfigError("L2 lambda must be non-negative");
  return scale(lambda, w);
}

MomentumState MomentumState::zeros_like(const std::vector<DenseLayer<float>>& params) {
  MomentumState s;
  for (const auto& p : params) {
    s.velocity.push_back({Matrix(p.weight.rows(), p.weight.cols()), Matrix(p.bias.rows(), p.bias.cols())});
  }
  return s;
}

void optimizer_step(std::vector<DenseLayer<float>>& params, MomentumState& state, const GradientSet<float>& grads,
                    MomentumFormat format, float alpha, float lr) {
  if (params.size() != grads.size() || params.size() != state.velocity.size()) {
    throw ConsistencyError("optimizer_step: " + std::to_string(params.size()) + " parameter groups, " +
                           std::to_string(grads.size()) + " gradients, " + std::to_string(state.velocity.size()) +
                           " momentum buffers");
  }
  auto momentum = format == MomentumFormat::kNsn ? &momentum_nsn : &momentum_standard;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& v = state.velocity[i];
    v.weight = momentum(v.weight, grads[i].weight, alpha);
    v.bias = momentum(v.bias, grads[i].bias, alpha);
    params[i].weight = apply_update(params[i].weight, v.weight, lr);
    params[i].bias = apply_update(params[i].bias, v.bias, lr);
  }
}

void add_l2(GradientSet<float>& grads, const LayerStack<float>& layers, float lambda) {
  if (grads.size() != layers.size()) throw ConsistencyError("add_l2: gradient/layer count mismatch");
  if (lambda == 0.0f) return;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    grads[i].weight = add(grads[i].weight, l2_gradient(lambda, layers[i]->weight));
  }
}

}  // namespace nsn
