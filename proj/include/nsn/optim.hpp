#pragma once

#include <cstddef>
#include <vector>

#include "nsn/graph.hpp"

namespace nsn {

/// Step-decay learning rate plus momentum coefficient.
struct Schedule {
  double base_lr = 0.3;
  std::size_t decay_every = 200;  // epochs
  double decay_factor = 1.0 / 3.0;
  double alpha = 0.9;

  void validate() const;
};

/// base_lr * decay_factor^floor(epoch / decay_every)
double lr_at(const Schedule& schedule, std::size_t epoch);

enum class MomentumFormat {
  kStandard,  // V <- alpha V + G
  kNsn,       // V <- alpha V + (1 - alpha) G
};

Matrix momentum_standard(const Matrix& v, const Matrix& g, float alpha);
Matrix momentum_nsn(const Matrix& v, const Matrix& g, float alpha);

/// W - lr * V
Matrix apply_update(const Matrix& w, const Matrix& v, float lr);

/// Gradient of (lambda / 2) * ||W||^2.
Matrix l2_gradient(float lambda, const Matrix& w);

/// One velocity buffer per parameter tensor, zero-initialized.
struct MomentumState {
  std::vector<LayerGrad<float>> velocity;

  static MomentumState zeros_like(const std::vector<DenseLayer<float>>& params);
};

/// Momentum update followed by W <- W - lr V for every layer in `params`.
void optimizer_step(std::vector<DenseLayer<float>>& params, MomentumState& state, const GradientSet<float>& grads,
                    MomentumFormat format, float alpha, float lr);

/// Adds lambda * W to every weight gradient (biases untouched).
void add_l2(GradientSet<float>& grads, const LayerStack<float>& layers, float lambda);

}  // namespace nsn
