// Adam with L2 regularization folded into the gradient (not decoupled).
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pico/tensor.hpp"

namespace pico {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double l2_coefficient = 0.0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
      throw ConfigError("beta1 and beta2 must lie in [0, 1)");
    }
    if (l2_coefficient < 0.0) throw ConfigError("l2 coefficient must be >= 0");
  }
};

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  static AdamState like(std::span<const Tensor* const> params) {
    AdamState s;
    for (const Tensor* p : params) {
      s.first_moment.emplace_back(p->shape());
      s.second_moment.emplace_back(p->shape());
    }
    return s;
  }
};

//   g <- g + l2 * theta
//   m <- b1 m + (1 - b1) g,   v <- b2 v + (1 - b2) g^2,   t <- t + 1
//   theta <- theta - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
inline void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
                      AdamState& state, const AdamOptions& opt) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw DimensionError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(state.first_moment[i])) {
      throw DimensionError("adam_step: shape mismatch for tensor " + std::to_string(i));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k] + opt.l2_coefficient * p[k];
      m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * gk;
      v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * gk * gk;
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
  }
}

// Scales all gradients so their joint L2 norm is at most max_norm; returns the
// norm before clipping.
inline double clip_global_norm(std::span<Tensor* const> grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor* g : grads) sq += squared_norm(g->values());
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Tensor* g : grads) {
      for (double& v : *g) v *= s;
    }
  }
  return norm;
}

}  // namespace pico
