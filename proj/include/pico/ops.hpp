// Elementwise functions, softmax, affine layers and dropout.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "pico/tensor.hpp"

namespace pico {

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sum(exp(v))) with max subtraction. Returns -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

inline Tensor softmax(std::span<const double> logits) {
  Tensor out = Tensor::vector(logits.size());
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

inline Tensor softmax(const Tensor& logits) { return softmax(logits.values()); }

// Given y = softmax(z) and dL/dy, returns dL/dz.
inline Tensor softmax_backward(const Tensor& y, std::span<const double> dy) {
  const double s = dot(y.values(), dy);
  Tensor dz = Tensor::vector(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dz[i] = y[i] * (dy[i] - s);
  return dz;
}

// KL(p || q) for two discrete distributions given as probabilities.
// Terms with p_i = 0 contribute nothing.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require_size(q, p.size(), "kl_divergence");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  return kl;
}

struct LinearParams {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]

  static LinearParams zeros(std::size_t in, std::size_t out) {
    return {Tensor::matrix(out, in), Tensor::vector(out)};
  }
  std::size_t input_size() const { return weight.cols(); }
  std::size_t output_size() const { return weight.rows(); }
};

struct LinearCache {
  Tensor input;
  bool valid = false;
};

// y = W x + b
inline Tensor linear_forward(const LinearParams& p, const Tensor& x, LinearCache* cache = nullptr) {
  require_size(x.values(), p.input_size(), "linear_forward input");
  Tensor y = p.bias;
  matvec_add(p.weight, x.values(), y.values());
  if (cache) {
    cache->input = x;
    cache->valid = true;
  }
  return y;
}

// Accumulates dW += dy x^T, db += dy into grads; returns dx = W^T dy.
inline Tensor linear_backward(const LinearParams& p, const LinearCache& cache, const Tensor& dy,
                              LinearParams& grads) {
  if (!cache.valid) throw StateError("linear_backward called without a forward cache");
  require_size(dy.values(), p.output_size(), "linear_backward upstream");
  outer_add(grads.weight, dy.values(), cache.input.values());
  axpy(1.0, dy.values(), grads.bias.values());
  Tensor dx = Tensor::vector(p.input_size());
  matvec_transposed_add(p.weight, dy.values(), dx.values());
  return dx;
}

// Inverted-dropout mask: entries are 0 or 1/(1-rate).
inline Tensor dropout_mask(std::size_t n, double rate, std::mt19937_64& rng) {
  Tensor mask = Tensor::vector(n, 1.0);
  if (rate <= 0.0) return mask;
  std::bernoulli_distribution drop(rate);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = drop(rng) ? 0.0 : keep_scale;
  return mask;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

inline void uniform_fill(Tensor& t, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t) v = dist(rng);
}

}  // namespace pico
