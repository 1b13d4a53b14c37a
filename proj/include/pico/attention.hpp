// Attentive pooling over a sequence of hidden states:
//   u_t = tanh(W h_t + b),  alpha = softmax_t(u_t . context),  out = sum_t alpha_t h_t
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "pico/ops.hpp"
#include "pico/tensor.hpp"

namespace pico {

struct AttentionParams {
  Tensor projection;  // [A x in]
  Tensor bias;        // [A]
  Tensor context;     // [A]

  static AttentionParams zeros(std::size_t input_size, std::size_t attention_size) {
    return {Tensor::matrix(attention_size, input_size), Tensor::vector(attention_size),
            Tensor::vector(attention_size)};
  }
  std::size_t input_size() const { return projection.cols(); }
  std::size_t attention_size() const { return projection.rows(); }
};

struct AttentionCache {
  std::vector<Tensor> hidden;
  std::vector<Tensor> projected;
  Tensor weights;
  bool valid = false;
};

struct AttentionOutput {
  Tensor pooled;
  Tensor weights;
  AttentionCache cache;
};

inline AttentionOutput attention_forward(std::span<const Tensor> hidden,
                                         const AttentionParams& params) {
  if (hidden.empty()) throw EmptyInputError("attention over an empty sequence");
  const std::size_t n = hidden.size(), in = params.input_size(), a = params.attention_size();
  AttentionOutput out;
  Tensor scores = Tensor::vector(n);
  out.cache.projected.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    require_size(hidden[t].values(), in, "attention input");
    Tensor u = params.bias;
    matvec_add(params.projection, hidden[t].values(), u.values());
    for (std::size_t j = 0; j < a; ++j) u[j] = std::tanh(u[j]);
    scores[t] = dot(u.values(), params.context.values());
    out.cache.projected.push_back(std::move(u));
  }
  out.weights = softmax(scores);
  out.pooled = Tensor::vector(in);
  for (std::size_t t = 0; t < n; ++t) axpy(out.weights[t], hidden[t].values(), out.pooled.values());
  out.cache.hidden.assign(hidden.begin(), hidden.end());
  out.cache.weights = out.weights;
  out.cache.valid = true;
  return out;
}

inline std::vector<Tensor> attention_backward(const AttentionCache& cache, const Tensor& d_pooled,
                                              const AttentionParams& params,
                                              AttentionParams& grads) {
  if (!cache.valid) throw StateError("attention_backward called without a forward cache");
  const std::size_t n = cache.hidden.size(), a = params.attention_size();
  require_size(d_pooled.values(), params.input_size(), "attention_backward upstream");

  std::vector<Tensor> dh(n);
  Tensor d_weights = Tensor::vector(n);
  for (std::size_t t = 0; t < n; ++t) {
    dh[t] = Tensor::vector(params.input_size());
    axpy(cache.weights[t], d_pooled.values(), dh[t].values());
    d_weights[t] = dot(cache.hidden[t].values(), d_pooled.values());
  }
  const Tensor d_scores = softmax_backward(cache.weights, d_weights.values());
  Tensor d_pre = Tensor::vector(a);
  for (std::size_t t = 0; t < n; ++t) {
    const Tensor& u = cache.projected[t];
    axpy(d_scores[t], u.values(), grads.context.values());
    for (std::size_t j = 0; j < a; ++j) {
      d_pre[j] = d_scores[t] * params.context[j] * (1.0 - u[j] * u[j]);
    }
    outer_add(grads.projection, d_pre.values(), cache.hidden[t].values());
    axpy(1.0, d_pre.values(), grads.bias.values());
    matvec_transposed_add(params.projection, d_pre.values(), dh[t].values());
  }
  return dh;
}

}  // namespace pico
