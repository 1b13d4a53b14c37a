// LSTM cell and bidirectional LSTM with hand-written backward passes.
//
// Gate layout inside the 4H pre-activation vector is fixed as
//   [0, H)   input gate        i = sigmoid(.)
//   [H, 2H)  forget gate       f = sigmoid(.)
//   [2H, 3H) cell candidate    g = tanh(.)
//   [3H, 4H) output gate       o = sigmoid(.)
// c = f * c_prev + i * g,  h = o * tanh(c).
#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "pico/ops.hpp"
#include "pico/tensor.hpp"

namespace pico {

struct LstmCellParams {
  Tensor input_weights;      // [4H x D]
  Tensor recurrent_weights;  // [4H x H]
  Tensor bias;               // [4H]

  static LstmCellParams zeros(std::size_t input_size, std::size_t hidden_size) {
    return {Tensor::matrix(4 * hidden_size, input_size),
            Tensor::matrix(4 * hidden_size, hidden_size), Tensor::vector(4 * hidden_size)};
  }

  // Weights uniform in [-scale, scale]; forget-gate bias 1, other biases uniform.
  static LstmCellParams random(std::size_t input_size, std::size_t hidden_size,
                               std::mt19937_64& rng, double scale = 0.1) {
    LstmCellParams p = zeros(input_size, hidden_size);
    uniform_fill(p.input_weights, -scale, scale, rng);
    uniform_fill(p.recurrent_weights, -scale, scale, rng);
    uniform_fill(p.bias, -scale, scale, rng);
    for (std::size_t k = hidden_size; k < 2 * hidden_size; ++k) p.bias[k] = 1.0;
    return p;
  }

  std::size_t hidden_size() const { return recurrent_weights.cols(); }
  std::size_t input_size() const { return input_weights.cols(); }

  void validate() const {
    if (recurrent_weights.rank() != 2 || input_weights.rank() != 2 || bias.rank() != 1) {
      throw DimensionError("LSTM parameters have wrong rank");
    }
    const std::size_t h = recurrent_weights.cols();
    require_shape(recurrent_weights, {4 * h, h}, "LSTM recurrent_weights");
    require_shape(input_weights, {4 * h, input_weights.cols()}, "LSTM input_weights");
    require_shape(bias, {4 * h}, "LSTM bias");
  }
};

struct LstmStepCache {
  Tensor x, h_prev, c_prev;
  Tensor i, f, g, o;
  Tensor c, tanh_c;
  bool valid = false;
};

struct LstmStepResult {
  Tensor h;
  Tensor c;
  LstmStepCache cache;
};

inline LstmStepResult lstm_step(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                                const LstmCellParams& params) {
  params.validate();
  const std::size_t hs = params.hidden_size();
  require_size(x.values(), params.input_size(), "lstm_step input");
  require_size(h_prev.values(), hs, "lstm_step h_prev");
  require_size(c_prev.values(), hs, "lstm_step c_prev");

  Tensor z = params.bias;
  matvec_add(params.input_weights, x.values(), z.values());
  matvec_add(params.recurrent_weights, h_prev.values(), z.values());

  LstmStepResult out;
  LstmStepCache& k = out.cache;
  k.i = Tensor::vector(hs);
  k.f = Tensor::vector(hs);
  k.g = Tensor::vector(hs);
  k.o = Tensor::vector(hs);
  k.c = Tensor::vector(hs);
  k.tanh_c = Tensor::vector(hs);
  out.h = Tensor::vector(hs);
  for (std::size_t j = 0; j < hs; ++j) {
    k.i[j] = sigmoid(z[j]);
    k.f[j] = sigmoid(z[hs + j]);
    k.g[j] = std::tanh(z[2 * hs + j]);
    k.o[j] = sigmoid(z[3 * hs + j]);
    k.c[j] = k.f[j] * c_prev[j] + k.i[j] * k.g[j];
    k.tanh_c[j] = std::tanh(k.c[j]);
    out.h[j] = k.o[j] * k.tanh_c[j];
  }
  out.c = k.c;
  k.x = x;
  k.h_prev = h_prev;
  k.c_prev = c_prev;
  k.valid = true;
  return out;
}

struct LstmStepGradients {
  Tensor dx;
  Tensor dh_prev;
  Tensor dc_prev;
};

// Given dL/dh and dL/dc for this step's outputs, accumulates parameter
// gradients into `grads` and returns gradients for the step inputs.
inline LstmStepGradients lstm_step_backward(const LstmStepCache& k, const Tensor& dh,
                                            const Tensor& dc, const LstmCellParams& params,
                                            LstmCellParams& grads) {
  if (!k.valid) throw StateError("lstm_step_backward called without a forward cache");
  const std::size_t hs = params.hidden_size();
  require_size(dh.values(), hs, "lstm_step_backward dh");
  require_size(dc.values(), hs, "lstm_step_backward dc");

  Tensor dz = Tensor::vector(4 * hs);
  LstmStepGradients out{Tensor::vector(params.input_size()), Tensor::vector(hs),
                        Tensor::vector(hs)};
  for (std::size_t j = 0; j < hs; ++j) {
    const double d_o = dh[j] * k.tanh_c[j];
    const double dc_total = dc[j] + dh[j] * k.o[j] * (1.0 - k.tanh_c[j] * k.tanh_c[j]);
    const double d_i = dc_total * k.g[j];
    const double d_g = dc_total * k.i[j];
    const double d_f = dc_total * k.c_prev[j];
    out.dc_prev[j] = dc_total * k.f[j];
    dz[j] = d_i * k.i[j] * (1.0 - k.i[j]);
    dz[hs + j] = d_f * k.f[j] * (1.0 - k.f[j]);
    dz[2 * hs + j] = d_g * (1.0 - k.g[j] * k.g[j]);
    dz[3 * hs + j] = d_o * k.o[j] * (1.0 - k.o[j]);
  }
  outer_add(grads.input_weights, dz.values(), k.x.values());
  outer_add(grads.recurrent_weights, dz.values(), k.h_prev.values());
  axpy(1.0, dz.values(), grads.bias.values());
  matvec_transposed_add(params.input_weights, dz.values(), out.dx.values());
  matvec_transposed_add(params.recurrent_weights, dz.values(), out.dh_prev.values());
  return out;
}

struct BiLstmCache {
  std::vector<LstmStepCache> forward;   // indexed by position
  std::vector<LstmStepCache> backward;  // indexed by position
  bool valid = false;
};

struct BiLstmOutput {
  std::vector<Tensor> outputs;  // [fwd_t ; bwd_t], each 2H
  BiLstmCache cache;
};

inline BiLstmOutput bilstm_sequence(std::span<const Tensor> inputs, const LstmCellParams& fwd,
                                    const LstmCellParams& bwd) {
  if (inputs.empty()) throw EmptyInputError("bilstm_sequence on an empty sequence");
  const std::size_t n = inputs.size();
  BiLstmOutput out;
  out.cache.forward.resize(n);
  out.cache.backward.resize(n);
  std::vector<Tensor> hf(n), hb(n);

  Tensor h = Tensor::vector(fwd.hidden_size()), c = h;
  for (std::size_t t = 0; t < n; ++t) {
    auto step = lstm_step(inputs[t], h, c, fwd);
    h = step.h;
    c = step.c;
    hf[t] = std::move(step.h);
    out.cache.forward[t] = std::move(step.cache);
  }
  h = Tensor::vector(bwd.hidden_size());
  c = h;
  for (std::size_t r = n; r-- > 0;) {
    auto step = lstm_step(inputs[r], h, c, bwd);
    h = step.h;
    c = step.c;
    hb[r] = std::move(step.h);
    out.cache.backward[r] = std::move(step.cache);
  }
  out.outputs.reserve(n);
  for (std::size_t t = 0; t < n; ++t) out.outputs.push_back(concat(hf[t], hb[t]));
  out.cache.valid = true;
  return out;
}

// Returns dL/d(inputs) and accumulates parameter gradients.
inline std::vector<Tensor> bilstm_backward(const BiLstmCache& cache,
                                           std::span<const Tensor> d_outputs,
                                           const LstmCellParams& fwd, const LstmCellParams& bwd,
                                           LstmCellParams& fwd_grads, LstmCellParams& bwd_grads) {
  if (!cache.valid) throw StateError("bilstm_backward called without a forward cache");
  const std::size_t n = cache.forward.size();
  if (d_outputs.size() != n) throw DimensionError("bilstm_backward: upstream length mismatch");
  const std::size_t hf = fwd.hidden_size(), hb = bwd.hidden_size();
  std::vector<Tensor> dx(n, Tensor::vector(fwd.input_size()));

  Tensor dh_next = Tensor::vector(hf), dc_next = Tensor::vector(hf);
  for (std::size_t t = n; t-- > 0;) {
    Tensor dh = dh_next;
    for (std::size_t j = 0; j < hf; ++j) dh[j] += d_outputs[t][j];
    auto g = lstm_step_backward(cache.forward[t], dh, dc_next, fwd, fwd_grads);
    axpy(1.0, g.dx.values(), dx[t].values());
    dh_next = std::move(g.dh_prev);
    dc_next = std::move(g.dc_prev);
  }
  dh_next = Tensor::vector(hb);
  dc_next = Tensor::vector(hb);
  for (std::size_t t = 0; t < n; ++t) {
    Tensor dh = dh_next;
    for (std::size_t j = 0; j < hb; ++j) dh[j] += d_outputs[t][hf + j];
    auto g = lstm_step_backward(cache.backward[t], dh, dc_next, bwd, bwd_grads);
    axpy(1.0, g.dx.values(), dx[t].values());
    dh_next = std::move(g.dh_prev);
    dc_next = std::move(g.dc_prev);
  }
  return dx;
}

}  // namespace pico
