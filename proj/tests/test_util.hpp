// Shared helpers for the unit tests: seeded random tensors and naive
// reference implementations used as independent oracles.
#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "pico/lstm.hpp"
#include "pico/model.hpp"
#include "pico/tensor.hpp"

namespace pico::test {

inline Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  uniform_fill(t, lo, hi, rng);
  return t;
}

inline LstmCellParams random_lstm(std::size_t d, std::size_t h, std::mt19937_64& rng,
                                  double scale = 0.5) {
  return {random_tensor({4 * h, d}, rng, -scale, scale), random_tensor({4 * h, h}, rng, -scale, scale),
          random_tensor({4 * h}, rng, -scale, scale)};
}

// Straight transcription of the LSTM equations, one gate at a time.
struct NaiveLstmState {
  std::vector<double> h, c;
};

inline NaiveLstmState naive_lstm_step(const std::vector<double>& x, const NaiveLstmState& prev,
                                      const LstmCellParams& p) {
  const std::size_t hs = p.hidden_size(), d = p.input_size();
  auto pre = [&](std::size_t gate, std::size_t j) {
    const std::size_t r = gate * hs + j;
    long double z = p.bias[r];
    for (std::size_t k = 0; k < d; ++k) z += static_cast<long double>(p.input_weights(r, k)) * x[k];
    for (std::size_t k = 0; k < hs; ++k) {
      z += static_cast<long double>(p.recurrent_weights(r, k)) * prev.h[k];
    }
    return static_cast<double>(z);
  };
  auto logistic = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  NaiveLstmState next{std::vector<double>(hs), std::vector<double>(hs)};
  for (std::size_t j = 0; j < hs; ++j) {
    const double i = logistic(pre(0, j));
    const double f = logistic(pre(1, j));
    const double g = std::tanh(pre(2, j));
    const double o = logistic(pre(3, j));
    next.c[j] = f * prev.c[j] + i * g;
    next.h[j] = o * std::tanh(next.c[j]);
  }
  return next;
}

inline std::vector<std::vector<double>> naive_bilstm(const std::vector<std::vector<double>>& xs,
                                                     const LstmCellParams& fwd,
                                                     const LstmCellParams& bwd) {
  const std::size_t n = xs.size();
  std::vector<std::vector<double>> out(n);
  NaiveLstmState s{std::vector<double>(fwd.hidden_size()), std::vector<double>(fwd.hidden_size())};
  for (std::size_t t = 0; t < n; ++t) {
    s = naive_lstm_step(xs[t], s, fwd);
    out[t] = s.h;
  }
  s = {std::vector<double>(bwd.hidden_size()), std::vector<double>(bwd.hidden_size())};
  for (std::size_t t = n; t-- > 0;) {
    s = naive_lstm_step(xs[t], s, bwd);
    out[t].insert(out[t].end(), s.h.begin(), s.h.end());
  }
  return out;
}

inline std::vector<double> to_vec(const Tensor& t) { return {t.begin(), t.end()}; }

inline ModelConfig tiny_config(std::size_t d = 3, std::size_t hw = 4, std::size_t hs = 4) {
  ModelConfig c;
  c.embedding_dim = d;
  c.word_hidden = hw;
  c.sentence_hidden = hs;
  c.attention_dim = 0;
  return c;
}

inline EmbeddedAbstract random_inputs(const std::vector<std::size_t>& words_per_sentence,
                                      std::size_t d, std::mt19937_64& rng) {
  EmbeddedAbstract x;
  for (std::size_t n : words_per_sentence) {
    std::vector<Tensor> s;
    for (std::size_t w = 0; w < n; ++w) s.push_back(random_tensor({d}, rng));
    x.push_back(std::move(s));
  }
  return x;
}

inline std::vector<double> flatten_inputs(const EmbeddedAbstract& x) {
  std::vector<double> out;
  for (const auto& s : x) {
    for (const auto& w : s) out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

inline EmbeddedAbstract unflatten_inputs(std::span<const double> flat, const EmbeddedAbstract& like) {
  EmbeddedAbstract out = like;
  std::size_t off = 0;
  for (auto& s : out) {
    for (auto& w : s) {
      for (double& v : w) v = flat[off++];
    }
  }
  return out;
}

}  // namespace pico::test
