// Hierarchical sentence labeler:
//   words -> word-level bi-LSTM -> attentive pooling -> sentence vector
//   sentence vectors -> sentence-level bi-LSTM -> affine emission scores -> CRF
//
// The word-level encoder is shared by every sentence. Dropout (inverted) is
// applied to the embedded inputs, the pooled sentence vectors and the
// contextualized vectors when training.
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pico/attention.hpp"
#include "pico/corpus.hpp"
#include "pico/crf.hpp"
#include "pico/embeddings.hpp"
#include "pico/lstm.hpp"
#include "pico/ops.hpp"
#include "pico/tensor.hpp"

namespace pico {

// Per sentence, per word embedding vectors. Also the shape of a perturbation.
using EmbeddedAbstract = std::vector<std::vector<Tensor>>;

struct ModelConfig {
  std::size_t embedding_dim = 200;
  std::size_t word_hidden = 100;
  std::size_t sentence_hidden = 100;
  std::size_t attention_dim = 0;  // 0 means 2 * word_hidden
  std::size_t num_labels = kNumLabels;
  // When false the sentence-level bi-LSTM is replaced by the identity.
  bool contextualize = true;

  std::size_t attention_size() const { return attention_dim ? attention_dim : 2 * word_hidden; }
  std::size_t emission_input() const {
    return contextualize ? 2 * sentence_hidden : 2 * word_hidden;
  }

  std::uint64_t hash() const {
    const std::uint64_t fields[] = {embedding_dim, word_hidden,  sentence_hidden,
                                    attention_size(), num_labels, contextualize ? 1u : 0u};
    return fnv1a(fields, sizeof fields);
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ModelParams {
  ModelConfig config;
  LstmCellParams word_fwd, word_bwd;
  AttentionParams attention;
  LstmCellParams sentence_fwd, sentence_bwd;
  LinearParams emission;
  CrfParams crf;

  static ModelParams zeros(const ModelConfig& c) {
    ModelParams p;
    p.config = c;
    p.word_fwd = LstmCellParams::zeros(c.embedding_dim, c.word_hidden);
    p.word_bwd = p.word_fwd;
    p.attention = AttentionParams::zeros(2 * c.word_hidden, c.attention_size());
    if (c.contextualize) {
      p.sentence_fwd = LstmCellParams::zeros(2 * c.word_hidden, c.sentence_hidden);
      p.sentence_bwd = p.sentence_fwd;
    } else {
      p.sentence_fwd = {Tensor({0, 0}), Tensor({0, 0}), Tensor({0})};
      p.sentence_bwd = p.sentence_fwd;
    }
    p.emission = LinearParams::zeros(c.emission_input(), c.num_labels);
    p.crf = CrfParams::zeros(c.num_labels);
    return p;
  }

  // Uniform [-scale, scale] everywhere except LSTM forget-gate biases (1.0).
  static ModelParams initialize(const ModelConfig& c, std::uint64_t seed, double scale = 0.1) {
    std::mt19937_64 rng(seed);
    ModelParams p = zeros(c);
    p.word_fwd = LstmCellParams::random(c.embedding_dim, c.word_hidden, rng, scale);
    p.word_bwd = LstmCellParams::random(c.embedding_dim, c.word_hidden, rng, scale);
    if (c.contextualize) {
      p.sentence_fwd = LstmCellParams::random(2 * c.word_hidden, c.sentence_hidden, rng, scale);
      p.sentence_bwd = LstmCellParams::random(2 * c.word_hidden, c.sentence_hidden, rng, scale);
    }
    for (Tensor* t : {&p.attention.projection, &p.attention.bias, &p.attention.context,
                      &p.emission.weight, &p.emission.bias, &p.crf.transitions, &p.crf.start,
                      &p.crf.end}) {
      uniform_fill(*t, -scale, scale, rng);
    }
    return p;
  }

  // Fixed enumeration order used by the optimizer, checkpoints and flattening.
  std::vector<std::pair<std::string, Tensor*>> named_tensors() {
    return {{"word_fwd.input_weights", &word_fwd.input_weights},
            {"word_fwd.recurrent_weights", &word_fwd.recurrent_weights},
            {"word_fwd.bias", &word_fwd.bias},
            {"word_bwd.input_weights", &word_bwd.input_weights},
            {"word_bwd.recurrent_weights", &word_bwd.recurrent_weights},
            {"word_bwd.bias", &word_bwd.bias},
            {"attention.projection", &attention.projection},
            {"attention.bias", &attention.bias},
            {"attention.context", &attention.context},
            {"sentence_fwd.input_weights", &sentence_fwd.input_weights},
            {"sentence_fwd.recurrent_weights", &sentence_fwd.recurrent_weights},
            {"sentence_fwd.bias", &sentence_fwd.bias},
            {"sentence_bwd.input_weights", &sentence_bwd.input_weights},
            {"sentence_bwd.recurrent_weights", &sentence_bwd.recurrent_weights},
            {"sentence_bwd.bias", &sentence_bwd.bias},
            {"emission.weight", &emission.weight},
            {"emission.bias", &emission.bias},
            {"crf.transitions", &crf.transitions},
            {"crf.start", &crf.start},
            {"crf.end", &crf.end}};
  }

  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const {
    auto named = const_cast<ModelParams*>(this)->named_tensors();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(named.size());
    for (auto& [n, t] : named) out.emplace_back(std::move(n), t);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_tensors()) n += t->size();
    return n;
  }

  std::uint64_t checksum() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& [name, t] : named_tensors()) h = pico::checksum(*t, h);
    return h;
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& [name, t] : named_tensors()) out.insert(out.end(), t->begin(), t->end());
    return out;
  }

  void unflatten(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw DimensionError("unflatten: wrong parameter count");
    std::size_t off = 0;
    for (auto& [name, t] : named_tensors()) {
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                flat.begin() + static_cast<std::ptrdiff_t>(off + t->size()), t->begin());
      off += t->size();
    }
  }

  // this += scale * other
  void add_scaled(const ModelParams& other, double scale) {
    auto mine = named_tensors();
    auto theirs = other.named_tensors();
    for (std::size_t i = 0; i < mine.size(); ++i) {
      axpy(scale, theirs[i].second->values(), mine[i].second->values());
    }
  }

  void add_crf_gradients(const CrfParams& g, double scale) {
    axpy(scale, g.transitions.values(), crf.transitions.values());
    axpy(scale, g.start.values(), crf.start.values());
    axpy(scale, g.end.values(), crf.end.values());
  }
};

struct DropoutSpec {
  double rate = 0.0;
  bool training = false;
  bool active() const { return training && rate > 0.0; }
};

// Multiplicative masks; empty containers mean "no dropout at that site".
struct DropoutMasks {
  std::vector<std::vector<Tensor>> words;
  std::vector<Tensor> sentences;
  std::vector<Tensor> contexts;
};

struct SentenceEncoding {
  Tensor vector;
  Tensor attention_weights;
  BiLstmCache lstm;
  AttentionCache attention;
};

// Word-level bi-LSTM followed by attentive pooling.
inline SentenceEncoding encode_sentence(std::span<const Tensor> embedded, const ModelParams& params) {
  if (embedded.empty()) throw EmptyInputError("encode_sentence on an empty sentence");
  auto hidden = bilstm_sequence(embedded, params.word_fwd, params.word_bwd);
  auto pooled = attention_forward(hidden.outputs, params.attention);
  return {std::move(pooled.pooled), std::move(pooled.weights), std::move(hidden.cache),
          std::move(pooled.cache)};
}

struct Contextualized {
  std::vector<Tensor> outputs;
  BiLstmCache lstm;
};

inline Contextualized contextualize(std::span<const Tensor> sentence_vectors,
                                    const ModelParams& params) {
  if (!params.config.contextualize) {
    if (sentence_vectors.empty()) throw EmptyInputError("contextualize on an empty abstract");
    return {std::vector<Tensor>(sentence_vectors.begin(), sentence_vectors.end()), {}};
  }
  auto out = bilstm_sequence(sentence_vectors, params.sentence_fwd, params.sentence_bwd);
  return {std::move(out.outputs), std::move(out.cache)};
}

inline Tensor emission_scores(std::span<const Tensor> contextualized, const ModelParams& params,
                              std::vector<LinearCache>* caches = nullptr) {
  if (contextualized.empty()) throw EmptyInputError("emission_scores on an empty abstract");
  const std::size_t l = params.emission.output_size();
  Tensor scores = Tensor::matrix(contextualized.size(), l);
  if (caches) caches->assign(contextualized.size(), {});
  for (std::size_t t = 0; t < contextualized.size(); ++t) {
    const Tensor row =
        linear_forward(params.emission, contextualized[t], caches ? &(*caches)[t] : nullptr);
    std::copy(row.begin(), row.end(), scores.row(t).begin());
  }
  return scores;
}

struct ForwardTrace {
  std::vector<SentenceEncoding> sentences;
  std::vector<Tensor> sentence_vectors;  // after attention, before dropout
  Contextualized context;                // before dropout
  std::vector<LinearCache> emission;
  Tensor scores;  // [T x L]
  DropoutMasks masks;
  std::uint64_t params_checksum = 0;
  std::size_t input_dim = 0;
  bool valid = false;
};

inline DropoutMasks sample_masks(const EmbeddedAbstract& inputs, const ModelConfig& config,
                                 const DropoutSpec& dropout, std::mt19937_64& rng) {
  DropoutMasks m;
  if (!dropout.active()) return m;
  m.words.resize(inputs.size());
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    for (std::size_t w = 0; w < inputs[s].size(); ++w) {
      m.words[s].push_back(dropout_mask(config.embedding_dim, dropout.rate, rng));
    }
  }
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    m.sentences.push_back(dropout_mask(2 * config.word_hidden, dropout.rate, rng));
  }
  if (config.contextualize) {
    for (std::size_t s = 0; s < inputs.size(); ++s) {
      m.contexts.push_back(dropout_mask(2 * config.sentence_hidden, dropout.rate, rng));
    }
  }
  return m;
}

// Runs the network on already-embedded inputs. When `masks` is given it is
// used verbatim (so several passes can share one dropout draw); otherwise
// masks are sampled from `rng` according to `dropout`.
inline ForwardTrace forward(const EmbeddedAbstract& inputs, const ModelParams& params,
                            const DropoutSpec& dropout, std::mt19937_64& rng,
                            const DropoutMasks* masks = nullptr) {
  if (inputs.empty()) throw EmptyInputError("forward on an abstract with no sentences");
  ForwardTrace tr;
  tr.masks = masks ? *masks : sample_masks(inputs, params.config, dropout, rng);
  tr.input_dim = params.config.embedding_dim;
  tr.sentences.reserve(inputs.size());
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    if (inputs[s].empty()) throw EmptyInputError("abstract contains an empty sentence");
    std::vector<Tensor> words;
    words.reserve(inputs[s].size());
    for (std::size_t w = 0; w < inputs[s].size(); ++w) {
      require_size(inputs[s][w].values(), params.config.embedding_dim, "embedded word");
      words.push_back(tr.masks.words.empty() ? inputs[s][w]
                                             : hadamard(inputs[s][w], tr.masks.words[s][w]));
    }
    tr.sentences.push_back(encode_sentence(words, params));
    tr.sentence_vectors.push_back(tr.sentences.back().vector);
  }
  std::vector<Tensor> dropped = tr.sentence_vectors;
  if (!tr.masks.sentences.empty()) {
    for (std::size_t s = 0; s < dropped.size(); ++s) dropped[s] = hadamard(dropped[s], tr.masks.sentences[s]);
  }
  tr.context = contextualize(dropped, params);
  std::vector<Tensor> ctx = tr.context.outputs;
  if (!tr.masks.contexts.empty()) {
    for (std::size_t s = 0; s < ctx.size(); ++s) ctx[s] = hadamard(ctx[s], tr.masks.contexts[s]);
  }
  tr.scores = emission_scores(ctx, params, &tr.emission);
  if (!tr.scores.all_finite()) throw NumericError("non-finite emission scores");
  tr.params_checksum = params.checksum();
  tr.valid = true;
  return tr;
}

inline EmbeddedAbstract embed_abstract(const Abstract& abstract, const Vocab& vocab,
                                       const EmbeddingTable& table) {
  if (abstract.sentences.empty()) throw EmptyInputError("abstract '" + abstract.id + "' is empty");
  EmbeddedAbstract out;
  out.reserve(abstract.sentences.size());
  for (const auto& s : abstract.sentences) out.push_back(embed_sentence(s.tokens, vocab, table));
  return out;
}

inline ForwardTrace forward_abstract(const Abstract& abstract, const Vocab& vocab,
                                     const EmbeddingTable& table, const ModelParams& params,
                                     const DropoutSpec& dropout, std::mt19937_64& rng) {
  return forward(embed_abstract(abstract, vocab, table), params, dropout, rng);
}

// Back-propagates dL/dscores through the network. Parameter gradients are
// accumulated into `grads` (CRF entries untouched); the return value is
// dL/d(inputs) with the shape of the embedded abstract.
inline EmbeddedAbstract backward_abstract(const ForwardTrace& tr, const Tensor& d_scores,
                                          const ModelParams& params, ModelParams& grads) {
  if (!tr.valid) throw StateError("backward_abstract called without a forward trace");
  if (tr.params_checksum != params.checksum()) {
    throw StateError("parameters changed since the forward pass");
  }
  require_shape(d_scores, tr.scores.shape(), "backward_abstract upstream");
  const std::size_t n = tr.sentences.size();

  std::vector<Tensor> d_ctx(n);
  for (std::size_t s = 0; s < n; ++s) {
    d_ctx[s] = linear_backward(params.emission, tr.emission[s], Tensor::of(d_scores.row(s)),
                               grads.emission);
    if (!tr.masks.contexts.empty()) d_ctx[s] = hadamard(d_ctx[s], tr.masks.contexts[s]);
  }
  std::vector<Tensor> d_sent;
  if (params.config.contextualize) {
    d_sent = bilstm_backward(tr.context.lstm, d_ctx, params.sentence_fwd, params.sentence_bwd,
                             grads.sentence_fwd, grads.sentence_bwd);
  } else {
    d_sent = std::move(d_ctx);
  }
  EmbeddedAbstract d_inputs(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (!tr.masks.sentences.empty()) d_sent[s] = hadamard(d_sent[s], tr.masks.sentences[s]);
    const auto& enc = tr.sentences[s];
    auto d_hidden = attention_backward(enc.attention, d_sent[s], params.attention, grads.attention);
    auto d_words = bilstm_backward(enc.lstm, d_hidden, params.word_fwd, params.word_bwd,
                                   grads.word_fwd, grads.word_bwd);
    if (!tr.masks.words.empty()) {
      for (std::size_t w = 0; w < d_words.size(); ++w) {
        d_words[w] = hadamard(d_words[w], tr.masks.words[s][w]);
      }
    }
    d_inputs[s] = std::move(d_words);
  }
  return d_inputs;
}

inline ModelParams zero_gradients(const ModelParams& params) {
  return ModelParams::zeros(params.config);
}

// Viterbi labels for one abstract, evaluation mode.
inline std::vector<std::size_t> predict_labels(const EmbeddedAbstract& inputs,
                                               const ModelParams& params) {
  std::mt19937_64 unused(0);
  const auto tr = forward(inputs, params, {}, unused);
  return viterbi(tr.scores, params.crf).path;
}

}  // namespace pico
