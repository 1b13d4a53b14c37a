// Adversarial and virtual adversarial perturbations of the embedded input,
// and the combined training objective
//   L = L_cls + lambda_adv * L_adv + lambda_vat * L_vat.
//
// Perturbation norms are taken jointly over every word vector of the abstract.
// The virtual adversarial divergence compares per-position CRF marginals and
// is summed over positions; the clean distribution and the perturbation are
// constants with respect to the parameters.
//
// The routines are templates over the scoring model so that small analytic
// models can stand in for the network. A model type M needs, found by ADL:
//   forward(inputs, m, DropoutSpec, rng, const DropoutMasks*) -> trace with .scores
//   backward_abstract(trace, d_scores, m, M& grads) -> input gradients
//   zero_gradients(m) -> M
// plus members m.crf and grads.add_crf_gradients(CrfParams, double).
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <type_traits>
#include <vector>

#include "pico/crf.hpp"
#include "pico/model.hpp"

namespace pico {

struct PerturbConfig {
  double epsilon_adv = 1.0;
  double epsilon_vat = 1.0;
  double xi = 0.1;
  double lambda_adv = 1.0;
  double lambda_vat = 1.0;

  void validate() const {
    if (lambda_adv < 0.0 || lambda_vat < 0.0) throw ConfigError("loss weights must be >= 0");
    if (lambda_adv > 0.0 && !(epsilon_adv > 0.0)) {
      throw ConfigError("epsilon_adv must be > 0 when adversarial training is enabled");
    }
    if (lambda_vat > 0.0 && !(epsilon_vat > 0.0 && xi > 0.0)) {
      throw ConfigError("epsilon_vat and xi must be > 0 when virtual adversarial training is enabled");
    }
  }
};

using Perturbation = EmbeddedAbstract;

struct Example {
  EmbeddedAbstract inputs;
  std::vector<std::size_t> gold;
};

inline constexpr double kZeroGradientNorm = 1e-12;

inline double l2_norm(const EmbeddedAbstract& v) {
  double sq = 0.0;
  for (const auto& s : v) {
    for (const auto& w : s) sq += squared_norm(w.values());
  }
  return std::sqrt(sq);
}

inline EmbeddedAbstract zeros_like(const EmbeddedAbstract& v) {
  EmbeddedAbstract out(v.size());
  for (std::size_t s = 0; s < v.size(); ++s) {
    for (const auto& w : v[s]) out[s].push_back(Tensor(w.shape()));
  }
  return out;
}

// a + scale * b
inline EmbeddedAbstract add_scaled(const EmbeddedAbstract& a, const EmbeddedAbstract& b,
                                   double scale = 1.0) {
  if (a.size() != b.size()) throw DimensionError("perturbation shape mismatch");
  EmbeddedAbstract out = a;
  for (std::size_t s = 0; s < a.size(); ++s) {
    if (a[s].size() != b[s].size()) throw DimensionError("perturbation shape mismatch");
    for (std::size_t w = 0; w < a[s].size(); ++w) axpy(scale, b[s][w].values(), out[s][w].values());
  }
  return out;
}

// epsilon * g / ||g||, or exactly zero when ||g|| < 1e-12 or epsilon == 0.
inline Perturbation scaled_direction(const EmbeddedAbstract& g, double epsilon) {
  const double norm = l2_norm(g);
  Perturbation r = zeros_like(g);
  if (norm < kZeroGradientNorm || epsilon == 0.0) return r;
  return add_scaled(r, g, epsilon / norm);
}

namespace detail {

template <class Trace>
struct ScoredPass {
  double loss = 0.0;
  Trace trace;
};

// -log p(gold | inputs). When grads or d_inputs is requested, back-propagates
// weight * d(loss).
template <class Model>
inline auto nll_pass(const EmbeddedAbstract& inputs, std::span<const std::size_t> gold,
                           const Model& params, const DropoutMasks& masks,
                           std::type_identity_t<Model>* grads, double weight, EmbeddedAbstract* d_inputs) {
  std::mt19937_64 unused(0);
  ScoredPass out{0.0, forward(inputs, params, DropoutSpec{}, unused, &masks)};
  out.loss = -log_likelihood(out.trace.scores, params.crf, gold);
  if (grads || d_inputs) {
    auto g = crf_backward(out.trace.scores, params.crf, gold);
    for (double& v : g.scores) v *= weight;
    Model scratch;
    Model* sink = grads;
    if (!sink) {
      scratch = zero_gradients(params);
      sink = &scratch;
    }
    auto d_in = backward_abstract(out.trace, g.scores, params, *sink);
    sink->add_crf_gradients(g.params, weight);
    if (d_inputs) *d_inputs = std::move(d_in);
  }
  return out;
}

// sum_t KL(p_t || q_t(inputs)); p fixed.
template <class Model>
inline auto kl_pass(const EmbeddedAbstract& inputs, const Tensor& reference,
                          const Model& params, const DropoutMasks& masks, std::type_identity_t<Model>* grads,
                          double weight, EmbeddedAbstract* d_inputs) {
  std::mt19937_64 unused(0);
  ScoredPass out{0.0, forward(inputs, params, DropoutSpec{}, unused, &masks)};
  out.loss = marginal_kl(reference, out.trace.scores, params.crf);
  if (grads || d_inputs) {
    auto g = marginal_kl_backward(reference, out.trace.scores, params.crf);
    for (double& v : g.scores) v *= weight;
    Model scratch;
    Model* sink = grads;
    if (!sink) {
      scratch = zero_gradients(params);
      sink = &scratch;
    }
    auto d_in = backward_abstract(out.trace, g.scores, params, *sink);
    sink->add_crf_gradients(g.params, weight);
    if (d_inputs) *d_inputs = std::move(d_in);
  }
  return out;
}

inline EmbeddedAbstract gaussian_probe(const EmbeddedAbstract& shape, double xi,
                                       std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  EmbeddedAbstract d = zeros_like(shape);
  for (auto& s : d) {
    for (auto& w : s) {
      for (double& v : w) v = normal(rng);
    }
  }
  return scaled_direction(d, xi);
}

}  // namespace detail

// Negative log-likelihood of the gold labels at inputs + r (r may be null).
// Gradients are with respect to the parameters only; r is a constant.
template <class Model>
inline double perturbed_nll(const EmbeddedAbstract& inputs, const Perturbation* r,
                            std::span<const std::size_t> gold, const Model& params,
                            std::type_identity_t<Model>* grads = nullptr, double weight = 1.0,
                            const DropoutMasks& masks = {}) {
  const EmbeddedAbstract x = r ? add_scaled(inputs, *r) : inputs;
  return detail::nll_pass(x, gold, params, masks, grads, weight, nullptr).loss;
}

// Per-position marginal KL between a fixed reference and the model at inputs + r.
template <class Model>
inline double perturbed_kl(const EmbeddedAbstract& inputs, const Perturbation* r,
                           const Tensor& reference, const Model& params,
                           std::type_identity_t<Model>* grads = nullptr, double weight = 1.0,
                           const DropoutMasks& masks = {}) {
  const EmbeddedAbstract x = r ? add_scaled(inputs, *r) : inputs;
  return detail::kl_pass(x, reference, params, masks, grads, weight, nullptr).loss;
}

// Gradient of log p(gold | inputs) with respect to the inputs.
template <class Model>
inline EmbeddedAbstract input_gradient(const EmbeddedAbstract& inputs,
                                       std::span<const std::size_t> gold,
                                       const Model& params, const DropoutMasks& masks = {}) {
  EmbeddedAbstract d_nll;
  detail::nll_pass(inputs, gold, params, masks, nullptr, 1.0, &d_nll);
  return add_scaled(zeros_like(d_nll), d_nll, -1.0);
}

// r_adv = -epsilon * g / ||g||,  g = grad_s log p(y | s).
template <class Model>
inline Perturbation adv_perturbation(const EmbeddedAbstract& inputs,
                                     std::span<const std::size_t> gold, const Model& params,
                                     double epsilon, const DropoutMasks& masks = {}) {
  if (gold.empty()) throw ValidationError("adversarial perturbation requires gold labels");
  const auto g = input_gradient(inputs, gold, params, masks);
  return scaled_direction(g, -epsilon);
}

// Gradient of the probe divergence KL(p(.|s) || p(.|s + d)) with respect to s + d.
template <class Model>
inline EmbeddedAbstract vat_probe_gradient(const EmbeddedAbstract& inputs, const Tensor& reference,
                                           const EmbeddedAbstract& probe, const Model& params,
                                           const DropoutMasks& masks = {}) {
  EmbeddedAbstract g;
  detail::kl_pass(add_scaled(inputs, probe), reference, params, masks, nullptr, 1.0, &g);
  return g;
}

template <class Model>
inline Tensor clean_marginals(const EmbeddedAbstract& inputs, const Model& params,
                              const DropoutMasks& masks = {}) {
  std::mt19937_64 unused(0);
  const auto tr = forward(inputs, params, DropoutSpec{}, unused, &masks);
  return marginals(tr.scores, params.crf);
}

// r_vadv = epsilon * g / ||g||, g = grad_{s+d} KL(p(.|s) || p(.|s+d)),
// d Gaussian with ||d|| = xi.
template <class Model>
inline Perturbation vat_perturbation(const EmbeddedAbstract& inputs, const Model& params,
                                     double epsilon, double xi, std::mt19937_64& rng,
                                     const DropoutMasks& masks = {}) {
  if (epsilon == 0.0) return zeros_like(inputs);
  if (!(xi > 0.0)) throw ConfigError("xi must be > 0");
  const Tensor reference = clean_marginals(inputs, params, masks);
  const auto d = detail::gaussian_probe(inputs, xi, rng);
  return scaled_direction(vat_probe_gradient(inputs, reference, d, params, masks), epsilon);
}

template <class Model>
inline double adv_loss(const std::vector<Example>& batch, const Model& params,
                       double epsilon) {
  if (batch.empty()) throw ValidationError("adv_loss on an empty batch");
  double total = 0.0;
  for (const auto& ex : batch) {
    const auto r = adv_perturbation(ex.inputs, ex.gold, params, epsilon);
    total += perturbed_nll(ex.inputs, &r, ex.gold, params);
  }
  return total / static_cast<double>(batch.size());
}

template <class Model>
inline double vat_loss(const std::vector<Example>& batch, const Model& params, double epsilon,
                       double xi, std::mt19937_64& rng) {
  if (batch.empty()) throw ValidationError("vat_loss on an empty batch");
  double total = 0.0;
  for (const auto& ex : batch) {
    std::mt19937_64 local(rng());
    const Tensor reference = clean_marginals(ex.inputs, params);
    const auto r = vat_perturbation(ex.inputs, params, epsilon, xi, local);
    total += perturbed_kl(ex.inputs, &r, reference, params);
  }
  return total / static_cast<double>(batch.size());
}

template <class Model>
inline double classification_loss(const std::vector<Example>& batch, const Model& params) {
  if (batch.empty()) throw ValidationError("classification loss on an empty batch");
  double total = 0.0;
  for (const auto& ex : batch) total += perturbed_nll(ex.inputs, nullptr, ex.gold, params);
  return total / static_cast<double>(batch.size());
}

struct LossComponents {
  double total = 0.0;
  double classification = 0.0;
  double adversarial = 0.0;
  double virtual_adversarial = 0.0;
};

// One abstract's contribution: every pass shares one dropout draw. When grads
// is given, weight * dL/dtheta is accumulated into it.
template <class Model>
inline LossComponents abstract_objective(const Example& ex, const Model& params,
                                         const PerturbConfig& config, const DropoutSpec& dropout,
                                         std::mt19937_64& rng, std::type_identity_t<Model>* grads,
                                         double weight = 1.0) {
  const DropoutMasks masks = sample_masks(ex.inputs, params.config, dropout, rng);
  LossComponents c;
  EmbeddedAbstract d_clean;
  const bool need_adv = config.lambda_adv > 0.0;
  auto clean = detail::nll_pass(ex.inputs, ex.gold, params, masks, grads, weight,
                                need_adv ? &d_clean : nullptr);
  c.classification = clean.loss;

  if (need_adv) {
    // d_clean is weight * grad_s(-log p); its direction gives r_adv.
    const auto r = scaled_direction(d_clean, config.epsilon_adv);
    c.adversarial = perturbed_nll(ex.inputs, &r, ex.gold, params, grads,
                                  weight * config.lambda_adv, masks);
  }
  if (config.lambda_vat > 0.0) {
    const Tensor reference = marginals(clean.trace.scores, params.crf);
    Perturbation r = zeros_like(ex.inputs);
    if (config.epsilon_vat != 0.0) {
      const auto d = detail::gaussian_probe(ex.inputs, config.xi, rng);
      r = scaled_direction(vat_probe_gradient(ex.inputs, reference, d, params, masks),
                           config.epsilon_vat);
    }
    c.virtual_adversarial = perturbed_kl(ex.inputs, &r, reference, params, grads,
                                         weight * config.lambda_vat, masks);
  }
  c.total = c.classification + config.lambda_adv * c.adversarial +
            config.lambda_vat * c.virtual_adversarial;
  return c;
}

// Batch mean of the combined objective. Each example draws from its own
// generator, seeded in order from `rng`.
template <class Model>
inline LossComponents combined_loss(const std::vector<Example>& batch, const Model& params,
                                    const PerturbConfig& config, const DropoutSpec& dropout,
                                    std::mt19937_64& rng, std::type_identity_t<Model>* grads = nullptr) {
  if (batch.empty()) throw ValidationError("combined_loss on an empty batch");
  config.validate();
  const double w = 1.0 / static_cast<double>(batch.size());
  LossComponents sum;
  for (const auto& ex : batch) {
    std::mt19937_64 local(rng());
    const auto c = abstract_objective(ex, params, config, dropout, local, grads, w);
    sum.classification += c.classification;
    sum.adversarial += c.adversarial;
    sum.virtual_adversarial += c.virtual_adversarial;
  }
  sum.classification *= w;
  sum.adversarial *= w;
  sum.virtual_adversarial *= w;
  sum.total = sum.classification + config.lambda_adv * sum.adversarial +
              config.lambda_vat * sum.virtual_adversarial;
  return sum;
}

template <class Model>
inline LossComponents combined_loss(const std::vector<Example>& batch, const Model& params,
                                    const PerturbConfig& config, std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  return combined_loss(batch, params, config, {}, rng, nullptr);
}

}  // namespace pico
