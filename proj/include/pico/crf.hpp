// Linear-chain CRF over per-position label scores.
//
// Path score of y_1..y_T:
//   start[y_1] + sum_t scores[t, y_t] + sum_t transitions[y_t, y_{t+1}] + end[y_T]
// All inference runs in the log domain.
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pico/ops.hpp"
#include "pico/tensor.hpp"

namespace pico {

struct CrfParams {
  Tensor transitions;  // [L x L], row = previous label, column = next label
  Tensor start;        // [L]
  Tensor end;          // [L]

  static CrfParams zeros(std::size_t num_labels) {
    return {Tensor::matrix(num_labels, num_labels), Tensor::vector(num_labels),
            Tensor::vector(num_labels)};
  }
  std::size_t num_labels() const { return start.size(); }
};

struct CrfGradients {
  Tensor scores;  // [T x L]
  CrfParams params;
};

struct ViterbiResult {
  std::vector<std::size_t> path;
  double score = 0.0;
};

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline std::size_t check_inputs(const Tensor& scores, const CrfParams& crf) {
  if (scores.rank() != 2 || scores.rows() == 0) {
    throw DimensionError("CRF scores must be a non-empty [T x L] matrix");
  }
  const std::size_t l = crf.num_labels();
  if (scores.cols() != l) {
    throw DimensionError("CRF scores have " + std::to_string(scores.cols()) +
                         " columns, expected " + std::to_string(l));
  }
  require_shape(crf.transitions, {l, l}, "CRF transitions");
  require_shape(crf.end, {l}, "CRF end scores");
  if (!scores.all_finite() || !crf.transitions.all_finite() || !crf.start.all_finite() ||
      !crf.end.all_finite()) {
    throw NumericError("CRF received non-finite scores");
  }
  return l;
}

// Forward/backward tables in log space. `allowed`, when given, is a [T x L]
// 0/1 mask; disallowed cells are excluded from every path (used to condition
// on a fixed label at one position).
struct LogTables {
  Tensor alpha;  // alpha[t, l] = log sum of prefix paths ending at (t, l), incl. scores[t, l]
  Tensor beta;   // beta[t, l]  = log sum of suffix paths after (t, l), incl. end scores
  double log_z = 0.0;
};

inline LogTables log_tables(const Tensor& scores, const CrfParams& crf,
                            const Tensor* allowed = nullptr) {
  const std::size_t t_len = scores.rows(), l = crf.num_labels();
  auto cell = [&](std::size_t t, std::size_t y) {
    return (allowed && (*allowed)(t, y) == 0.0) ? kNegInf : scores(t, y);
  };
  LogTables tb{Tensor::matrix(t_len, l), Tensor::matrix(t_len, l), 0.0};
  std::vector<double> buf(l);
  for (std::size_t y = 0; y < l; ++y) tb.alpha(0, y) = crf.start[y] + cell(0, y);
  for (std::size_t t = 1; t < t_len; ++t) {
    for (std::size_t y = 0; y < l; ++y) {
      const double c = cell(t, y);
      if (c == kNegInf) {
        tb.alpha(t, y) = kNegInf;
        continue;
      }
      for (std::size_t p = 0; p < l; ++p) buf[p] = tb.alpha(t - 1, p) + crf.transitions(p, y);
      tb.alpha(t, y) = log_sum_exp(buf) + c;
    }
  }
  for (std::size_t y = 0; y < l; ++y) tb.beta(t_len - 1, y) = crf.end[y];
  for (std::size_t t = t_len - 1; t-- > 0;) {
    for (std::size_t y = 0; y < l; ++y) {
      for (std::size_t n = 0; n < l; ++n) {
        buf[n] = crf.transitions(y, n) + cell(t + 1, n) + tb.beta(t + 1, n);
      }
      tb.beta(t, y) = log_sum_exp(buf);
    }
  }
  for (std::size_t y = 0; y < l; ++y) buf[y] = tb.alpha(t_len - 1, y) + crf.end[y];
  tb.log_z = log_sum_exp(buf);
  return tb;
}

// Posterior expectations of every CRF feature.
struct Expectations {
  Tensor unary;        // [T x L] marginals
  Tensor transitions;  // [L x L] expected transition counts
  Tensor start;        // [L]
  Tensor end;          // [L]
};

inline Expectations expectations(const Tensor& scores, const CrfParams& crf,
                                 const Tensor* allowed = nullptr) {
  const std::size_t t_len = scores.rows(), l = crf.num_labels();
  const LogTables tb = log_tables(scores, crf, allowed);
  auto cell = [&](std::size_t t, std::size_t y) {
    return (allowed && (*allowed)(t, y) == 0.0) ? kNegInf : scores(t, y);
  };
  Expectations ex{Tensor::matrix(t_len, l), Tensor::matrix(l, l), Tensor::vector(l),
                  Tensor::vector(l)};
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t y = 0; y < l; ++y) {
      ex.unary(t, y) = std::exp(tb.alpha(t, y) + tb.beta(t, y) - tb.log_z);
    }
  }
  for (std::size_t t = 0; t + 1 < t_len; ++t) {
    for (std::size_t p = 0; p < l; ++p) {
      for (std::size_t n = 0; n < l; ++n) {
        ex.transitions(p, n) += std::exp(tb.alpha(t, p) + crf.transitions(p, n) + cell(t + 1, n) +
                                         tb.beta(t + 1, n) - tb.log_z);
      }
    }
  }
  for (std::size_t y = 0; y < l; ++y) {
    ex.start[y] = ex.unary(0, y);
    ex.end[y] = ex.unary(t_len - 1, y);
  }
  return ex;
}

}  // namespace detail

inline double log_partition(const Tensor& scores, const CrfParams& crf) {
  detail::check_inputs(scores, crf);
  return detail::log_tables(scores, crf).log_z;
}

inline void check_labels(std::span<const std::size_t> labels, std::size_t t_len, std::size_t l) {
  if (labels.size() != t_len) {
    throw ValidationError("label sequence length " + std::to_string(labels.size()) +
                          " does not match " + std::to_string(t_len) + " positions");
  }
  for (std::size_t y : labels) {
    if (y >= l) throw ValidationError("label index " + std::to_string(y) + " out of range");
  }
}

inline double path_score(const Tensor& scores, const CrfParams& crf,
                         std::span<const std::size_t> path) {
  const std::size_t l = detail::check_inputs(scores, crf);
  check_labels(path, scores.rows(), l);
  double s = crf.start[path.front()] + crf.end[path.back()];
  for (std::size_t t = 0; t < path.size(); ++t) {
    s += scores(t, path[t]);
    if (t + 1 < path.size()) s += crf.transitions(path[t], path[t + 1]);
  }
  return s;
}

inline double log_likelihood(const Tensor& scores, const CrfParams& crf,
                             std::span<const std::size_t> gold) {
  const double gold_score = path_score(scores, crf, gold);
  return gold_score - detail::log_tables(scores, crf).log_z;
}

// Ties are broken toward the lower label index.
inline ViterbiResult viterbi(const Tensor& scores, const CrfParams& crf) {
  const std::size_t l = detail::check_inputs(scores, crf);
  const std::size_t t_len = scores.rows();
  Tensor best = Tensor::matrix(t_len, l);
  std::vector<std::size_t> back(t_len * l, 0);
  for (std::size_t y = 0; y < l; ++y) best(0, y) = crf.start[y] + scores(0, y);
  for (std::size_t t = 1; t < t_len; ++t) {
    for (std::size_t y = 0; y < l; ++y) {
      std::size_t arg = 0;
      double top = best(t - 1, 0) + crf.transitions(0, y);
      for (std::size_t p = 1; p < l; ++p) {
        const double v = best(t - 1, p) + crf.transitions(p, y);
        if (v > top) {
          top = v;
          arg = p;
        }
      }
      best(t, y) = top + scores(t, y);
      back[t * l + y] = arg;
    }
  }
  ViterbiResult res;
  std::size_t arg = 0;
  double top = best(t_len - 1, 0) + crf.end[0];
  for (std::size_t y = 1; y < l; ++y) {
    const double v = best(t_len - 1, y) + crf.end[y];
    if (v > top) {
      top = v;
      arg = y;
    }
  }
  res.score = top;
  res.path.assign(t_len, 0);
  res.path[t_len - 1] = arg;
  for (std::size_t t = t_len - 1; t > 0; --t) res.path[t - 1] = back[t * l + res.path[t]];
  return res;
}

inline Tensor marginals(const Tensor& scores, const CrfParams& crf) {
  detail::check_inputs(scores, crf);
  return detail::expectations(scores, crf).unary;
}

// log P(y_t = l) for every cell, computed without leaving the log domain.
inline Tensor log_marginals(const Tensor& scores, const CrfParams& crf) {
  detail::check_inputs(scores, crf);
  const auto tb = detail::log_tables(scores, crf);
  Tensor out = Tensor::matrix(scores.rows(), crf.num_labels());
  for (std::size_t t = 0; t < scores.rows(); ++t) {
    for (std::size_t y = 0; y < crf.num_labels(); ++y) {
      out(t, y) = tb.alpha(t, y) + tb.beta(t, y) - tb.log_z;
    }
  }
  return out;
}

// Gradient of -log_likelihood: expected feature counts minus gold counts.
inline CrfGradients crf_backward(const Tensor& scores, const CrfParams& crf,
                                 std::span<const std::size_t> gold) {
  const std::size_t l = detail::check_inputs(scores, crf);
  check_labels(gold, scores.rows(), l);
  auto ex = detail::expectations(scores, crf);
  for (std::size_t t = 0; t < gold.size(); ++t) {
    ex.unary(t, gold[t]) -= 1.0;
    if (t + 1 < gold.size()) ex.transitions(gold[t], gold[t + 1]) -= 1.0;
  }
  ex.start[gold.front()] -= 1.0;
  ex.end[gold.back()] -= 1.0;
  return {std::move(ex.unary), {std::move(ex.transitions), std::move(ex.start), std::move(ex.end)}};
}

// Sum over positions of KL(p_t || q_t), where q_t are the CRF marginals of
// `scores` and p is a fixed [T x L] table of probabilities.
inline double marginal_kl(const Tensor& p, const Tensor& scores, const CrfParams& crf) {
  const Tensor log_q = log_marginals(scores, crf);
  require_shape(p, log_q.shape(), "marginal_kl reference distribution");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - log_q[i]);
  }
  return kl;
}

// Gradient of marginal_kl with respect to scores and CRF parameters, p held fixed.
//
// With q_t = CRF marginals, d/dx of -sum_{t,l} p_tl log q_tl for any feature
// weight x with feature count N equals
//   -( sum_{t,l} p_tl E[N | y_t = l] - (sum_{t,l} p_tl) * E[N] )
// (the mass term is T when every row of p sums to 1). The conditional
// expectations come from re-running forward-backward with position t clamped
// to label l.
inline CrfGradients marginal_kl_backward(const Tensor& p, const Tensor& scores,
                                         const CrfParams& crf) {
  const std::size_t l = detail::check_inputs(scores, crf);
  const std::size_t t_len = scores.rows();
  require_shape(p, {t_len, l}, "marginal_kl_backward reference distribution");

  const auto base = detail::expectations(scores, crf);
  CrfGradients g{Tensor::matrix(t_len, l), CrfParams::zeros(l)};
  double total_mass = 0.0;
  Tensor allowed = Tensor::matrix(t_len, l, 1.0);
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t y = 0; y < l; ++y) {
      const double w = p(t, y);
      if (w == 0.0) continue;
      total_mass += w;
      for (std::size_t k = 0; k < l; ++k) allowed(t, k) = (k == y) ? 1.0 : 0.0;
      const auto cond = detail::expectations(scores, crf, &allowed);
      for (std::size_t k = 0; k < l; ++k) allowed(t, k) = 1.0;
      axpy(-w, cond.unary.values(), g.scores.values());
      axpy(-w, cond.transitions.values(), g.params.transitions.values());
      axpy(-w, cond.start.values(), g.params.start.values());
      axpy(-w, cond.end.values(), g.params.end.values());
    }
  }
  axpy(total_mass, base.unary.values(), g.scores.values());
  axpy(total_mass, base.transitions.values(), g.params.transitions.values());
  axpy(total_mass, base.start.values(), g.params.start.values());
  axpy(total_mass, base.end.values(), g.params.end.values());
  return g;
}

}  // namespace pico
