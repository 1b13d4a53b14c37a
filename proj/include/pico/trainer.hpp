// Mini-batch training with early stopping on development P/I/O F1, and the
// k-fold cross-validation protocol (test = fold i, dev = fold i+1 mod k,
// train = the rest; vocabulary and normalization statistics refit per fold).
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <future>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pico/adam.hpp"
#include "pico/adversarial.hpp"
#include "pico/checkpoint.hpp"
#include "pico/corpus.hpp"
#include "pico/embeddings.hpp"
#include "pico/evaluation.hpp"
#include "pico/model.hpp"

namespace pico {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double l2_coefficient = 1e-4;
  double dropout_rate = 0.5;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  bool eval_train_loss = false;
  PerturbConfig perturb;

  AdamOptions adam() const {
    return {learning_rate, beta1, beta2, adam_epsilon, l2_coefficient};
  }

  void validate() const {
    adam().validate();
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (max_epochs == 0) throw ConfigError("max_epochs must be >= 1");
    perturb.validate();
  }
};

inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
                      const AdamOptions& opt) {
  std::vector<Tensor*> p;
  std::vector<const Tensor*> g;
  for (auto& [n, t] : params.named_tensors()) p.push_back(t);
  for (const auto& [n, t] : grads.named_tensors()) g.push_back(t);
  if (state.first_moment.empty()) {
    state = AdamState::like(std::vector<const Tensor*>(p.begin(), p.end()));
  }
  adam_step(p, g, state, opt);
}

struct EpochLog {
  std::size_t epoch = 0;
  double classification = 0.0;
  double adversarial = 0.0;
  double virtual_adversarial = 0.0;
  double dev_loss = 0.0;
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  std::array<double, 3> dev_f1{};  // P, I, O
  double dev_metric = 0.0;
  double wall_seconds = 0.0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["epoch"] = epoch;
    j["L_cls"] = classification;
    j["L_adv"] = adversarial;
    j["L_vat"] = virtual_adversarial;
    j["dev_loss"] = dev_loss;
    if (!std::isnan(train_loss)) j["train_loss"] = train_loss;
    j["dev_P_f1"] = dev_f1[0];
    j["dev_I_f1"] = dev_f1[1];
    j["dev_O_f1"] = dev_f1[2];
    j["dev_metric"] = dev_metric;
    j["wall_seconds"] = wall_seconds;
    return j;
  }
};

struct CheckpointRecord {
  std::size_t epoch = 0;
  double dev_metric = -std::numeric_limits<double>::infinity();
  std::uint64_t model_checksum = 0;
  std::filesystem::path path;
};

struct FoldResult {
  CheckpointRecord best;
  ModelParams best_params;
  std::vector<EpochLog> log;
};

struct TrainInputs {
  const Vocab* vocab = nullptr;
  const EmbeddingTable* table = nullptr;  // normalized
  std::uint64_t embedding_hash = 0;       // raw-table checksum stored in checkpoints
  std::uint64_t embedding_seed = 0;
  TokenizerOptions tokenizer;
  std::optional<std::filesystem::path> checkpoint_path;
};

inline std::vector<Example> make_examples(const std::vector<Abstract>& abstracts, const Vocab& vocab,
                                          const EmbeddingTable& table) {
  std::vector<Example> out;
  out.reserve(abstracts.size());
  for (const auto& a : abstracts) out.push_back({embed_abstract(a, vocab, table), a.label_indices()});
  return out;
}

inline std::vector<std::vector<std::size_t>> predict_all(const std::vector<Example>& examples,
                                                         const ModelParams& params) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(predict_labels(ex.inputs, params));
  return out;
}

inline ConfusionCounts score_examples(const std::vector<Example>& examples,
                                      const ModelParams& params) {
  ConfusionCounts counts;
  for (const auto& ex : examples) {
    const auto pred = predict_labels(ex.inputs, params);
    for (std::size_t s = 0; s < pred.size(); ++s) tally(counts, ex.gold[s], pred[s]);
  }
  return counts;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Trains on `train`, keeps the parameters with the best development metric
// (mean P/I/O F1; ties keep the earlier epoch) and stops once `patience`
// consecutive epochs fail to improve it.
inline FoldResult train_fold(const std::vector<Abstract>& train, const std::vector<Abstract>& dev,
                             const ModelConfig& model_config, const TrainConfig& config,
                             const TrainInputs& inputs) {
  if (train.empty() || dev.empty()) throw ConfigError("train_fold needs non-empty train and dev sets");
  if (!inputs.vocab || !inputs.table) throw ConfigError("train_fold needs a vocabulary and table");
  config.validate();
  if (inputs.table->dimension() != model_config.embedding_dim) {
    throw ConfigError("embedding dimension " + std::to_string(inputs.table->dimension()) +
                      " does not match model.embedding_dim " +
                      std::to_string(model_config.embedding_dim));
  }
  const auto train_ex = make_examples(train, *inputs.vocab, *inputs.table);
  const auto dev_ex = make_examples(dev, *inputs.vocab, *inputs.table);

  FoldResult result;
  ModelParams params = ModelParams::initialize(model_config, mix_seed(config.seed, 1));
  ModelParams grads = ModelParams::zeros(model_config);
  AdamState adam;
  std::mt19937_64 rng(mix_seed(config.seed, 2));
  const DropoutSpec dropout{config.dropout_rate, true};
  std::vector<std::size_t> order(train_ex.size());
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    EpochLog log;
    log.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<Example> batch;
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_ex[order[i]]);
      grads = ModelParams::zeros(model_config);
      const auto c = combined_loss(batch, params, config.perturb, dropout, rng, &grads);
      if (!std::isfinite(c.total)) {
        throw NumericError("non-finite training loss in epoch " + std::to_string(epoch));
      }
      const double share = static_cast<double>(batch.size()) / static_cast<double>(order.size());
      log.classification += share * c.classification;
      log.adversarial += share * c.adversarial;
      log.virtual_adversarial += share * c.virtual_adversarial;
      std::vector<Tensor*> g;
      for (auto& [n, t] : grads.named_tensors()) g.push_back(t);
      clip_global_norm(g, config.clip_norm);
      adam_step(params, grads, adam, config.adam());
    }

    const auto dev_report = make_report("dev", score_examples(dev_ex, params));
    log.dev_f1 = {dev_report[Label::P].f1, dev_report[Label::I].f1, dev_report[Label::O].f1};
    log.dev_metric = dev_report.pico_f1();
    log.dev_loss = classification_loss(dev_ex, params);
    if (config.eval_train_loss) log.train_loss = classification_loss(train_ex, params);
    log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);

    if (log.dev_metric > result.best.dev_metric) {
      result.best = {epoch, log.dev_metric, params.checksum(), {}};
      result.best_params = params;
      since_best = 0;
      if (inputs.checkpoint_path) {
        result.best.path = *inputs.checkpoint_path;
        save_checkpoint(*inputs.checkpoint_path, {params, *inputs.vocab, inputs.tokenizer,
                                                  inputs.embedding_hash, inputs.embedding_seed});
      }
    } else if (++since_best > config.patience) {
      break;
    }
  }
  return result;
}

struct CrossValOptions {
  std::size_t folds = 10;
  std::size_t min_count = 2;
  std::uint64_t embedding_seed = 0;
  TokenizerOptions tokenizer;
  std::optional<std::filesystem::path> output_dir;  // per-fold checkpoints when set
  std::size_t jobs = 1;
};

struct FoldOutcome {
  std::size_t fold = 0;
  std::size_t train_size = 0, dev_size = 0, test_size = 0;
  std::vector<std::string> test_ids;
  FoldResult training;
  MetricsReport test;
  std::uint64_t vocab_hash = 0;
  std::uint64_t embedding_checksum_before = 0;
  std::uint64_t embedding_checksum_after = 0;
};

struct CrossValResult {
  FoldSplit split;
  std::vector<FoldOutcome> folds;
  MetricsReport mean;
  MetricsReport pooled;

  std::vector<MetricsReport> reports() const {
    std::vector<MetricsReport> rows;
    for (const auto& f : folds) rows.push_back(f.test);
    rows.push_back(mean);
    rows.push_back(pooled);
    return rows;
  }
};

struct FoldData {
  std::vector<Abstract> train, dev, test;
};

inline FoldData fold_data(const std::vector<Abstract>& dataset, const FoldSplit& split,
                          std::size_t fold) {
  FoldData d;
  const std::size_t dev_fold = (fold + 1) % split.k;
  for (const auto& a : dataset) {
    const std::size_t f = split.assignments.at(a.id);
    if (f == fold) {
      d.test.push_back(a);
    } else if (f == dev_fold) {
      d.dev.push_back(a);
    } else {
      d.train.push_back(a);
    }
  }
  return d;
}

inline FoldOutcome run_fold(const std::vector<Abstract>& dataset, const FoldSplit& split,
                            std::size_t fold, const PretrainedVectors& pretrained,
                            const ModelConfig& model_config, const TrainConfig& config,
                            const CrossValOptions& options) {
  const FoldData data = fold_data(dataset, split, fold);
  FoldOutcome out;
  out.fold = fold;
  out.train_size = data.train.size();
  out.dev_size = data.dev.size();
  out.test_size = data.test.size();
  for (const auto& a : data.test) out.test_ids.push_back(a.id);

  const Vocab vocab = build_vocab(data.train, options.min_count);
  const auto raw = load_pretrained(pretrained, vocab, options.embedding_seed);
  const EmbeddingTable table = normalize_embeddings(raw.table, vocab);
  out.vocab_hash = vocab.hash();
  out.embedding_checksum_before = table.checksum();

  TrainConfig fold_config = config;
  fold_config.seed = mix_seed(config.seed, 100 + fold);
  TrainInputs inputs{&vocab, &table, raw.table.checksum(), options.embedding_seed, options.tokenizer,
                     std::nullopt};
  if (options.output_dir) {
    inputs.checkpoint_path = *options.output_dir / ("fold-" + std::to_string(fold) + ".ckpt");
  }
  out.training = train_fold(data.train, data.dev, model_config, fold_config, inputs);
  out.embedding_checksum_after = table.checksum();

  const auto test_ex = make_examples(data.test, vocab, table);
  out.test = make_report("fold-" + std::to_string(fold),
                         score_examples(test_ex, out.training.best_params));
  return out;
}

// Folds are independent; up to `jobs` run concurrently and results are
// merged in fold order.
inline CrossValResult cross_validate(const std::vector<Abstract>& dataset,
                                     const PretrainedVectors& pretrained,
                                     const ModelConfig& model_config, const TrainConfig& config,
                                     const CrossValOptions& options) {
  CrossValResult res;
  res.split = split_folds(dataset, options.folds, config.seed);
  res.folds.resize(options.folds);
  const std::size_t jobs = std::max<std::size_t>(1, options.jobs);
  for (std::size_t base = 0; base < options.folds; base += jobs) {
    std::vector<std::future<FoldOutcome>> running;
    for (std::size_t f = base; f < std::min(options.folds, base + jobs); ++f) {
      running.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred, [&, f] {
        return run_fold(dataset, res.split, f, pretrained, model_config, config, options);
      }));
    }
    for (std::size_t i = 0; i < running.size(); ++i) res.folds[base + i] = running[i].get();
  }
  std::vector<MetricsReport> per_fold;
  for (const auto& f : res.folds) per_fold.push_back(f.test);
  res.mean = mean_report(per_fold);
  res.pooled = pooled_report(per_fold);
  return res;
}

}  // namespace pico
