// The workflows behind the command-line tool. Each command throws pico::Error
// on failure; the executable maps the error kind to an exit code.
#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "pico/checkpoint.hpp"
#include "pico/config.hpp"
#include "pico/corpus.hpp"
#include "pico/embeddings.hpp"
#include "pico/evaluation.hpp"
#include "pico/trainer.hpp"

namespace pico {

namespace fs = std::filesystem;

inline std::vector<Abstract> read_dataset_file(const fs::path& path, const ParseOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  try {
    return parse_dataset(in, options);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline std::string training_log_jsonl(const std::vector<EpochLog>& log) {
  std::string out;
  for (const auto& e : log) out += e.to_json().dump() + "\n";
  return out;
}

inline DatasetStats cmd_validate(const fs::path& dataset, std::ostream& out) {
  const auto abstracts = read_dataset_file(dataset, {});
  const auto stats = dataset_stats(abstracts);
  print_stats(out, stats);
  return stats;
}

struct RunInputs {
  std::vector<Abstract> dataset;
  PretrainedVectors vectors;
};

inline RunInputs load_run_inputs(const RunConfig& config) {
  validate_run_config(config);
  if (config.dataset.empty()) throw ConfigError("data.dataset is not set");
  if (config.embeddings.empty()) throw ConfigError("data.embeddings is not set");
  if (config.output.empty()) throw ConfigError("data.output is not set");
  RunInputs in;
  in.dataset = read_dataset_file(config.dataset, {true, config.tokenizer});
  in.vectors = read_word2vec_file(config.embeddings);
  if (in.vectors.dimension != config.model.embedding_dim) {
    throw ConfigError("embeddings in '" + config.embeddings.string() + "' have dimension " +
                      std::to_string(in.vectors.dimension) + " but model.embedding_dim is " +
                      std::to_string(config.model.embedding_dim));
  }
  return in;
}

inline void prepare_output(const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.output, ec);
  if (ec) throw IoError("cannot create output directory '" + config.output.string() + "'");
  save_run_config(config.output / "config.txt", config);
}

// Trains one model: fold 0 of the seeded split is the development set and
// everything else is training data.
inline FoldResult cmd_train(const RunConfig& config, std::ostream& log) {
  const auto in = load_run_inputs(config);
  prepare_output(config);
  const auto split = split_folds(in.dataset, config.folds, config.train.seed);
  const FoldData data = fold_data(in.dataset, split, config.folds - 1);
  std::vector<Abstract> train = data.train;
  train.insert(train.end(), data.test.begin(), data.test.end());

  const Vocab vocab = build_vocab(train, config.min_count);
  const auto raw = load_pretrained(in.vectors, vocab, config.embedding_seed);
  const EmbeddingTable table = normalize_embeddings(raw.table, vocab);
  log << "train " << train.size() << " dev " << data.dev.size() << " vocab " << vocab.size()
      << " coverage " << raw.coverage << '\n';

  TrainInputs inputs{&vocab, &table, raw.table.checksum(), config.embedding_seed, config.tokenizer,
                     config.output / "model.ckpt"};
  const auto result = train_fold(train, data.dev, config.model, config.train, inputs);
  write_text_file(config.output / "train_log.jsonl", training_log_jsonl(result.log));
  const auto dev = make_report("dev", score_examples(make_examples(data.dev, vocab, table),
                                                     result.best_params));
  write_text_file(config.output / "metrics.jsonl", export_metrics({dev}));
  write_text_file(config.output / "report.txt", render_report({dev}));
  log << "best epoch " << result.best.epoch << " dev P/I/O F1 " << result.best.dev_metric << '\n';
  return result;
}

inline CrossValResult cmd_crossval(const RunConfig& config, std::size_t jobs, std::ostream& log) {
  const auto in = load_run_inputs(config);
  prepare_output(config);
  CrossValOptions opt;
  opt.folds = config.folds;
  opt.min_count = config.min_count;
  opt.embedding_seed = config.embedding_seed;
  opt.tokenizer = config.tokenizer;
  opt.output_dir = config.output;
  opt.jobs = jobs;
  const auto res = cross_validate(in.dataset, in.vectors, config.model, config.train, opt);

  std::string folds;
  for (const auto& [id, f] : res.split.assignments) folds += id + " " + std::to_string(f) + "\n";
  write_text_file(config.output / "folds.txt", folds);
  for (const auto& f : res.folds) {
    write_text_file(config.output / ("fold-" + std::to_string(f.fold) + ".log.jsonl"),
                    training_log_jsonl(f.training.log));
    log << "fold " << f.fold << " train/dev/test " << f.train_size << "/" << f.dev_size << "/"
        << f.test_size << " best epoch " << f.training.best.epoch << '\n';
  }
  write_text_file(config.output / "metrics.jsonl", export_metrics(res.reports()));
  const std::string report = render_report(res.reports());
  write_text_file(config.output / "report.txt", report);
  log << report;
  return res;
}

struct LoadedModel {
  Checkpoint checkpoint;
  EmbeddingTable table;
};

inline LoadedModel load_model(const fs::path& checkpoint, const fs::path& embeddings) {
  LoadedModel m{load_checkpoint(checkpoint), {}};
  const auto vectors = read_word2vec_file(embeddings);
  if (vectors.dimension != m.checkpoint.params.config.embedding_dim) {
    throw CompatibilityError("embeddings in '" + embeddings.string() + "' have dimension " +
                             std::to_string(vectors.dimension) + ", checkpoint expects " +
                             std::to_string(m.checkpoint.params.config.embedding_dim));
  }
  const auto raw = load_pretrained(vectors, m.checkpoint.vocab, m.checkpoint.embedding_seed);
  if (raw.table.checksum() != m.checkpoint.embedding_hash) {
    throw CompatibilityError("embeddings in '" + embeddings.string() +
                             "' differ from the ones the checkpoint was trained with");
  }
  m.table = normalize_embeddings(raw.table, m.checkpoint.vocab);
  return m;
}

inline MetricsReport cmd_evaluate(const fs::path& checkpoint, const fs::path& embeddings,
                                  const fs::path& dataset, std::ostream& out) {
  const auto m = load_model(checkpoint, embeddings);
  const auto gold = read_dataset_file(dataset, {true, m.checkpoint.tokenizer});
  const auto examples = make_examples(gold, m.checkpoint.vocab, m.table);
  const auto report = make_report(dataset.filename().string(),
                                   score_examples(examples, m.checkpoint.params));
  out << render_report({report});
  return report;
}

// Writes the input abstracts back with predicted label prefixes.
inline void cmd_predict(const fs::path& checkpoint, const fs::path& embeddings,
                        const fs::path& input, std::ostream& out) {
  const auto m = load_model(checkpoint, embeddings);
  auto abstracts = read_dataset_file(input, {false, m.checkpoint.tokenizer});
  for (auto& a : abstracts) {
    if (a.sentences.empty()) continue;
    const auto x = embed_abstract(a, m.checkpoint.vocab, m.table);
    const auto labels = predict_labels(x, m.checkpoint.params);
    for (std::size_t t = 0; t < labels.size(); ++t) a.sentences[t].label = label_from_index(labels[t]);
  }
  serialize_dataset(out, abstracts);
}

}  // namespace pico
