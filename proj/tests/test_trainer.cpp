#include <gtest/gtest.h>

#include <set>

#include "training_fixture.hpp"

using namespace pico;

namespace {

TrainConfig quick_config(std::uint64_t seed) {
  TrainConfig c;
  c.learning_rate = 0.02;
  c.dropout_rate = 0.2;
  c.batch_size = 4;
  c.max_epochs = 4;
  c.seed = seed;
  c.perturb.lambda_adv = c.perturb.lambda_vat = 0.0;
  return c;
}

test::TrainingFixture tiny_fixture(std::size_t abstracts, std::uint64_t seed) {
  SyntheticOptions o;
  o.abstracts = abstracts;
  o.seed = seed;
  o.max_sentences = 5;
  return test::make_training_fixture(o, 6);
}

void expect_same_logs(const std::vector<EpochLog>& a, const std::vector<EpochLog>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].epoch, b[i].epoch);
    EXPECT_EQ(a[i].classification, b[i].classification);
    EXPECT_EQ(a[i].adversarial, b[i].adversarial);
    EXPECT_EQ(a[i].virtual_adversarial, b[i].virtual_adversarial);
    EXPECT_EQ(a[i].dev_loss, b[i].dev_loss);
    EXPECT_EQ(a[i].dev_f1, b[i].dev_f1);
    EXPECT_EQ(a[i].dev_metric, b[i].dev_metric);
  }
}

}  // namespace

TEST(TrainFold, PatienceZeroStopsAtFirstNonImprovement) {
  const auto f = tiny_fixture(12, 5);
  const std::vector<Abstract> train(f.corpus.abstracts.begin(), f.corpus.abstracts.begin() + 9);
  const std::vector<Abstract> dev(f.corpus.abstracts.begin() + 9, f.corpus.abstracts.end());
  std::size_t stopped_early = 0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    auto cfg = quick_config(seed);
    cfg.learning_rate = 0.05;
    cfg.max_epochs = 3;
    cfg.patience = 100;
    const auto full = train_fold(train, dev, test::small_model(6, 3), cfg, f.inputs());
    ASSERT_EQ(full.log.size(), 3u);
    std::size_t expected = 3;
    double best = -1;
    for (const auto& e : full.log) {
      if (e.dev_metric <= best) {
        expected = e.epoch;
        break;
      }
      best = e.dev_metric;
    }
    cfg.patience = 0;
    const auto run = train_fold(train, dev, test::small_model(6, 3), cfg, f.inputs());
    EXPECT_EQ(run.log.size(), expected) << "seed " << seed;
    expect_same_logs(run.log, std::vector<EpochLog>(full.log.begin(), full.log.begin() + expected));
    stopped_early += expected < 3;
  }
  EXPECT_GT(stopped_early, 0u) << "no seed exercised the stopping branch";
}

TEST(TrainFold, BestCheckpointIsTheBestEpoch) {
  const auto f = tiny_fixture(12, 6);
  const std::vector<Abstract> train(f.corpus.abstracts.begin(), f.corpus.abstracts.begin() + 9);
  const std::vector<Abstract> dev(f.corpus.abstracts.begin() + 9, f.corpus.abstracts.end());
  auto cfg = quick_config(2);
  cfg.patience = 100;
  const auto r = train_fold(train, dev, test::small_model(6, 3), cfg, f.inputs());
  double best = -1;
  std::size_t epoch = 0;
  for (const auto& e : r.log) {
    if (e.dev_metric > best) best = e.dev_metric, epoch = e.epoch;
  }
  EXPECT_EQ(r.best.epoch, epoch);
  EXPECT_EQ(r.best.dev_metric, best);
  EXPECT_EQ(r.best.model_checksum, r.best_params.checksum());
}

TEST(TrainFold, SameSeedSameLogs) {
  const auto f = tiny_fixture(10, 7);
  const std::vector<Abstract> train(f.corpus.abstracts.begin(), f.corpus.abstracts.begin() + 8);
  const std::vector<Abstract> dev(f.corpus.abstracts.begin() + 8, f.corpus.abstracts.end());
  auto cfg = quick_config(11);
  cfg.perturb = {0.5, 0.5, 1e-2, 1.0, 1.0};
  cfg.eval_train_loss = true;
  const auto a = train_fold(train, dev, test::small_model(6, 3), cfg, f.inputs());
  const auto b = train_fold(train, dev, test::small_model(6, 3), cfg, f.inputs());
  expect_same_logs(a.log, b.log);
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].train_loss, b.log[i].train_loss);
  EXPECT_EQ(a.best_params.checksum(), b.best_params.checksum());
  cfg.seed = 12;
  const auto c = train_fold(train, dev, test::small_model(6, 3), cfg, f.inputs());
  EXPECT_NE(c.best_params.checksum(), a.best_params.checksum());
}

TEST(TrainFold, EmbeddingsStayFrozen) {
  const auto f = tiny_fixture(10, 8);
  const std::uint64_t before = f.table.checksum();
  const Tensor copy = f.table.vectors;
  auto cfg = quick_config(3);
  cfg.perturb = {1.0, 1.0, 1e-2, 1.0, 1.0};
  train_fold(f.corpus.abstracts, f.corpus.abstracts, test::small_model(6, 3), cfg, f.inputs());
  EXPECT_EQ(f.table.checksum(), before);
  EXPECT_EQ(f.table.vectors, copy);
}

TEST(TrainFold, RejectsBadInputs) {
  const auto f = tiny_fixture(4, 9);
  auto cfg = quick_config(0);
  EXPECT_THROW(train_fold({}, f.corpus.abstracts, test::small_model(6, 3), cfg, f.inputs()),
               ConfigError);
  EXPECT_THROW(train_fold(f.corpus.abstracts, f.corpus.abstracts, test::small_model(7, 3), cfg,
                          f.inputs()),
               ConfigError);
  cfg.dropout_rate = 1.0;
  EXPECT_THROW(train_fold(f.corpus.abstracts, f.corpus.abstracts, test::small_model(6, 3), cfg,
                          f.inputs()),
               ConfigError);
  cfg = quick_config(0);
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(TrainFold, TrainingLossDecreases) {
  SyntheticOptions o;
  o.abstracts = 50;
  o.seed = 3;
  const auto f = test::make_training_fixture(o, 8);
  TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.dropout_rate = 0.0;
  cfg.l2_coefficient = 0.0;
  cfg.batch_size = 8;
  cfg.max_epochs = 11;
  cfg.patience = 100;
  cfg.eval_train_loss = true;
  cfg.seed = 1;
  cfg.perturb.lambda_adv = cfg.perturb.lambda_vat = 0.0;
  const auto r = train_fold(f.corpus.abstracts, f.corpus.abstracts, test::small_model(8, 8), cfg,
                            f.inputs());
  ASSERT_EQ(r.log.size(), 11u);
  int non_increasing = 0;
  for (std::size_t i = 1; i < r.log.size(); ++i) {
    non_increasing += r.log[i].train_loss <= r.log[i - 1].train_loss;
  }
  EXPECT_GE(non_increasing, 8);
  EXPECT_LT(r.log.back().train_loss, r.log.front().train_loss);
}

TEST(TrainFold, OverfitsFiftyAbstracts) {
  SyntheticOptions o;
  o.abstracts = 50;
  o.seed = 3;
  const auto f = test::make_training_fixture(o, 8);
  TrainConfig cfg;
  cfg.learning_rate = 0.02;
  cfg.dropout_rate = 0.0;
  cfg.l2_coefficient = 0.0;
  cfg.batch_size = 8;
  cfg.max_epochs = 200;
  cfg.patience = 5;
  cfg.seed = 1;
  cfg.perturb.lambda_adv = cfg.perturb.lambda_vat = 0.0;
  const auto r = train_fold(f.corpus.abstracts, f.corpus.abstracts, test::small_model(8, 12), cfg,
                            f.inputs());
  EXPECT_GE(test::sentence_accuracy(f.corpus.abstracts, f.vocab, f.table, r.best_params), 0.99);
}

TEST(FoldData, TwentyAbstractsSplitSixteenTwoTwo) {
  const auto corpus = make_synthetic_corpus({20, 2, 3, 1, 2, 1, 5, 0.5, {1}, 4});
  const auto split = split_folds(corpus.abstracts, 10, 4);
  for (std::size_t fold = 0; fold < 10; ++fold) {
    const auto d = fold_data(corpus.abstracts, split, fold);
    EXPECT_EQ(d.train.size(), 16u);
    EXPECT_EQ(d.dev.size(), 2u);
    EXPECT_EQ(d.test.size(), 2u);
    std::set<std::string> ids;
    for (const auto* part : {&d.train, &d.dev, &d.test}) {
      for (const auto& a : *part) ids.insert(a.id);
    }
    EXPECT_EQ(ids.size(), 20u);
    for (const auto& a : d.test) EXPECT_EQ(split.assignments.at(a.id), fold);
    for (const auto& a : d.dev) EXPECT_EQ(split.assignments.at(a.id), (fold + 1) % 10);
  }
}

TEST(RunFold, TestFoldDoesNotLeak) {
  const auto f = tiny_fixture(20, 10);
  const auto split = split_folds(f.corpus.abstracts, 5, 1);
  const auto other = make_synthetic_corpus({20, 2, 6, 1, 8, 1, 5, 0.5, {2}, 77});
  auto swapped = f.corpus.abstracts;
  std::size_t k = 0;
  for (auto& a : swapped) {
    if (split.assignments.at(a.id) == 2) a.sentences = other.abstracts[k++].sentences;
  }
  ASSERT_GT(k, 0u);
  CrossValOptions opt;
  opt.folds = 5;
  opt.min_count = 1;
  auto cfg = quick_config(5);
  cfg.max_epochs = 2;
  const auto a = run_fold(f.corpus.abstracts, split, 2, f.vectors, test::small_model(6, 3), cfg, opt);
  const auto b = run_fold(swapped, split, 2, f.vectors, test::small_model(6, 3), cfg, opt);
  EXPECT_EQ(a.vocab_hash, b.vocab_hash);
  EXPECT_EQ(a.embedding_checksum_before, b.embedding_checksum_before);
  EXPECT_EQ(a.training.best_params.checksum(), b.training.best_params.checksum());
  expect_same_logs(a.training.log, b.training.log);
  EXPECT_EQ(a.test_ids, b.test_ids);
}

TEST(CrossValidate, MeanOfFoldsAndParallelAgreement) {
  const auto f = tiny_fixture(20, 12);
  CrossValOptions opt;
  opt.folds = 5;
  opt.min_count = 1;
  auto cfg = quick_config(9);
  cfg.max_epochs = 2;
  const auto serial = cross_validate(f.corpus.abstracts, f.vectors, test::small_model(6, 3), cfg, opt);
  ASSERT_EQ(serial.folds.size(), 5u);
  for (const auto& fo : serial.folds) {
    EXPECT_EQ(fo.embedding_checksum_before, fo.embedding_checksum_after);
    EXPECT_EQ(fo.train_size + fo.dev_size + fo.test_size, 20u);
  }
  for (Label l : {Label::P, Label::I, Label::O}) {
    double sum = 0;
    for (const auto& fo : serial.folds) sum += fo.test[l].f1;
    EXPECT_NEAR(serial.mean[l].f1, sum / 5.0, 1e-12);
  }
  opt.jobs = 3;
  const auto parallel = cross_validate(f.corpus.abstracts, f.vectors, test::small_model(6, 3), cfg, opt);
  EXPECT_EQ(export_metrics(parallel.reports()), export_metrics(serial.reports()));
}

TEST(Synthetic, WordsSurviveTokenization) {
  const auto corpus = make_synthetic_corpus({});
  for (const auto& w : corpus.words) EXPECT_EQ(tokenize(w), std::vector<std::string>{w});
  const Vocab v = build_vocab(corpus.abstracts, 1);
  EXPECT_EQ(v.size(), corpus.words.size() + 1);
}

TEST(Synthetic, RelationalLabelsFollowTheirNeighbor) {
  SyntheticOptions o;
  o.shifts = {1, 3};
  const auto corpus = make_synthetic_corpus(o);
  std::size_t relational = 0;
  for (std::size_t a = 0; a < corpus.abstracts.size(); ++a) {
    const auto& s = corpus.abstracts[a].sentences;
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (!corpus.info[a][t].relational) continue;
      ++relational;
      ASSERT_GT(t, 0u);
      EXPECT_FALSE(corpus.info[a][t - 1].relational);
      const std::size_t prev = label_index(*s[t - 1].label), cur = label_index(*s[t].label);
      const bool shift0 = s[t].text.find("rela") != std::string::npos;
      EXPECT_EQ(cur, (prev + (shift0 ? 1 : 3)) % kNumLabels);
    }
  }
  EXPECT_GT(relational, 100u);
}
