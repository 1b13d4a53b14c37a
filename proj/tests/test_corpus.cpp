#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "pico/corpus.hpp"

using namespace pico;

namespace {

std::vector<Abstract> load(const std::string& name) {
  std::ifstream in(std::string(PICO_DATA_DIR) + "/" + name);
  if (!in) throw std::runtime_error("missing fixture " + name);
  return parse_dataset(in);
}

std::vector<Abstract> numbered(std::size_t n) {
  std::vector<Abstract> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({"id" + std::to_string(i), {{"x", {"x"}, Label::P}}});
  }
  return out;
}

std::string expect_parse_error(const std::string& text) {
  try {
    parse_dataset_string(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no parse error for:\n" << text;
  return {};
}

std::vector<Abstract> random_corpus(std::mt19937_64& rng) {
  static const std::vector<std::string> words = {"the", "Trial", "n=12", "(mean)", "3.5%", "dose,",
                                                 "placebo", "x|y", "[...]", "Outcome:"};
  std::uniform_int_distribution<int> n_abs(0, 6), n_sent(1, 5), n_words(1, 8), pick(0, 9),
      lab(0, 6);
  std::bernoulli_distribution unlabeled(0.2);
  std::vector<Abstract> out;
  const int a_count = n_abs(rng);
  for (int a = 0; a < a_count; ++a) {
    Abstract abs{"pmid" + std::to_string(1000 + a), {}};
    const int s_count = n_sent(rng);
    for (int s = 0; s < s_count; ++s) {
      std::string text;
      const int w_count = n_words(rng);
      for (int w = 0; w < w_count; ++w) text += (w ? " " : "") + words[pick(rng)];
      Sentence sent{text, tokenize(text), std::nullopt};
      if (!unlabeled(rng)) sent.label = label_from_index(lab(rng));
      abs.sentences.push_back(std::move(sent));
    }
    out.push_back(std::move(abs));
  }
  return out;
}

}  // namespace

TEST(Labels, ClosedSetOfSeven) {
  EXPECT_EQ(kNumLabels, 7u);
  for (char c : std::string("APIOMRC")) EXPECT_TRUE(parse_label(c).has_value()) << c;
  for (char c : std::string("XpBZ ")) EXPECT_FALSE(parse_label(c).has_value()) << c;
  for (std::size_t i = 0; i < kNumLabels; ++i) EXPECT_EQ(label_index(label_from_index(i)), i);
  EXPECT_THROW(label_from_index(7), ValidationError);
}

TEST(Tokenize, GoldenParticipantsSentence) {
  const std::vector<std::string> want = {"the", "study", "comprised", "smokers",
                                         "(",   "n=<num>", ")",       ","};
  EXPECT_EQ(tokenize("The study comprised smokers (n=484),"), want);
}

TEST(Tokenize, SingleWordAndWhitespaceOnly) {
  EXPECT_EQ(tokenize("A"), std::vector<std::string>{"a"});
  EXPECT_THROW(tokenize("   "), EmptyInputError);
  EXPECT_THROW(tokenize(""), EmptyInputError);
}

TEST(Tokenize, NumbersAndPunctuation) {
  EXPECT_EQ(tokenize("59.5% of 1,000 men."),
            (std::vector<std::string>{"<num>", "%", "of", "<num>", "men", "."}));
  EXPECT_EQ(tokenize("1mg 0.7-1.43"), (std::vector<std::string>{"<num>mg", "<num>-<num>"}));
  EXPECT_EQ(tokenize("...!"), (std::vector<std::string>{".", ".", ".", "!"}));
}

TEST(Tokenize, OptionsTurnRulesOff) {
  TokenizerOptions opt;
  opt.lowercase = false;
  opt.collapse_digits = false;
  EXPECT_EQ(tokenize("Dose 25mg.", opt), (std::vector<std::string>{"Dose", "25mg", "."}));
}

TEST(Tokenize, NeverEmptyForVisibleText) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> ch(33, 126), len(1, 12);
  for (int i = 0; i < 500; ++i) {
    std::string s(len(rng), ' ');
    for (char& c : s) c = static_cast<char>(ch(rng));
    s = "  " + s + "\t";
    EXPECT_FALSE(tokenize(s).empty()) << s;
  }
}

TEST(ParseDataset, TypicalAbstractFixture) {
  const auto abstracts = load("pmid28449281.txt");
  ASSERT_EQ(abstracts.size(), 1u);
  EXPECT_EQ(abstracts[0].id, "28449281");
  ASSERT_EQ(abstracts[0].sentences.size(), 7u);
  std::string labels;
  for (const auto& s : abstracts[0].sentences) labels += label_char(*s.label);
  EXPECT_EQ(labels, "AMPIORC");
  const auto& p = abstracts[0].sentences[2].tokens;
  const std::vector<std::string> head(p.begin(), p.begin() + 8);
  EXPECT_EQ(head, tokenize("The study comprised smokers (n=484),"));
}

TEST(ParseDataset, EmptyStream) { EXPECT_TRUE(parse_dataset_string("").empty()); }

TEST(ParseDataset, SentenceCountsOfThreeAbstractFixture) {
  const auto abstracts = load("three_abstracts.txt");
  ASSERT_EQ(abstracts.size(), 3u);
  EXPECT_EQ(abstracts[0].sentences.size(), 2u);
  EXPECT_EQ(abstracts[1].sentences.size(), 3u);
  EXPECT_EQ(abstracts[2].sentences.size(), 4u);
  EXPECT_EQ(abstracts[2].id, "a3");
}

TEST(ParseDataset, ErrorsNameTheLine) {
  EXPECT_NE(expect_parse_error("###a\nP|ok\nX|bad tag\n").find("line 3"), std::string::npos);
  EXPECT_NE(expect_parse_error("###a\nP|ok\n\n###a\nI|again\n").find("duplicate"),
            std::string::npos);
  EXPECT_NE(expect_parse_error("###a\n\n###b\nP|x\n").find("no sentences"), std::string::npos);
  EXPECT_NE(expect_parse_error("###a\n").find("no sentences"), std::string::npos);
  EXPECT_NE(expect_parse_error("P|orphan\n").find("line 1"), std::string::npos);
  EXPECT_NE(expect_parse_error("###a\nno label here\n").find("line 2"), std::string::npos);
  EXPECT_NE(expect_parse_error("###a\nP|   \n").find("empty sentence"), std::string::npos);
}

TEST(ParseDataset, OptionalLabelsAtPrediction) {
  ParseOptions opt;
  opt.require_labels = false;
  const auto abstracts = parse_dataset_string("###q\nFirst sentence.\nP|Second one.\n", opt);
  ASSERT_EQ(abstracts.size(), 1u);
  EXPECT_FALSE(abstracts[0].sentences[0].label.has_value());
  EXPECT_EQ(abstracts[0].sentences[1].label, Label::P);
  EXPECT_FALSE(abstracts[0].fully_labeled());
  EXPECT_THROW(abstracts[0].label_indices(), ValidationError);
}

TEST(ParseDataset, CrlfAndMissingTrailingBlank) {
  const auto a = parse_dataset_string("###a\r\nP|one\r\n\r\n###b\r\nO|two");
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].sentences[0].text, "one");
  EXPECT_EQ(a[1].sentences[0].label, Label::O);
}

TEST(ParseDataset, SerializeRoundTrip) {
  std::mt19937_64 rng(2024);
  ParseOptions opt;
  opt.require_labels = false;
  for (int rep = 0; rep < 200; ++rep) {
    const auto corpus = random_corpus(rng);
    const std::string text = serialize_dataset_string(corpus);
    EXPECT_EQ(parse_dataset_string(text, opt), corpus) << text;
    EXPECT_EQ(serialize_dataset_string(parse_dataset_string(text, opt)), text);
  }
  const auto fixture = load("pmid28449281.txt");
  EXPECT_EQ(parse_dataset_string(serialize_dataset_string(fixture)), fixture);
}

TEST(SplitFolds, TwentyIntoTen) {
  const auto abstracts = numbered(20);
  const auto split = split_folds(abstracts, 10, 7);
  EXPECT_EQ(split.assignments.size(), 20u);
  for (std::size_t s : split.fold_sizes()) EXPECT_EQ(s, 2u);
  for (const auto& a : abstracts) EXPECT_EQ(split.assignments.count(a.id), 1u);
}

TEST(SplitFolds, DeterministicAndOrderIndependent) {
  auto abstracts = numbered(37);
  const auto a = split_folds(abstracts, 10, 99);
  std::reverse(abstracts.begin(), abstracts.end());
  const auto b = split_folds(abstracts, 10, 99);
  EXPECT_EQ(a.assignments, b.assignments);
}

TEST(SplitFolds, SeedsDiffer) {
  const auto abstracts = numbered(100);
  EXPECT_NE(split_folds(abstracts, 10, 1).assignments, split_folds(abstracts, 10, 2).assignments);
}

TEST(SplitFolds, BalancedPartitionForManySizes) {
  for (std::size_t n = 2; n < 60; n += 3) {
    for (std::size_t k : {2u, 3u, 10u}) {
      if (k > n) continue;
      const auto sizes = split_folds(numbered(n), k, n * 31 + k).fold_sizes();
      const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
      EXPECT_LE(*hi - *lo, 1u);
      EXPECT_EQ(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}), n);
    }
  }
}

TEST(SplitFolds, ConfigErrors) {
  EXPECT_THROW(split_folds(numbered(5), 6, 0), ConfigError);
  EXPECT_THROW(split_folds(numbered(5), 1, 0), ConfigError);
}

TEST(DatasetStats, TypicalAbstract) {
  const auto st = dataset_stats(load("pmid28449281.txt"));
  EXPECT_EQ(st.abstracts, 1u);
  EXPECT_EQ(st.sentences, 7u);
  EXPECT_EQ(st.abstracts_per_label[label_index(Label::P)], 1u);
  EXPECT_EQ(st.abstracts_per_label[label_index(Label::I)], 1u);
  EXPECT_EQ(st.abstracts_per_label[label_index(Label::O)], 1u);
  for (std::size_t n : st.sentences_per_label) EXPECT_EQ(n, 1u);
}

TEST(DatasetStats, EmptyDataset) {
  const auto st = dataset_stats({});
  EXPECT_EQ(st.abstracts, 0u);
  EXPECT_EQ(st.sentences, 0u);
  for (std::size_t l = 0; l < kNumLabels; ++l) {
    EXPECT_EQ(st.sentences_per_label[l], 0u);
    EXPECT_EQ(st.abstracts_per_label[l], 0u);
  }
}

TEST(DatasetStats, AbstractCountedOncePerLabel) {
  const auto abstracts = parse_dataset_string(
      "###x\nP|a\nI|b\nI|c\n\n###y\nP|d\nO|e\n");
  const auto st = dataset_stats(abstracts);
  EXPECT_EQ(st.abstracts_per_label[label_index(Label::I)], 1u);
  EXPECT_EQ(st.sentences_per_label[label_index(Label::I)], 2u);
  EXPECT_EQ(st.abstracts_per_label[label_index(Label::P)], 2u);
  EXPECT_EQ(st.abstracts_per_label[label_index(Label::O)], 1u);
}

TEST(DatasetStats, UnlabeledIsAnError) {
  ParseOptions opt;
  opt.require_labels = false;
  EXPECT_THROW(dataset_stats(parse_dataset_string("###x\nunlabeled\n", opt)), ValidationError);
}
