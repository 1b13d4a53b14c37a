// Synthetic labeled abstracts where some sentence labels can only be
// recovered from context.
//
// Every label has its own keywords ("kw<L><j>"). A sentence carrying a label
// keyword has that label. A sentence carrying a relational keyword
// "rel<s>" instead takes the label (previous label + shift_s) mod 7, so its
// label depends jointly on its own keyword and on its neighbor's label.
// Relational sentences always follow a keyword sentence. Remaining words are
// filler drawn uniformly from a fixed pool.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pico/corpus.hpp"
#include "pico/embeddings.hpp"

namespace pico {

struct SyntheticOptions {
  std::size_t abstracts = 300;
  std::size_t min_sentences = 4;
  std::size_t max_sentences = 8;
  std::size_t min_filler = 3;
  std::size_t max_filler = 6;
  std::size_t keywords_per_label = 2;
  std::size_t filler_words = 30;
  double relational_probability = 0.6;
  std::vector<std::size_t> shifts = {1, 2, 3};
  std::uint64_t seed = 0;
};

struct SyntheticSentenceInfo {
  bool relational = false;
};

struct SyntheticCorpus {
  std::vector<Abstract> abstracts;
  std::vector<std::vector<SyntheticSentenceInfo>> info;
  std::vector<std::string> words;  // every word the generator can emit
};

// Word suffixes are letters ("a", ..., "z", "ba", ...) because the tokenizer
// collapses digit runs.
inline std::string letter_suffix(std::size_t n) {
  std::string s;
  do {
    s.insert(s.begin(), static_cast<char>('a' + n % 26));
    n /= 26;
  } while (n > 0);
  return s;
}

inline std::string synthetic_keyword(std::size_t label, std::size_t j) {
  return "kw" + std::string(1, static_cast<char>('a' + label)) + letter_suffix(j);
}

inline std::string synthetic_relational(std::size_t s) { return "rel" + letter_suffix(s); }

inline std::string synthetic_filler(std::size_t f) { return "w" + letter_suffix(f); }

inline SyntheticCorpus make_synthetic_corpus(const SyntheticOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  auto uniform = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  std::bernoulli_distribution relational(opt.relational_probability);

  SyntheticCorpus corpus;
  for (std::size_t l = 0; l < kNumLabels; ++l) {
    for (std::size_t j = 0; j < opt.keywords_per_label; ++j) {
      corpus.words.push_back(synthetic_keyword(l, j));
    }
  }
  for (std::size_t s = 0; s < opt.shifts.size(); ++s) corpus.words.push_back(synthetic_relational(s));
  for (std::size_t f = 0; f < opt.filler_words; ++f) corpus.words.push_back(synthetic_filler(f));

  for (std::size_t a = 0; a < opt.abstracts; ++a) {
    Abstract abs;
    char id[32];
    std::snprintf(id, sizeof id, "syn%05zu", a);
    abs.id = id;
    std::vector<SyntheticSentenceInfo> info;
    const std::size_t n = uniform(opt.min_sentences, opt.max_sentences);
    std::size_t prev_label = 0;
    bool prev_relational = true;
    for (std::size_t t = 0; t < n; ++t) {
      std::string keyword;
      std::size_t label;
      const bool rel = !prev_relational && relational(rng);
      if (rel) {
        const std::size_t s = uniform(0, opt.shifts.size() - 1);
        label = (prev_label + opt.shifts[s]) % kNumLabels;
        keyword = synthetic_relational(s);
      } else {
        label = uniform(0, kNumLabels - 1);
        keyword = synthetic_keyword(label, uniform(0, opt.keywords_per_label - 1));
      }
      const std::size_t fill = uniform(opt.min_filler, opt.max_filler);
      const std::size_t pos = uniform(0, fill);
      std::string text;
      for (std::size_t w = 0; w <= fill; ++w) {
        if (!text.empty()) text += ' ';
        text += (w == pos) ? keyword : synthetic_filler(uniform(0, opt.filler_words - 1));
      }
      Sentence sentence{text, tokenize(text), label_from_index(label)};
      abs.sentences.push_back(std::move(sentence));
      info.push_back({rel});
      prev_label = label;
      prev_relational = rel;
    }
    corpus.abstracts.push_back(std::move(abs));
    corpus.info.push_back(std::move(info));
  }
  return corpus;
}

// Gaussian random vectors for the given words.
inline PretrainedVectors make_random_vectors(const std::vector<std::string>& words,
                                             std::size_t dimension, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  PretrainedVectors out;
  out.dimension = dimension;
  for (const auto& w : words) {
    std::vector<double> v(dimension);
    for (double& x : v) x = static_cast<double>(static_cast<float>(normal(rng)));
    out.vectors.emplace(w, std::move(v));
  }
  return out;
}

}  // namespace pico
