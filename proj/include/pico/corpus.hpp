// Labeled abstracts: the line-oriented dataset format, tokenization,
// cross-validation folds and dataset statistics.
//
// Dataset format (UTF-8, one record per line):
//   ###<abstract-id>        starts an abstract
//   <LABEL>|<sentence text> one sentence; LABEL is one of A P I O M R C
//   <blank line>            ends the abstract
// When labels are optional (prediction input) a sentence line may omit the
// "<LABEL>|" prefix; a line is tagged only if its first character is a label.
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pico/error.hpp"

namespace pico {

enum class Label : std::uint8_t { A = 0, P, I, O, M, R, C };

inline constexpr std::size_t kNumLabels = 7;
inline constexpr std::array<char, kNumLabels> kLabelChars = {'A', 'P', 'I', 'O', 'M', 'R', 'C'};
inline constexpr std::array<Label, 3> kPicoLabels = {Label::P, Label::I, Label::O};

inline constexpr std::size_t label_index(Label l) { return static_cast<std::size_t>(l); }
inline constexpr char label_char(Label l) { return kLabelChars[label_index(l)]; }

inline Label label_from_index(std::size_t i) {
  if (i >= kNumLabels) throw ValidationError("label index out of range: " + std::to_string(i));
  return static_cast<Label>(i);
}

inline std::optional<Label> parse_label(char c) {
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (kLabelChars[i] == c) return static_cast<Label>(i);
  }
  return std::nullopt;
}

struct Sentence {
  std::string text;
  std::vector<std::string> tokens;
  std::optional<Label> label;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct Abstract {
  std::string id;
  std::vector<Sentence> sentences;

  bool fully_labeled() const {
    return std::all_of(sentences.begin(), sentences.end(),
                       [](const Sentence& s) { return s.label.has_value(); });
  }

  std::vector<std::size_t> label_indices() const {
    std::vector<std::size_t> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) {
      if (!s.label) throw ValidationError("abstract " + id + " has an unlabeled sentence");
      out.push_back(label_index(*s.label));
    }
    return out;
  }

  friend bool operator==(const Abstract&, const Abstract&) = default;
};

struct TokenizerOptions {
  bool lowercase = true;
  bool collapse_digits = true;
};

inline constexpr std::string_view kNumberToken = "<num>";

namespace detail {

inline bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
inline bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

// Replaces each number (digit run, optionally with internal '.'/',' groups)
// by the number placeholder.
inline std::string collapse_numbers(std::string_view word) {
  std::string out;
  std::size_t i = 0;
  while (i < word.size()) {
    if (!is_digit(word[i])) {
      out += word[i++];
      continue;
    }
    while (i < word.size() && is_digit(word[i])) ++i;
    while (i + 1 < word.size() && (word[i] == '.' || word[i] == ',') && is_digit(word[i + 1])) {
      ++i;
      while (i < word.size() && is_digit(word[i])) ++i;
    }
    out += kNumberToken;
  }
  return out;
}

}  // namespace detail

// Lowercases, splits on whitespace, splits leading and trailing punctuation
// characters into their own tokens, and collapses numbers to "<num>".
inline std::vector<std::string> tokenize(std::string_view text, const TokenizerOptions& options = {}) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (start == i) break;
    std::string word(text.substr(start, i - start));
    if (options.lowercase) {
      for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    std::size_t lo = 0, hi = word.size();
    while (lo < hi && detail::is_punct(word[lo])) ++lo;
    while (hi > lo && detail::is_punct(word[hi - 1])) --hi;
    for (std::size_t k = 0; k < lo; ++k) tokens.emplace_back(1, word[k]);
    if (lo < hi) {
      const std::string_view core = std::string_view(word).substr(lo, hi - lo);
      tokens.push_back(options.collapse_digits ? detail::collapse_numbers(core) : std::string(core));
    }
    for (std::size_t k = hi; k < word.size(); ++k) tokens.emplace_back(1, word[k]);
  }
  if (tokens.empty()) throw EmptyInputError("sentence contains no tokens");
  return tokens;
}

struct ParseOptions {
  bool require_labels = true;
  TokenizerOptions tokenizer;
};

inline std::vector<Abstract> parse_dataset(std::istream& in, const ParseOptions& options = {}) {
  std::vector<Abstract> out;
  std::set<std::string> seen;
  std::optional<Abstract> current;
  std::size_t current_line = 0;
  auto fail = [](std::size_t line, const std::string& msg) {
    throw ParseError("line " + std::to_string(line) + ": " + msg);
  };
  auto finish = [&](std::size_t line) {
    if (!current) return;
    if (current->sentences.empty()) fail(line, "abstract '" + current->id + "' has no sentences");
    out.push_back(std::move(*current));
    current.reset();
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (blank) {
      finish(current_line);
      continue;
    }
    if (line.rfind("###", 0) == 0) {
      finish(current_line);
      std::string id = line.substr(3);
      while (!id.empty() && std::isspace(static_cast<unsigned char>(id.back()))) id.pop_back();
      if (id.empty()) fail(line_no, "empty abstract id");
      if (!seen.insert(id).second) fail(line_no, "duplicate abstract id '" + id + "'");
      current = Abstract{std::move(id), {}};
      current_line = line_no;
      continue;
    }
    if (!current) fail(line_no, "sentence outside of an abstract (missing ###<id> line)");

    Sentence sentence;
    std::string_view body = line;
    const bool tagged = body.size() >= 2 && body[1] == '|';
    const auto label = tagged ? parse_label(body[0]) : std::nullopt;
    if (label) {
      sentence.label = label;
      body.remove_prefix(2);
    } else if (tagged && options.require_labels) {
      fail(line_no, std::string("unknown label tag '") + body[0] + "'");
    } else if (options.require_labels) {
      fail(line_no, "missing '<LABEL>|' prefix");
    }
    sentence.text = std::string(body);
    try {
      sentence.tokens = tokenize(sentence.text, options.tokenizer);
    } catch (const EmptyInputError&) {
      fail(line_no, "empty sentence");
    }
    current->sentences.push_back(std::move(sentence));
  }
  finish(current_line);
  return out;
}

inline std::vector<Abstract> parse_dataset_string(const std::string& text,
                                                  const ParseOptions& options = {}) {
  std::istringstream in(text);
  return parse_dataset(in, options);
}

inline void serialize_dataset(std::ostream& out, const std::vector<Abstract>& abstracts) {
  for (const auto& a : abstracts) {
    out << "###" << a.id << '\n';
    for (const auto& s : a.sentences) {
      if (!s.label && s.text.size() >= 2 && s.text[1] == '|' && parse_label(s.text[0])) {
        throw FormatError("unlabeled sentence in '" + a.id + "' would read back as labeled");
      }
      if (s.label) out << label_char(*s.label) << '|';
      out << s.text << '\n';
    }
    out << '\n';
  }
}

inline std::string serialize_dataset_string(const std::vector<Abstract>& abstracts) {
  std::ostringstream out;
  serialize_dataset(out, abstracts);
  return out.str();
}

struct FoldSplit {
  std::size_t k = 0;
  std::map<std::string, std::size_t> assignments;

  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (const auto& [id, fold] : assignments) ++sizes[fold];
    return sizes;
  }
};

// Ids are sorted, shuffled with a seeded generator, then dealt round-robin.
inline FoldSplit split_folds(const std::vector<Abstract>& abstracts, std::size_t k,
                             std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  if (k > abstracts.size()) {
    throw ConfigError("fold count " + std::to_string(k) + " exceeds dataset size " +
                      std::to_string(abstracts.size()));
  }
  std::vector<std::string> ids;
  ids.reserve(abstracts.size());
  for (const auto& a : abstracts) ids.push_back(a.id);
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  FoldSplit split{k, {}};
  for (std::size_t i = 0; i < ids.size(); ++i) split.assignments[ids[i]] = i % k;
  return split;
}

struct DatasetStats {
  std::size_t abstracts = 0;
  std::size_t sentences = 0;
  std::array<std::size_t, kNumLabels> sentences_per_label{};
  std::array<std::size_t, kNumLabels> abstracts_per_label{};
};

inline DatasetStats dataset_stats(const std::vector<Abstract>& abstracts) {
  DatasetStats st;
  for (const auto& a : abstracts) {
    ++st.abstracts;
    std::array<bool, kNumLabels> present{};
    for (const auto& s : a.sentences) {
      if (!s.label) throw ValidationError("abstract " + a.id + " contains an unlabeled sentence");
      ++st.sentences;
      ++st.sentences_per_label[label_index(*s.label)];
      present[label_index(*s.label)] = true;
    }
    for (std::size_t l = 0; l < kNumLabels; ++l) st.abstracts_per_label[l] += present[l] ? 1 : 0;
  }
  return st;
}

inline void print_stats(std::ostream& out, const DatasetStats& st) {
  out << "abstracts " << st.abstracts << "\nsentences " << st.sentences << '\n';
  out << "label  sentences  abstracts\n";
  for (std::size_t l = 0; l < kNumLabels; ++l) {
    out << "  " << kLabelChars[l] << "    " << st.sentences_per_label[l] << "    "
        << st.abstracts_per_label[l] << '\n';
  }
}

}  // namespace pico
