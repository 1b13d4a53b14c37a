// Vocabulary with training-set word frequencies, word2vec loading and
// frequency-weighted embedding normalization.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "pico/corpus.hpp"
#include "pico/error.hpp"
#include "pico/tensor.hpp"

namespace pico {

inline constexpr std::string_view kUnknownWord = "<unk>";

// Index 0 is always <unk>. Frequencies are relative token frequencies over
// the training split after rare words are folded into <unk>; they sum to 1.
class Vocab {
 public:
  Vocab() = default;

  Vocab(std::vector<std::string> words, std::vector<std::size_t> counts)
      : words_(std::move(words)), counts_(std::move(counts)) {
    if (words_.empty() || words_[0] != kUnknownWord) {
      throw ValidationError("vocabulary must start with <unk>");
    }
    if (counts_.size() != words_.size()) throw DimensionError("vocabulary counts length mismatch");
    std::size_t total = 0;
    for (std::size_t c : counts_) total += c;
    if (total == 0) throw ConfigError("vocabulary built from an empty corpus");
    frequencies_ = Tensor::vector(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (!index_.emplace(words_[i], i).second) {
        throw ValidationError("duplicate vocabulary word '" + words_[i] + "'");
      }
      frequencies_[i] = static_cast<double>(counts_[i]) / static_cast<double>(total);
    }
  }

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  const Tensor& frequencies() const { return frequencies_; }
  std::size_t unknown_index() const { return 0; }

  std::optional<std::size_t> find(const std::string& word) const {
    auto it = index_.find(word);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t index_of(const std::string& word) const { return find(word).value_or(0); }

  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < words_.size(); ++i) {
      h = fnv1a(words_[i].data(), words_[i].size(), h);
      const std::uint64_t sep = 0xff, c = counts_[i];
      h = fnv1a(&sep, 1, h);
      h = fnv1a(&c, sizeof c, h);
    }
    return h;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::size_t> counts_;
  Tensor frequencies_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Words seen fewer than min_count times in the training abstracts share <unk>.
// Vocabulary order after <unk> is lexicographic.
inline Vocab build_vocab(const std::vector<Abstract>& training, std::size_t min_count) {
  std::map<std::string, std::size_t> raw;
  std::size_t total = 0;
  for (const auto& a : training) {
    for (const auto& s : a.sentences) {
      for (const auto& tok : s.tokens) {
        ++raw[tok];
        ++total;
      }
    }
  }
  if (total == 0) throw ConfigError("cannot build a vocabulary from an empty corpus");
  std::vector<std::string> words{std::string(kUnknownWord)};
  std::vector<std::size_t> counts{0};
  for (const auto& [word, count] : raw) {
    if (word == kUnknownWord || count < min_count) {
      counts[0] += count;
    } else {
      words.push_back(word);
      counts.push_back(count);
    }
  }
  return Vocab(std::move(words), std::move(counts));
}

struct EmbeddingTable {
  Tensor vectors;  // [K x D]
  bool normalized = false;
  std::vector<std::size_t> degenerate_dimensions;

  std::size_t dimension() const { return vectors.cols(); }
  std::size_t size() const { return vectors.rows(); }
  std::uint64_t checksum() const { return pico::checksum(vectors); }
};

struct PretrainedVectors {
  std::size_t dimension = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
};

enum class Word2VecFormat { kText, kBinary };

namespace detail {

inline std::pair<std::size_t, std::size_t> read_word2vec_header(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw FormatError("word2vec file is empty");
  std::istringstream hs(header);
  long long count = -1, dim = -1;
  std::string extra;
  if (!(hs >> count >> dim) || (hs >> extra) || count < 0 || dim <= 0) {
    throw FormatError("malformed word2vec header '" + header + "'");
  }
  return {static_cast<std::size_t>(count), static_cast<std::size_t>(dim)};
}

inline float float_from_le(const unsigned char* b) {
  std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                       (static_cast<std::uint32_t>(b[2]) << 16) |
                       (static_cast<std::uint32_t>(b[3]) << 24);
  return std::bit_cast<float>(bits);
}

inline void float_to_le(float v, unsigned char* b) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
}

}  // namespace detail

// Values are read as 32-bit floats and promoted to double in both formats.
inline PretrainedVectors read_word2vec(std::istream& in, Word2VecFormat format) {
  const auto [count, dim] = detail::read_word2vec_header(in);
  PretrainedVectors out;
  out.dimension = dim;
  out.vectors.reserve(count);
  for (std::size_t r = 0; r < count; ++r) {
    std::string word;
    std::vector<double> v(dim);
    if (format == Word2VecFormat::kText) {
      std::string line;
      if (!std::getline(in, line)) {
        throw FormatError("word2vec file ends after " + std::to_string(r) + " of " +
                          std::to_string(count) + " rows");
      }
      std::istringstream ls(line);
      ls >> word;
      std::vector<double> row;
      std::string field;
      while (ls >> field) {
        try {
          row.push_back(static_cast<double>(std::stof(field)));
        } catch (const std::exception&) {
          throw FormatError("word2vec row " + std::to_string(r + 1) + ": bad value '" + field + "'");
        }
      }
      if (row.size() != dim) {
        throw FormatError("word2vec row " + std::to_string(r + 1) + " has " +
                          std::to_string(row.size()) + " values, expected " + std::to_string(dim));
      }
      v = std::move(row);
    } else {
      char c;
      while (in.get(c) && (c == '\n' || c == ' ' || c == '\r')) {
      }
      if (!in) throw FormatError("word2vec binary file truncated at row " + std::to_string(r + 1));
      word += c;
      while (in.get(c) && c != ' ') word += c;
      if (!in) throw FormatError("word2vec binary file truncated at row " + std::to_string(r + 1));
      std::vector<unsigned char> buf(4 * dim);
      if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
        throw FormatError("word2vec binary row " + std::to_string(r + 1) + " is truncated");
      }
      for (std::size_t j = 0; j < dim; ++j) v[j] = detail::float_from_le(buf.data() + 4 * j);
    }
    if (word.empty()) throw FormatError("word2vec row " + std::to_string(r + 1) + " has no word");
    out.vectors.insert_or_assign(std::move(word), std::move(v));
  }
  return out;
}

inline Word2VecFormat guess_word2vec_format(const std::filesystem::path& path) {
  return path.extension() == ".bin" ? Word2VecFormat::kBinary : Word2VecFormat::kText;
}

inline PretrainedVectors read_word2vec_file(const std::filesystem::path& path,
                                            std::optional<Word2VecFormat> format = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding file '" + path.string() + "'");
  return read_word2vec(in, format.value_or(guess_word2vec_format(path)));
}

// Writes rows in the given order; the float32 rounding matches what readers see.
inline void write_word2vec(std::ostream& out, const std::vector<std::string>& words,
                           const std::vector<std::vector<double>>& rows, Word2VecFormat format) {
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  out << words.size() << ' ' << dim << '\n';
  for (std::size_t r = 0; r < words.size(); ++r) {
    out << words[r] << ' ';
    if (format == Word2VecFormat::kText) {
      for (std::size_t j = 0; j < dim; ++j) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(static_cast<float>(rows[r][j])));
        out << buf << (j + 1 < dim ? " " : "");
      }
    } else {
      unsigned char b[4];
      for (std::size_t j = 0; j < dim; ++j) {
        detail::float_to_le(static_cast<float>(rows[r][j]), b);
        out.write(reinterpret_cast<const char*>(b), 4);
      }
    }
    out << '\n';
  }
}

struct PretrainedLoad {
  EmbeddingTable table;
  double coverage = 0.0;  // fraction of vocabulary rows found in the file
};

// Seed for the fallback row of a word missing from the pretrained file;
// depends only on the word and the global seed, not on vocabulary order.
inline std::uint64_t word_seed(const std::string& word, std::uint64_t seed) {
  return fnv1a(word.data(), word.size(), 1469598103934665603ULL ^ (seed * 0x9e3779b97f4a7c15ULL));
}

inline PretrainedLoad load_pretrained(const PretrainedVectors& file, const Vocab& vocab,
                                      std::uint64_t seed) {
  if (file.dimension == 0) throw FormatError("pretrained vectors have zero dimension");
  PretrainedLoad out;
  out.table.vectors = Tensor::matrix(vocab.size(), file.dimension);
  std::size_t found = 0;
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    auto row = out.table.vectors.row(k);
    auto it = file.vectors.find(vocab.words()[k]);
    if (it != file.vectors.end()) {
      if (it->second.size() != file.dimension) throw FormatError("pretrained row dimension mismatch");
      std::copy(it->second.begin(), it->second.end(), row.begin());
      ++found;
    } else {
      std::mt19937_64 rng(word_seed(vocab.words()[k], seed));
      std::uniform_real_distribution<double> dist(-0.1, 0.1);
      for (double& v : row) v = dist(rng);
    }
  }
  out.coverage = static_cast<double>(found) / static_cast<double>(vocab.size());
  return out;
}

// Per dimension: subtract the frequency-weighted mean and divide by the
// frequency-weighted standard deviation. Dimensions with variance < 1e-12 are
// centered only and recorded in degenerate_dimensions.
inline EmbeddingTable normalize_embeddings(const EmbeddingTable& table, const Vocab& vocab) {
  if (table.normalized) throw StateError("embedding table is already normalized");
  if (table.size() != vocab.size()) {
    throw DimensionError("embedding table has " + std::to_string(table.size()) +
                         " rows but vocabulary has " + std::to_string(vocab.size()));
  }
  const Tensor& f = vocab.frequencies();
  const std::size_t k_rows = table.size(), dim = table.dimension();
  EmbeddingTable out{table.vectors, true, {}};
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (std::size_t k = 0; k < k_rows; ++k) mean += f[k] * table.vectors(k, d);
    double var = 0.0;
    for (std::size_t k = 0; k < k_rows; ++k) {
      const double c = table.vectors(k, d) - mean;
      var += f[k] * c * c;
    }
    double scale = 1.0;
    if (var < 1e-12) {
      out.degenerate_dimensions.push_back(d);
    } else {
      scale = 1.0 / std::sqrt(var);
    }
    for (std::size_t k = 0; k < k_rows; ++k) {
      out.vectors(k, d) = (table.vectors(k, d) - mean) * scale;
    }
  }
  return out;
}

inline std::vector<Tensor> embed_sentence(const std::vector<std::string>& tokens, const Vocab& vocab,
                                          const EmbeddingTable& table) {
  if (!table.normalized) throw StateError("embed_sentence requires a normalized embedding table");
  if (tokens.empty()) throw EmptyInputError("cannot embed an empty sentence");
  std::vector<Tensor> out;
  out.reserve(tokens.size());
  for (const auto& tok : tokens) out.push_back(Tensor::of(table.vectors.row(vocab.index_of(tok))));
  return out;
}

}  // namespace pico
