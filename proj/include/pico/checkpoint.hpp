// Binary model checkpoint.
//
// Layout (all integers little-endian, doubles IEEE-754 binary64 little-endian):
//   char[8]  magic "PICOCKPT"
//   u32      format version (1)
//   u64      model config hash
//   u64      vocabulary hash
//   u64      embedding table hash (raw pretrained rows for this vocabulary)
//   u64      embedding fallback seed
//   u64 x 5  embedding_dim, word_hidden, sentence_hidden, attention_dim, num_labels
//   u8       contextualize
//   u8 x 2   tokenizer lowercase, collapse_digits
//   u64      vocabulary size K, then K x { u32 length, bytes, u64 count }
//   u32      tensor count, then per tensor:
//              u32 name length, name bytes, u32 rank, u64 x rank dims, f64 x volume data
#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "pico/corpus.hpp"
#include "pico/embeddings.hpp"
#include "pico/model.hpp"

namespace pico {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

inline constexpr std::array<char, 8> kCheckpointMagic = {'P', 'I', 'C', 'O', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  Vocab vocab;
  TokenizerOptions tokenizer;
  std::uint64_t embedding_hash = 0;
  std::uint64_t embedding_seed = 0;
};

namespace detail {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("checkpoint is truncated");
  return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw FormatError("checkpoint is truncated");
  return s;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  using detail::put;
  const ModelConfig& c = ck.params.config;
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, c.hash());
  put<std::uint64_t>(out, ck.vocab.hash());
  put<std::uint64_t>(out, ck.embedding_hash);
  put<std::uint64_t>(out, ck.embedding_seed);
  for (std::uint64_t v : {c.embedding_dim, c.word_hidden, c.sentence_hidden, c.attention_dim,
                          c.num_labels}) {
    put<std::uint64_t>(out, v);
  }
  put<std::uint8_t>(out, c.contextualize ? 1 : 0);
  put<std::uint8_t>(out, ck.tokenizer.lowercase ? 1 : 0);
  put<std::uint8_t>(out, ck.tokenizer.collapse_digits ? 1 : 0);
  put<std::uint64_t>(out, ck.vocab.size());
  for (std::size_t k = 0; k < ck.vocab.size(); ++k) {
    detail::put_string(out, ck.vocab.words()[k]);
    put<std::uint64_t>(out, ck.vocab.counts()[k]);
  }
  const auto tensors = ck.params.named_tensors();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    detail::put_string(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t->rank()));
    for (std::size_t d : t->shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t->values().data()),
              static_cast<std::streamsize>(t->size() * sizeof(double)));
  }
  if (!out) throw IoError("failed to write checkpoint");
}

inline Checkpoint read_checkpoint(std::istream& in) {
  using detail::get;
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw FormatError("not a pico checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto config_hash = get<std::uint64_t>(in);
  const auto vocab_hash = get<std::uint64_t>(in);
  Checkpoint ck;
  ck.embedding_hash = get<std::uint64_t>(in);
  ck.embedding_seed = get<std::uint64_t>(in);
  ModelConfig c;
  c.embedding_dim = get<std::uint64_t>(in);
  c.word_hidden = get<std::uint64_t>(in);
  c.sentence_hidden = get<std::uint64_t>(in);
  c.attention_dim = get<std::uint64_t>(in);
  c.num_labels = get<std::uint64_t>(in);
  c.contextualize = get<std::uint8_t>(in) != 0;
  ck.tokenizer.lowercase = get<std::uint8_t>(in) != 0;
  ck.tokenizer.collapse_digits = get<std::uint8_t>(in) != 0;
  if (c.hash() != config_hash) throw FormatError("checkpoint config hash does not match its config");

  const auto k = get<std::uint64_t>(in);
  std::vector<std::string> words;
  std::vector<std::size_t> counts;
  for (std::uint64_t i = 0; i < k; ++i) {
    words.push_back(detail::get_string(in));
    counts.push_back(get<std::uint64_t>(in));
  }
  ck.vocab = Vocab(std::move(words), std::move(counts));
  if (ck.vocab.hash() != vocab_hash) throw FormatError("checkpoint vocabulary hash mismatch");

  ck.params = ModelParams::zeros(c);
  auto tensors = ck.params.named_tensors();
  const auto n = get<std::uint32_t>(in);
  if (n != tensors.size()) throw FormatError("checkpoint tensor count mismatch");
  for (auto& [name, t] : tensors) {
    if (detail::get_string(in) != name) throw FormatError("checkpoint tensor order mismatch at " + name);
    const auto rank = get<std::uint32_t>(in);
    std::vector<std::size_t> shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(get<std::uint64_t>(in));
    if (shape != t->shape()) throw FormatError("checkpoint tensor " + name + " has the wrong shape");
    if (t->size() && !in.read(reinterpret_cast<char*>(t->values().data()),
                              static_cast<std::streamsize>(t->size() * sizeof(double)))) {
      throw FormatError("checkpoint is truncated");
    }
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace pico
