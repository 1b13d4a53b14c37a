// Run configuration: every knob a train, crossval or predict run depends on,
// read from and written to a plain-text key/value file.
//
//   # comment
//   [train]
//   learning_rate = 0.001
//   perturb.lambda_adv = 0     # dotted keys work with or without a section
//
// Unknown keys are errors. Overrides (`section.key=value`) are applied in
// order, so the last one wins.
#pragma once

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "pico/corpus.hpp"
#include "pico/error.hpp"
#include "pico/model.hpp"
#include "pico/trainer.hpp"

namespace pico {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path dataset;
  std::filesystem::path embeddings;
  std::filesystem::path output;
  std::size_t folds = 10;
  std::size_t min_count = 2;
  std::uint64_t embedding_seed = 0;
  TokenizerOptions tokenizer;

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    return serialize(a) == serialize(b);
  }

  static std::string serialize(const RunConfig& c);
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return d;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || *end != '\0' || errno == ERANGE) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return n;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline std::string format_double(double d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

struct ConfigField {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Member>
ConfigField field(std::string key, Member member) {
  using T = std::remove_cvref_t<decltype(member(std::declval<RunConfig&>()))>;
  ConfigField f{key, {}, {}};
  f.set = [key, member](RunConfig& c, const std::string& v) {
    auto& ref = member(c);
    if constexpr (std::is_same_v<T, double>) {
      ref = parse_double(key, v);
    } else if constexpr (std::is_same_v<T, bool>) {
      ref = parse_bool(key, v);
    } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
      ref = v;
    } else {
      ref = static_cast<T>(parse_count(key, v));
    }
  };
  f.get = [member](const RunConfig& c) -> std::string {
    const auto& ref = member(const_cast<RunConfig&>(c));
    if constexpr (std::is_same_v<T, double>) {
      return format_double(ref);
    } else if constexpr (std::is_same_v<T, bool>) {
      return ref ? "true" : "false";
    } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
      return ref.string();
    } else {
      return std::to_string(ref);
    }
  };
  return f;
}

#define PICO_FIELD(key, expr) field(key, [](RunConfig& c) -> auto& { return expr; })

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      PICO_FIELD("data.dataset", c.dataset),
      PICO_FIELD("data.embeddings", c.embeddings),
      PICO_FIELD("data.output", c.output),
      PICO_FIELD("data.folds", c.folds),
      PICO_FIELD("data.min_count", c.min_count),
      PICO_FIELD("data.embedding_seed", c.embedding_seed),
      PICO_FIELD("tokenizer.lowercase", c.tokenizer.lowercase),
      PICO_FIELD("tokenizer.collapse_digits", c.tokenizer.collapse_digits),
      PICO_FIELD("model.embedding_dim", c.model.embedding_dim),
      PICO_FIELD("model.word_hidden", c.model.word_hidden),
      PICO_FIELD("model.sentence_hidden", c.model.sentence_hidden),
      PICO_FIELD("model.attention_dim", c.model.attention_dim),
      PICO_FIELD("model.contextualize", c.model.contextualize),
      PICO_FIELD("train.learning_rate", c.train.learning_rate),
      PICO_FIELD("train.beta1", c.train.beta1),
      PICO_FIELD("train.beta2", c.train.beta2),
      PICO_FIELD("train.adam_epsilon", c.train.adam_epsilon),
      PICO_FIELD("train.l2_coefficient", c.train.l2_coefficient),
      PICO_FIELD("train.dropout_rate", c.train.dropout_rate),
      PICO_FIELD("train.batch_size", c.train.batch_size),
      PICO_FIELD("train.max_epochs", c.train.max_epochs),
      PICO_FIELD("train.patience", c.train.patience),
      PICO_FIELD("train.clip_norm", c.train.clip_norm),
      PICO_FIELD("train.seed", c.train.seed),
      PICO_FIELD("train.eval_train_loss", c.train.eval_train_loss),
      PICO_FIELD("perturb.epsilon_adv", c.train.perturb.epsilon_adv),
      PICO_FIELD("perturb.epsilon_vat", c.train.perturb.epsilon_vat),
      PICO_FIELD("perturb.xi", c.train.perturb.xi),
      PICO_FIELD("perturb.lambda_adv", c.train.perturb.lambda_adv),
      PICO_FIELD("perturb.lambda_vat", c.train.perturb.lambda_vat),
  };
  return fields;
}

#undef PICO_FIELD

inline const ConfigField& find_field(const std::string& key) {
  for (const auto& f : config_fields()) {
    if (f.key == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace detail

inline std::string RunConfig::serialize(const RunConfig& c) {
  std::string out, section;
  for (const auto& f : detail::config_fields()) {
    const auto dot = f.key.find('.');
    const std::string s = f.key.substr(0, dot);
    if (s != section) {
      if (!section.empty()) out += '\n';
      out += "[" + s + "]\n";
      section = s;
    }
    out += f.key.substr(dot + 1) + " = " + f.get(c) + "\n";
  }
  return out;
}

inline void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  detail::find_field(key).set(config, value);
}

inline std::string get_config_value(const RunConfig& config, const std::string& key) {
  return detail::find_field(key).get(config);
}

// Applies "key=value".
inline void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set_config_value(config, detail::trim(assignment.substr(0, eq)),
                   detail::trim(assignment.substr(eq + 1)));
}

// Relative paths are taken relative to `base`.
inline RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base = {}) {
  RunConfig config;
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto where = "config line " + std::to_string(line_no) + ": ";
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) throw ConfigError(where + "malformed section header");
      section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    std::string key = detail::trim(std::string_view(t).substr(0, eq));
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    try {
      set_config_value(config, key, detail::trim(std::string_view(t).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  for (auto* p : {&config.dataset, &config.embeddings, &config.output}) {
    if (!p->empty() && p->is_relative() && !base.empty()) *p = base / *p;
  }
  return config;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  return parse_run_config(in, path.parent_path());
}

inline void save_run_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << RunConfig::serialize(config);
  if (!out) throw IoError("failed writing " + path.string());
}

inline void validate_run_config(const RunConfig& c) {
  c.train.validate();
  if (c.model.embedding_dim == 0 || c.model.word_hidden == 0 || c.model.sentence_hidden == 0) {
    throw ConfigError("model sizes must be >= 1");
  }
  if (c.folds < 3) throw ConfigError("data.folds must be >= 3");
}

}  // namespace pico
