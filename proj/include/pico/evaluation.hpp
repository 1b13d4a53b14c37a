// Sentence-level precision / recall / F1 and the P/I/O report table.
#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pico/corpus.hpp"
#include "pico/error.hpp"

namespace pico {

struct LabelCounts {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;

  friend bool operator==(const LabelCounts&, const LabelCounts&) = default;
};

struct ConfusionCounts {
  std::array<LabelCounts, kNumLabels> labels{};
  std::size_t sentences = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    for (std::size_t l = 0; l < kNumLabels; ++l) {
      labels[l].true_positives += o.labels[l].true_positives;
      labels[l].false_positives += o.labels[l].false_positives;
      labels[l].false_negatives += o.labels[l].false_negatives;
    }
    sentences += o.sentences;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline void tally(ConfusionCounts& counts, std::size_t gold, std::size_t predicted) {
  if (gold >= kNumLabels || predicted >= kNumLabels) throw ValidationError("label out of range");
  ++counts.sentences;
  if (gold == predicted) {
    ++counts.labels[gold].true_positives;
  } else {
    ++counts.labels[predicted].false_positives;
    ++counts.labels[gold].false_negatives;
  }
}

inline ConfusionCounts score_predictions(const std::vector<Abstract>& gold,
                                         const std::vector<std::vector<std::size_t>>& predicted) {
  if (gold.size() != predicted.size()) {
    throw ValidationError("got predictions for " + std::to_string(predicted.size()) +
                          " abstracts, expected " + std::to_string(gold.size()));
  }
  ConfusionCounts counts;
  for (std::size_t a = 0; a < gold.size(); ++a) {
    const auto labels = gold[a].label_indices();
    if (labels.size() != predicted[a].size()) {
      throw ValidationError("abstract " + gold[a].id + ": predicted " +
                            std::to_string(predicted[a].size()) + " labels for " +
                            std::to_string(labels.size()) + " sentences");
    }
    for (std::size_t s = 0; s < labels.size(); ++s) tally(counts, labels[s], predicted[a][s]);
  }
  return counts;
}

// Percentages in [0, 100]; a zero denominator yields 0.
struct LabelMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const LabelMetrics&, const LabelMetrics&) = default;
};

inline double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

inline LabelMetrics metrics_from_counts(const LabelCounts& c) {
  LabelMetrics m;
  const double tp = static_cast<double>(c.true_positives);
  const std::size_t pred = c.true_positives + c.false_positives;
  const std::size_t gold = c.true_positives + c.false_negatives;
  m.precision = pred ? 100.0 * tp / static_cast<double>(pred) : 0.0;
  m.recall = gold ? 100.0 * tp / static_cast<double>(gold) : 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

struct MetricsReport {
  std::string name;  // "fold-3", "mean", "pooled", ...
  std::array<LabelMetrics, kNumLabels> labels{};
  ConfusionCounts counts;

  const LabelMetrics& operator[](Label l) const { return labels[label_index(l)]; }
  LabelMetrics& operator[](Label l) { return labels[label_index(l)]; }

  // Mean F1 over the P, I and O labels.
  double pico_f1() const {
    double s = 0.0;
    for (Label l : kPicoLabels) s += (*this)[l].f1;
    return s / static_cast<double>(kPicoLabels.size());
  }

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline MetricsReport make_report(std::string name, const ConfusionCounts& counts) {
  MetricsReport r;
  r.name = std::move(name);
  r.counts = counts;
  for (std::size_t l = 0; l < kNumLabels; ++l) r.labels[l] = metrics_from_counts(counts.labels[l]);
  return r;
}

// Unweighted mean of per-fold metrics; counts are summed.
inline MetricsReport mean_report(const std::vector<MetricsReport>& folds, std::string name = "mean") {
  if (folds.empty()) throw ValidationError("mean over zero reports");
  MetricsReport r;
  r.name = std::move(name);
  for (const auto& f : folds) {
    r.counts += f.counts;
    for (std::size_t l = 0; l < kNumLabels; ++l) {
      r.labels[l].precision += f.labels[l].precision;
      r.labels[l].recall += f.labels[l].recall;
      r.labels[l].f1 += f.labels[l].f1;
    }
  }
  const double n = static_cast<double>(folds.size());
  for (auto& m : r.labels) {
    m.precision /= n;
    m.recall /= n;
    m.f1 /= n;
  }
  return r;
}

inline MetricsReport pooled_report(const std::vector<MetricsReport>& folds) {
  ConfusionCounts total;
  for (const auto& f : folds) total += f.counts;
  return make_report("pooled", total);
}

inline std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

// Fixed-width P/I/O table, one row per report.
inline std::string render_report(const std::vector<MetricsReport>& rows) {
  std::size_t name_width = 6;
  for (const auto& r : rows) name_width = std::max(name_width, r.name.size());
  auto pad = [](std::string s, std::size_t w, bool left) {
    if (s.size() < w) s = left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
    return s;
  };
  std::ostringstream out;
  out << pad("", name_width, true) << " |" << pad("P-element (%)", 20, false) << " |"
      << pad("I-element (%)", 20, false) << " |" << pad("O-element (%)", 20, false) << '\n';
  out << pad("Model", name_width, true);
  for (int e = 0; e < 3; ++e) out << " |" << pad("p", 6, false) << pad("r", 7, false) << pad("F1", 7, false);
  out << '\n';
  out << std::string(name_width + 3 * 22, '-') << '\n';
  for (const auto& r : rows) {
    out << pad(r.name, name_width, true);
    for (Label l : kPicoLabels) {
      out << " |" << pad(format_percent(r[l].precision), 6, false)
          << pad(format_percent(r[l].recall), 7, false) << pad(format_percent(r[l].f1), 7, false);
    }
    out << '\n';
  }
  return out.str();
}

// Machine-readable export: one JSON object per (report, label) line with
// full-precision metrics and raw counts.
inline std::string export_metrics(const std::vector<MetricsReport>& rows) {
  std::string out;
  for (const auto& r : rows) {
    for (std::size_t l = 0; l < kNumLabels; ++l) {
      nlohmann::ordered_json j;
      j["report"] = r.name;
      j["label"] = std::string(1, kLabelChars[l]);
      j["precision"] = r.labels[l].precision;
      j["recall"] = r.labels[l].recall;
      j["f1"] = r.labels[l].f1;
      j["tp"] = r.counts.labels[l].true_positives;
      j["fp"] = r.counts.labels[l].false_positives;
      j["fn"] = r.counts.labels[l].false_negatives;
      j["sentences"] = r.counts.sentences;
      out += j.dump() + '\n';
    }
  }
  return out;
}

inline std::vector<MetricsReport> parse_metrics(std::istream& in) {
  std::vector<MetricsReport> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const std::string name = j.at("report").get<std::string>();
      const std::string label = j.at("label").get<std::string>();
      const auto parsed = label.size() == 1 ? parse_label(label[0]) : std::nullopt;
      if (!parsed) throw ParseError("line " + std::to_string(line_no) + ": bad label");
      if (rows.empty() || rows.back().name != name) {
        rows.emplace_back();
        rows.back().name = name;
      }
      auto& r = rows.back();
      const std::size_t l = label_index(*parsed);
      r.labels[l] = {j.at("precision").get<double>(), j.at("recall").get<double>(),
                     j.at("f1").get<double>()};
      r.counts.labels[l] = {j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(),
                            j.at("fn").get<std::size_t>()};
      r.counts.sentences = j.at("sentences").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("metrics line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

inline std::vector<MetricsReport> parse_metrics(const std::string& text) {
  std::istringstream in(text);
  return parse_metrics(in);
}

}  // namespace pico
