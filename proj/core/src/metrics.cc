#include "lesionattr/metrics.h"

#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace lesionattr {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MacroScores macro_average(const std::array<ClassScores, kNumLabels>& per_class) {
  MacroScores m;
  for (const ClassScores& c : per_class) {
    m.precision += c.precision;
    m.recall += c.recall;
    m.f1 += c.f1;
  }
  const double n = static_cast<double>(kNumLabels);
  m.precision /= n;
  m.recall /= n;
  m.f1 /= n;
  return m;
}

Metrics compute_prf(const Confusion& confusion) {
  Metrics out;
  out.confusion = confusion;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    std::size_t tp = confusion[c][c], predicted = 0, gold = 0;
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      predicted += confusion[k][c];
      gold += confusion[c][k];
    }
    ClassScores& s = out.per_class[c];
    s.support = gold;
    s.precision = ratio(tp, predicted);
    s.recall = ratio(tp, gold);
    s.f1 = s.precision + s.recall == 0.0
               ? 0.0
               : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    out.total += gold;
  }
  out.macro = macro_average(out.per_class);
  return out;
}

Confusion build_confusion(std::span<const Label> gold, std::span<const Label> predicted) {
  if (gold.size() != predicted.size()) {
    throw std::invalid_argument("gold and predicted label counts differ");
  }
  Confusion c{};
  for (std::size_t i = 0; i < gold.size(); ++i) ++c[label_index(gold[i])][label_index(predicted[i])];
  return c;
}

Confusion build_confusion(std::span<const CandidatePair> pairs) {
  Confusion c{};
  for (const CandidatePair& p : pairs) {
    if (!p.gold || !p.predicted) {
      throw std::invalid_argument("pair in sentence '" + p.sentence_id +
                                  "' lacks a gold or predicted label");
    }
    ++c[label_index(*p.gold)][label_index(*p.predicted)];
  }
  return c;
}

std::string metrics_to_json(const Metrics& metrics, int indent) {
  nlohmann::json j;
  j["total"] = metrics.total;
  nlohmann::json confusion = nlohmann::json::array();
  for (const auto& row : metrics.confusion) confusion.push_back(row);
  j["confusion"] = confusion;
  for (Label label : kAllLabels) {
    const ClassScores& s = metrics.per_class[label_index(label)];
    j["per_class"][std::string(label_name(label))] = {
        {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
  }
  j["macro"] = {{"precision", metrics.macro.precision},
                {"recall", metrics.macro.recall},
                {"f1", metrics.macro.f1}};
  return j.dump(indent);
}

std::string format_metrics_table(const std::vector<std::pair<std::string, Metrics>>& rows) {
  std::size_t name_width = 6;
  for (const auto& [name, m] : rows) name_width = std::max(name_width, name.size());
  std::ostringstream os;
  char buf[64];
  auto pad = [&](const std::string& s, std::size_t w) {
    os << s << std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  pad("", name_width);
  for (const char* group : {"Relevant", "Uncertain", "Irrelevant", "Macro"}) {
    std::snprintf(buf, sizeof buf, " | %-20s", group);
    os << buf;
  }
  os << '\n';
  pad("", name_width);
  for (int g = 0; g < 4; ++g) os << " |      P      R      F";
  os << '\n';
  os << std::string(name_width + 4 * 23, '-') << '\n';
  for (const auto& [name, m] : rows) {
    pad(name, name_width);
    for (const ClassScores& s : m.per_class) {
      std::snprintf(buf, sizeof buf, " | %6.3f %6.3f %6.3f", s.precision, s.recall, s.f1);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, " | %6.3f %6.3f %6.3f", m.macro.precision, m.macro.recall,
                  m.macro.f1);
    os << buf << '\n';
  }
  return os.str();
}

ErrorReport error_report(std::span<const CandidatePair> gold,
                         std::span<const CandidatePair> predicted) {
  using Key = std::tuple<std::string, std::size_t, std::size_t>;
  std::map<Key, Label> predictions;
  for (const CandidatePair& p : predicted) {
    if (!p.predicted) {
      throw std::invalid_argument("prediction for sentence '" + p.sentence_id + "' has no label");
    }
    predictions[{p.sentence_id, p.bookmark_index, p.mention_index}] = *p.predicted;
  }
  ErrorReport report;
  for (const CandidatePair& g : gold) {
    if (!g.gold) continue;
    auto it = predictions.find({g.sentence_id, g.bookmark_index, g.mention_index});
    if (it == predictions.end()) {
      throw std::invalid_argument("no prediction for a pair of sentence '" + g.sentence_id + "'");
    }
    const Label truth = *g.gold;
    const Label guess = it->second;
    if (truth == guess) continue;
    ++report.total_errors;
    const bool swap = (truth == Label::kRelevant && guess == Label::kIrrelevant) ||
                      (truth == Label::kIrrelevant && guess == Label::kRelevant);
    if (swap) {
      ++report.wrong_bookmark;
    } else if (truth == Label::kUncertain) {
      ++report.missed_uncertain;
    } else {
      ++report.other;
    }
  }
  return report;
}

std::string format_error_report(const ErrorReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "errors            %6zu\n"
                "wrong bookmark    %6zu  %5.1f%%\n"
                "missed uncertain  %6zu  %5.1f%%\n"
                "other             %6zu  %5.1f%%\n",
                r.total_errors, r.wrong_bookmark, r.percent(r.wrong_bookmark), r.missed_uncertain,
                r.percent(r.missed_uncertain), r.other, r.percent(r.other));
  return buf;
}

}  // namespace lesionattr
