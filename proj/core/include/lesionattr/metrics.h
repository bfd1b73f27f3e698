#ifndef LESIONATTR_METRICS_H_
#define LESIONATTR_METRICS_H_

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lesionattr/corpus.h"

namespace lesionattr {

// confusion[gold][predicted], indexed by label_index().
using Confusion = std::array<std::array<std::size_t, kNumLabels>, kNumLabels>;

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold count
};

struct MacroScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Metrics {
  Confusion confusion{};
  std::array<ClassScores, kNumLabels> per_class{};
  MacroScores macro;
  std::size_t total = 0;
};

// Unweighted mean over the three classes of each score.
MacroScores macro_average(const std::array<ClassScores, kNumLabels>& per_class);

// Per-class P = TP/(TP+FP), R = TP/(TP+FN), F = 2PR/(P+R), each 0 when its
// denominator is 0, plus the macro averages.
Metrics compute_prf(const Confusion& confusion);

Confusion build_confusion(std::span<const Label> gold, std::span<const Label> predicted);
// Uses pair.gold and pair.predicted; both must be set.
Confusion build_confusion(std::span<const CandidatePair> pairs);

std::string metrics_to_json(const Metrics& metrics, int indent = 2);

// Aligned text table, one row per named system, columns P/R/F per class then
// the macro group.
std::string format_metrics_table(const std::vector<std::pair<std::string, Metrics>>& rows);

struct ErrorReport {
  std::size_t wrong_bookmark = 0;    // Relevant <-> Irrelevant confusions
  std::size_t missed_uncertain = 0;  // gold Uncertain predicted otherwise
  std::size_t other = 0;
  std::size_t total_errors = 0;

  double percent(std::size_t count) const {
    return total_errors == 0 ? 0.0 : 100.0 * static_cast<double>(count) / total_errors;
  }
};

// Pairs are matched by (sentence id, bookmark, mention); gold labels come from
// `gold`, predictions from `predicted`.
ErrorReport error_report(std::span<const CandidatePair> gold,
                         std::span<const CandidatePair> predicted);
std::string format_error_report(const ErrorReport& report);

}  // namespace lesionattr

#endif  // LESIONATTR_METRICS_H_
