#ifndef LESIONATTR_SYNTH_H_
#define LESIONATTR_SYNTH_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lesionattr/corpus.h"

namespace lesionattr {

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One position of a clause template. Exactly one of `text` and `slot` is set.
// Slots: SIZE, TYPE, BODYPART, BODYPART_ADJ, SHAPE, INTENSITY, BOOKMARK and
// CUE:<group>. `head` indexes the clause's tokens; -1 marks the clause root.
struct TemplateToken {
  std::string text;
  std::string slot;
  std::string pos;
  std::string chunk;
  int head = -1;
  std::string label;  // attribute slots: "", "uncertain" or "irrelevant"
  bool optional = false;
  bool plural = false;
};

enum class ClauseFamily {
  kPlain,        // attributes attach to the clause's bookmarks
  kHedged,       // the whole clause is hedged; attached attributes are Uncertain
  kRegion,       // one attribute is marked uncertain by its slot label
  kCue,          // one attribute is negated or displaced by its slot label
  kUnbookmarked  // no bookmark; every attribute is Irrelevant
};

struct ClauseTemplate {
  std::string name;
  ClauseFamily family = ClauseFamily::kPlain;
  bool hard = false;  // hedge cue placed outside the attribute's immediate window
  bool prefix = false;
  std::vector<TemplateToken> tokens;

  std::size_t bookmark_slots() const;
  std::size_t attribute_slots() const;
};

struct TemplateWord {
  std::string text;
  std::string pos;
};

struct TemplateInventory {
  std::map<std::string, std::vector<std::string>> cues;
  std::vector<TemplateWord> prefixes;
  std::vector<std::vector<TemplateWord>> connectors;
  TemplateWord terminator{".", "."};
  std::vector<ClauseTemplate> clauses;
};

TemplateInventory parse_templates(std::string_view json_text,
                                  const std::string& source_name = "<templates>");
TemplateInventory load_templates(const std::filesystem::path& path);

// Target class proportions over generated pairs.
struct ClassMix {
  double relevant = 7356.0 / 9297.0;
  double uncertain = 477.0 / 9297.0;
  double irrelevant = 1464.0 / 9297.0;

  std::array<double, kNumLabels> values() const { return {relevant, uncertain, irrelevant}; }
};

struct SynthConfig {
  std::size_t n_sentences = 2000;
  std::uint64_t seed = 7;
  ClassMix mix;
  double hard_fraction = 0.1;  // share of hedged clauses realized with a distant cue
  TemplateInventory templates;
  Vocabulary vocabulary;
  std::string id_prefix = "synth";
};

void validate_synth_config(const SynthConfig& config);

// Template-built sentences with full annotations and gold pairs. Each sentence
// has 1-3 target bookmarks and 1-5 mentions, and the mentions coincide with
// what match_attributes finds under the same vocabulary. The per-sentence
// template choice is steered toward the requested class mix.
std::vector<Sentence> generate_corpus(const SynthConfig& config);

struct SplitStats {
  std::size_t sentences = 0;
  std::array<std::size_t, kNumLabels> instances{};

  std::size_t total_instances() const;
  bool operator==(const SplitStats&) const = default;
};

struct CorpusStats {
  std::vector<std::pair<std::string, SplitStats>> splits;

  SplitStats total() const;
};

// Counts gold-labeled candidate pairs per class.
SplitStats count_split(const std::vector<Sentence>& sentences);
CorpusStats corpus_stats(const std::vector<std::pair<std::string, std::vector<Sentence>>>& splits);

// Sentences row, then one indented row per class, one column per split.
std::string format_corpus_stats(const CorpusStats& stats);

}  // namespace lesionattr

#endif  // LESIONATTR_SYNTH_H_
