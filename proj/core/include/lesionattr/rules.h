#ifndef LESIONATTR_RULES_H_
#define LESIONATTR_RULES_H_

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lesionattr/corpus.h"

namespace lesionattr {

// One cue group: any of its alternatives immediately preceding an attribute
// mention assigns `label`.
struct Rule {
  Label label = Label::kIrrelevant;
  std::vector<std::vector<std::string>> alternatives;
  std::size_t line = 0;
};

// Rules in file order; the first rule with a matching cue wins.
struct RuleSet {
  std::vector<Rule> rules;

  std::size_t size() const { return rules.size(); }
  bool empty() const { return rules.empty(); }
};

// Rule file: `label<TAB>alternative | alternative | ...` per line, where label
// is Irrelevant or Uncertain. Blank lines and `#` comments are ignored.
RuleSet compile_rules(const std::filesystem::path& path);
RuleSet parse_rules(std::istream& in, const std::string& source_name = "<rules>");

// Lowercases and splits on whitespace, with "/" always its own token.
std::vector<std::string> cue_tokens(std::string_view text);

// Label of the first rule whose cue exactly matches the tokens right before
// `mention`, or nullopt. Bookmark positions play no part.
std::optional<Label> apply_rules(std::span<const Token> tokens, const Span& mention,
                                 const RuleSet& rules);

// apply_rules with Relevant as the default class.
Label rule_classify(const Sentence& sentence, const CandidatePair& pair, const RuleSet& rules);

// A fired rule overrides the model's label.
Label postprocess(Label model_label, std::optional<Label> rule_label);

}  // namespace lesionattr

#endif  // LESIONATTR_RULES_H_
