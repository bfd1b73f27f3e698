#include "lesionattr/rules.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace lesionattr {

std::vector<std::string> cue_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(to_lower(current));
    current.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == '/') {
      flush();
      out.emplace_back("/");
    } else {
      current += c;
    }
  }
  flush();
  return out;
}

RuleSet parse_rules(std::istream& in, const std::string& source_name) {
  RuleSet set;
  std::map<std::vector<std::string>, Label> seen;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw CorpusError(source_name + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail("expected 'label<TAB>cue | cue ...'");
    const auto label = parse_label(line.substr(0, tab));
    if (!label || *label == Label::kRelevant) fail("rule label must be Irrelevant or Uncertain");

    Rule rule;
    rule.label = *label;
    rule.line = line_no;
    std::string rest = line.substr(tab + 1);
    std::size_t pos = 0;
    while (true) {
      // " | " separates alternatives; a bare "/" is a cue, not a separator.
      const auto bar = rest.find('|', pos);
      std::vector<std::string> alt = cue_tokens(rest.substr(pos, bar - pos));
      if (alt.empty()) fail("empty cue alternative");
      auto [it, inserted] = seen.emplace(alt, rule.label);
      if (!inserted && it->second != rule.label) fail("cue listed with conflicting labels");
      rule.alternatives.push_back(std::move(alt));
      if (bar == std::string::npos) break;
      pos = bar + 1;
    }
    set.rules.push_back(std::move(rule));
  }
  return set;
}

RuleSet compile_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open rule file " + path.string());
  return parse_rules(in, path.string());
}

std::optional<Label> apply_rules(std::span<const Token> tokens, const Span& mention,
                                 const RuleSet& rules) {
  if (mention.empty() || mention.end > tokens.size()) {
    throw std::out_of_range("apply_rules: mention span outside the sentence");
  }
  // Cue tokens preceding the mention, nearest last.
  std::vector<std::string> before;
  for (std::size_t i = 0; i < mention.start; ++i) {
    for (std::string& t : cue_tokens(tokens[i].surface)) before.push_back(std::move(t));
  }
  for (const Rule& rule : rules.rules) {
    for (const auto& alt : rule.alternatives) {
      if (alt.size() > before.size()) continue;
      if (std::equal(alt.begin(), alt.end(), before.end() - static_cast<long>(alt.size()))) {
        return rule.label;
      }
    }
  }
  return std::nullopt;
}

Label rule_classify(const Sentence& sentence, const CandidatePair& pair, const RuleSet& rules) {
  if (pair.mention_index >= sentence.mentions.size()) {
    throw CorpusError("sentence '" + sentence.id + "': pair references a missing mention");
  }
  return apply_rules(sentence.tokens, sentence.mentions[pair.mention_index].span, rules)
      .value_or(Label::kRelevant);
}

Label postprocess(Label model_label, std::optional<Label> rule_label) {
  return rule_label.value_or(model_label);
}

}  // namespace lesionattr
