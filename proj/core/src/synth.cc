#include "lesionattr/synth.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lesionattr/random.h"

namespace lesionattr {
namespace {

using nlohmann::json;

constexpr std::string_view kCuePrefix = "CUE:";
constexpr std::size_t kCandidatesPerSentence = 6;
constexpr std::size_t kMaxAttempts = 200;
constexpr double kOptionalDropRate = 0.35;
constexpr double kPluralRate = 0.15;

bool is_cue_slot(const std::string& slot) { return slot.starts_with(kCuePrefix); }

std::optional<Category> slot_category(const std::string& slot) {
  if (slot == "BODYPART_ADJ") return Category::kBodyPart;
  return parse_category(slot);
}

// Body-part phrases that read as modifiers ("mediastinal") rather than nouns.
bool adjectival(const std::string& phrase) {
  for (std::string_view suffix : {"al", "ar", "ic", "ary", "ous"}) {
    if (phrase.ends_with(suffix)) return true;
  }
  return false;
}

std::optional<ClauseFamily> parse_family(const std::string& text) {
  if (text == "plain") return ClauseFamily::kPlain;
  if (text == "hedged") return ClauseFamily::kHedged;
  if (text == "region") return ClauseFamily::kRegion;
  if (text == "cue") return ClauseFamily::kCue;
  if (text == "unbookmarked") return ClauseFamily::kUnbookmarked;
  return std::nullopt;
}

TemplateWord parse_word(const json& j) {
  return {j.at("text").get<std::string>(), j.value("pos", std::string("NN"))};
}

void check_clause(const ClauseTemplate& clause, const TemplateInventory& inv,
                  const std::string& where) {
  const int n = static_cast<int>(clause.tokens.size());
  if (n == 0) throw SynthError(where + ": empty clause");
  std::size_t roots = 0;
  for (int i = 0; i < n; ++i) {
    const TemplateToken& t = clause.tokens[i];
    if (t.text.empty() == t.slot.empty()) {
      throw SynthError(where + ": token " + std::to_string(i) + " needs exactly one of text/slot");
    }
    if (t.head == -1) {
      ++roots;
    } else if (t.head < 0 || t.head >= n || t.head == i) {
      throw SynthError(where + ": token " + std::to_string(i) + " has an invalid head");
    }
    if (!t.slot.empty() && t.slot != "BOOKMARK") {
      if (is_cue_slot(t.slot)) {
        const std::string group = t.slot.substr(kCuePrefix.size());
        auto it = inv.cues.find(group);
        if (it == inv.cues.end() || it->second.empty()) {
          throw SynthError(where + ": unknown cue group '" + group + "'");
        }
      } else if (!slot_category(t.slot)) {
        throw SynthError(where + ": unknown slot '" + t.slot + "'");
      }
    }
    if (!t.label.empty() && t.label != "uncertain" && t.label != "irrelevant") {
      throw SynthError(where + ": unknown label '" + t.label + "'");
    }
  }
  if (roots != 1) throw SynthError(where + ": clause must have exactly one root");
  for (int i = 0; i < n; ++i) {
    if (!clause.tokens[i].optional) continue;
    for (const TemplateToken& t : clause.tokens) {
      if (t.head == i) throw SynthError(where + ": optional token " + std::to_string(i) + " has dependents");
    }
  }
  // Heads must form a tree rooted at the clause root.
  for (int i = 0; i < n; ++i) {
    int cur = i;
    for (int steps = 0; cur != -1; ++steps) {
      if (steps > n) throw SynthError(where + ": head cycle at token " + std::to_string(i));
      cur = clause.tokens[cur].head;
    }
  }
  if ((clause.family == ClauseFamily::kUnbookmarked) != (clause.bookmark_slots() == 0)) {
    throw SynthError(where + ": only unbookmarked clauses may lack a bookmark");
  }
  if (clause.attribute_slots() == 0) throw SynthError(where + ": clause has no attribute slot");
}

// --- sentence assembly -------------------------------------------------------

enum class Role { kAttached, kUncertain, kIrrelevant };

struct PlannedMention {
  AttributeMention mention;
  Role role = Role::kAttached;
  std::size_t clause = 0;
};

struct Builder {
  const SynthConfig& config;
  const std::map<Category, std::vector<std::string>>& fills;
  const std::map<std::string, std::string>& plurals;
  Rng& rng;

  std::vector<Token> tokens;
  std::vector<std::optional<long>> heads;  // -2 = sentence root placeholder
  std::vector<Bookmark> bookmarks;
  std::vector<std::size_t> bookmark_clause;
  std::vector<PlannedMention> mentions;

  std::size_t push(std::string surface, std::string pos, std::string chunk, NeTag ne) {
    Token t;
    t.lemma = lemmatize(surface, config.vocabulary.lemma_table());
    t.surface = std::move(surface);
    t.pos = std::move(pos);
    t.chunk = std::move(chunk);
    t.ne = ne;
    t.index = tokens.size();
    tokens.push_back(std::move(t));
    heads.emplace_back();
    return tokens.size() - 1;
  }

  static std::string inside_chunk(const std::string& chunk) {
    if (chunk.size() > 2 && (chunk[0] == 'B' || chunk[0] == 'I') && chunk[1] == '-') {
      return "I-" + chunk.substr(2);
    }
    return chunk;
  }

  static std::string cue_word_pos(const std::string& word, const std::string& fallback) {
    static const std::map<std::string, std::string> kPos = {
        {"of", "IN"},        {"to", "TO"},       {"from", "IN"},    {"near", "IN"},
        {"above", "IN"},     {"beneath", "IN"},  {"without", "IN"}, {"no", "DT"},
        {"evidence", "NN"},  {"/", "SYM"},       {"and", "CC"},     {"or", "CC"},
        {"not", "RB"},       {"poorly", "RB"},   {"likely", "RB"},  {"possibly", "RB"},
        {"previously", "RB"}, {"seen", "VBN"},   {"developing", "VBG"},
        {"abdominal", "JJ"}, {"this", "DT"},     {"dome", "NN"},    {"portion", "NN"},
        {"tail", "NN"},      {"left", "JJ"},     {"right", "JJ"},   {"close", "RB"}};
    auto it = kPos.find(word);
    return it == kPos.end() ? fallback : it->second;
  }

  static std::vector<std::string> words(const std::string& phrase) {
    std::istringstream in(phrase);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
  }

  // Returns [first, last] token indices of the realized unit. Units that are
  // cue phrases attach every word to the unit's head; other multi-word units
  // are head-final.
  struct Unit {
    std::size_t first = 0;
    std::size_t last = 0;
    bool cue = false;
  };

  std::vector<std::string> fill_choices(const std::string& slot) const {
    const Category category = *slot_category(slot);
    const std::vector<std::string>& all = fills.at(category);
    if (category != Category::kBodyPart) return all;
    std::vector<std::string> out;
    const bool want_adj = slot == "BODYPART_ADJ";
    for (const std::string& p : all) {
      if (adjectival(p) == want_adj) out.push_back(p);
    }
    return out;
  }

  Unit realize(const TemplateToken& t, std::size_t clause, Role role) {
    Unit unit;
    unit.first = tokens.size();
    if (!t.text.empty()) {
      push(t.text, t.pos, t.chunk, NeTag::kNone);
    } else if (t.slot == "BOOKMARK") {
      push("BOOKMARK", t.pos, t.chunk, NeTag::kNone);
      bookmarks.push_back({{unit.first, unit.first + 1}, BookmarkRole::kTargetCandidate});
      bookmark_clause.push_back(clause);
    } else if (is_cue_slot(t.slot)) {
      const auto& options = config.templates.cues.at(t.slot.substr(kCuePrefix.size()));
      const std::vector<std::string> ws = words(options[rng.below(options.size())]);
      for (std::size_t k = 0; k < ws.size(); ++k) {
        push(ws[k], cue_word_pos(ws[k], t.pos), k == 0 ? t.chunk : inside_chunk(t.chunk),
             NeTag::kNone);
      }
      unit.cue = true;
    } else {
      const Category category = *slot_category(t.slot);
      const std::vector<std::string> choices = fill_choices(t.slot);
      if (choices.empty()) throw SynthError("no vocabulary phrases for slot " + t.slot);
      const std::string phrase = choices[rng.below(choices.size())];
      std::vector<std::string> ws = words(phrase);
      std::string last_pos = t.pos;
      if (category == Category::kType) {
        auto it = plurals.find(ws.back());
        const bool plural = t.plural || rng.bernoulli(kPluralRate);
        if (it != plurals.end() && plural) {
          ws.back() = it->second;
          last_pos = "NNS";
        } else if (last_pos == "NNS") {
          last_pos = "NN";
        }
      }
      const NeTag ne = ne_for_category(category);
      for (std::size_t k = 0; k < ws.size(); ++k) {
        const bool last = k + 1 == ws.size();
        const std::string pos = last ? last_pos : (category == Category::kType ? "NN" : "JJ");
        push(ws[k], pos, k == 0 ? t.chunk : inside_chunk(t.chunk), ne);
      }
      PlannedMention m;
      m.mention.span = {unit.first, tokens.size()};
      m.mention.normalized = phrase;
      m.mention.category = category;
      m.role = role;
      m.clause = clause;
      mentions.push_back(std::move(m));
    }
    unit.last = tokens.size() - 1;
    return unit;
  }

  // Realizes a clause and returns the token index of its root.
  std::size_t add_clause(const ClauseTemplate& clause, std::size_t clause_index, bool with_prefix) {
    std::optional<std::size_t> prefix_token;
    if (with_prefix && !config.templates.prefixes.empty()) {
      const TemplateWord& w = config.templates.prefixes[rng.below(config.templates.prefixes.size())];
      prefix_token = push(w.text, w.pos, "B-NP", NeTag::kNone);
    }
    const std::size_t n = clause.tokens.size();
    std::vector<std::optional<Unit>> units(n);
    for (std::size_t i = 0; i < n; ++i) {
      const TemplateToken& t = clause.tokens[i];
      if (t.optional && rng.bernoulli(kOptionalDropRate)) continue;
      Role role = Role::kAttached;
      if (t.label == "uncertain") role = Role::kUncertain;
      if (t.label == "irrelevant") role = Role::kIrrelevant;
      if (role == Role::kAttached && clause.family == ClauseFamily::kHedged) role = Role::kUncertain;
      if (role == Role::kAttached && clause.family == ClauseFamily::kUnbookmarked) {
        role = Role::kIrrelevant;
      }
      units[i] = realize(t, clause_index, role);
    }
    std::size_t root = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!units[i]) continue;
      const Unit& u = *units[i];
      const int h = clause.tokens[i].head;
      const std::optional<long> target =
          h < 0 ? std::optional<long>(-2) : std::optional<long>(static_cast<long>(units[h]->last));
      if (h < 0) root = u.last;
      for (std::size_t k = u.first; k <= u.last; ++k) {
        heads[k] = (u.cue || k == u.last) ? target : std::optional<long>(static_cast<long>(u.last));
      }
    }
    if (prefix_token) heads[*prefix_token] = static_cast<long>(root);
    return root;
  }
};

struct Candidate {
  Sentence sentence;
  std::array<std::size_t, kNumLabels> counts{};
};

Label pair_label(const PlannedMention& m, std::size_t bookmark_clause) {
  switch (m.role) {
    case Role::kUncertain:
      return Label::kUncertain;
    case Role::kIrrelevant:
      return Label::kIrrelevant;
    case Role::kAttached:
      break;
  }
  return m.clause == bookmark_clause ? Label::kRelevant : Label::kIrrelevant;
}

struct Planner {
  const SynthConfig& config;
  std::array<bool, kNumLabels> allowed{};
  std::vector<std::size_t> plain, shared, hedged_easy, hedged_hard, region, cue, unbookmarked;

  explicit Planner(const SynthConfig& c) : config(c) {
    const auto mix = c.mix.values();
    for (std::size_t k = 0; k < kNumLabels; ++k) allowed[k] = mix[k] > 0.0;
    const auto& clauses = c.templates.clauses;
    for (std::size_t i = 0; i < clauses.size(); ++i) {
      const ClauseTemplate& t = clauses[i];
      switch (t.family) {
        case ClauseFamily::kPlain:
          (t.bookmark_slots() > 1 ? shared : plain).push_back(i);
          break;
        case ClauseFamily::kHedged:
          (t.hard ? hedged_hard : hedged_easy).push_back(i);
          break;
        case ClauseFamily::kRegion:
          region.push_back(i);
          break;
        case ClauseFamily::kCue:
          cue.push_back(i);
          break;
        case ClauseFamily::kUnbookmarked:
          unbookmarked.push_back(i);
          break;
      }
    }
    const bool rel = allowed[0], unc = allowed[1], irr = allowed[2];
    const bool any_hedged = !hedged_easy.empty() || !hedged_hard.empty();
    if (unc && !any_hedged && region.empty()) {
      throw SynthError("infeasible class mix: Uncertain requested but no uncertainty templates");
    }
    if (rel && plain.empty() && shared.empty()) {
      throw SynthError("infeasible class mix: Relevant requested but no plain templates");
    }
    if (irr && cue.empty() && unbookmarked.empty() && plain.empty()) {
      throw SynthError("infeasible class mix: Irrelevant requested but no irrelevant templates");
    }
    if (!rel && (!unc || !any_hedged)) {
      throw SynthError(
          "infeasible class mix: every bookmark clause yields a Relevant pair unless it is hedged");
    }
  }

  static std::size_t pick(const std::vector<std::size_t>& v, Rng& rng) {
    return v[rng.below(v.size())];
  }

  std::size_t pick_bookmark_clause(Rng& rng, std::size_t bookmarks_left) const {
    const bool rel = allowed[0], unc = allowed[1], irr = allowed[2];
    std::vector<std::pair<double, int>> weights;
    if (rel && !plain.empty()) weights.push_back({0.62, 0});
    if (rel && irr && !shared.empty() && bookmarks_left >= 2) weights.push_back({0.08, 1});
    if (unc && (!hedged_easy.empty() || !hedged_hard.empty())) weights.push_back({0.08, 2});
    if (rel && unc && !region.empty()) weights.push_back({0.04, 3});
    if (rel && irr && !cue.empty()) weights.push_back({0.18, 4});
    if (!rel && weights.empty()) weights.push_back({1.0, 2});
    double total = 0.0;
    for (const auto& w : weights) total += w.first;
    double u = rng.uniform() * total;
    int choice = weights.back().second;
    for (const auto& w : weights) {
      if (u < w.first) {
        choice = w.second;
        break;
      }
      u -= w.first;
    }
    switch (choice) {
      case 0:
        return pick(plain, rng);
      case 1:
        return pick(shared, rng);
      case 2: {
        const bool hard = !hedged_hard.empty() &&
                          (hedged_easy.empty() || rng.bernoulli(config.hard_fraction));
        return pick(hard ? hedged_hard : hedged_easy, rng);
      }
      case 3:
        return pick(region, rng);
      default:
        return pick(cue, rng);
    }
  }

  // Ordered clause template indices for one sentence.
  std::vector<std::size_t> plan(Rng& rng) const {
    const bool irr = allowed[2];
    std::size_t target_bookmarks = 1;
    if (irr) {
      const double u = rng.uniform();
      target_bookmarks = u < 0.6 ? 1 : (u < 0.9 ? 2 : 3);
    }
    std::vector<std::size_t> out;
    std::size_t bookmarks = 0;
    while (bookmarks < target_bookmarks) {
      const std::size_t c = pick_bookmark_clause(rng, target_bookmarks - bookmarks);
      bookmarks += config.templates.clauses[c].bookmark_slots();
      out.push_back(c);
    }
    if (irr && !unbookmarked.empty() && rng.bernoulli(0.15)) {
      const std::size_t c = pick(unbookmarked, rng);
      const std::size_t at = rng.below(out.size() + 1);
      out.insert(out.begin() + static_cast<long>(at), c);
    }
    return out;
  }
};

std::optional<Candidate> build_candidate(const SynthConfig& config, const Planner& planner,
                                         const std::map<Category, std::vector<std::string>>& fills,
                                         const std::map<std::string, std::string>& plurals,
                                         Rng& rng, const std::string& id) {
  const std::vector<std::size_t> plan = planner.plan(rng);
  Builder b{config, fills, plurals, rng, {}, {}, {}, {}, {}};
  std::vector<std::size_t> roots;
  for (std::size_t ci = 0; ci < plan.size(); ++ci) {
    const ClauseTemplate& clause = config.templates.clauses[plan[ci]];
    if (ci > 0 && !config.templates.connectors.empty()) {
      const auto& conn = config.templates.connectors[rng.below(config.templates.connectors.size())];
      for (const TemplateWord& w : conn) {
        const std::size_t k = b.push(w.text, w.pos, "O", NeTag::kNone);
        b.heads[k] = -2;
      }
    }
    const bool prefix = ci == 0 && clause.prefix && rng.bernoulli(0.3);
    roots.push_back(b.add_clause(clause, ci, prefix));
  }
  const std::size_t root =
      b.push(config.templates.terminator.text, config.templates.terminator.pos, "O", NeTag::kNone);

  Sentence s;
  s.id = id;
  s.tokens = std::move(b.tokens);
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    if (i == root) continue;
    const long h = *b.heads[i];
    s.tokens[i].dep_head = h == -2 ? root : static_cast<std::size_t>(h);
  }
  if (!s.tokens.empty()) {
    std::string& first = s.tokens.front().surface;
    if (first != "BOOKMARK" && !first.empty()) {
      first[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(first[0])));
    }
  }
  s.bookmarks = b.bookmarks;
  if (s.bookmarks.empty() || s.bookmarks.size() > 3) return std::nullopt;
  if (b.mentions.empty() || b.mentions.size() > 5) return std::nullopt;
  for (const PlannedMention& m : b.mentions) s.mentions.push_back(m.mention);
  if (match_attributes(s, config.vocabulary) != s.mentions) return std::nullopt;

  Candidate c;
  for (std::size_t bi = 0; bi < s.bookmarks.size(); ++bi) {
    for (std::size_t mi = 0; mi < b.mentions.size(); ++mi) {
      const Label gold = pair_label(b.mentions[mi], b.bookmark_clause[bi]);
      s.pairs.push_back({bi, mi, gold});
      ++c.counts[label_index(gold)];
    }
  }
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    if (c.counts[k] > 0 && !planner.allowed[k]) return std::nullopt;
  }
  validate_sentence(s);
  c.sentence = std::move(s);
  return c;
}

double mix_distance(const std::array<std::size_t, kNumLabels>& totals,
                    const std::array<std::size_t, kNumLabels>& add,
                    const std::array<double, kNumLabels>& target) {
  double n = 0.0;
  for (std::size_t k = 0; k < kNumLabels; ++k) n += static_cast<double>(totals[k] + add[k]);
  double d = 0.0;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const double diff = static_cast<double>(totals[k] + add[k]) - target[k] * n;
    d += diff * diff;
  }
  return d;
}

}  // namespace

std::size_t ClauseTemplate::bookmark_slots() const {
  return static_cast<std::size_t>(std::count_if(
      tokens.begin(), tokens.end(), [](const TemplateToken& t) { return t.slot == "BOOKMARK"; }));
}

std::size_t ClauseTemplate::attribute_slots() const {
  return static_cast<std::size_t>(std::count_if(tokens.begin(), tokens.end(), [](const TemplateToken& t) {
    return !t.slot.empty() && t.slot != "BOOKMARK" && !is_cue_slot(t.slot);
  }));
}

TemplateInventory parse_templates(std::string_view json_text, const std::string& source_name) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw SynthError(source_name + ": invalid JSON: " + e.what());
  }
  TemplateInventory inv;
  try {
    if (doc.value("version", 0) != 1) throw SynthError(source_name + ": unsupported version");
    for (const auto& [group, list] : doc.at("cues").items()) {
      inv.cues[group] = list.get<std::vector<std::string>>();
    }
    for (const json& w : doc.value("prefixes", json::array())) inv.prefixes.push_back(parse_word(w));
    for (const json& c : doc.value("connectors", json::array())) {
      std::vector<TemplateWord> words;
      for (const json& w : c) words.push_back(parse_word(w));
      inv.connectors.push_back(std::move(words));
    }
    if (doc.contains("terminator")) inv.terminator = parse_word(doc.at("terminator"));
    for (const json& c : doc.at("clauses")) {
      ClauseTemplate clause;
      clause.name = c.at("name").get<std::string>();
      const std::string where = source_name + ": clause '" + clause.name + "'";
      const auto family = parse_family(c.at("family").get<std::string>());
      if (!family) throw SynthError(where + ": unknown family");
      clause.family = *family;
      clause.hard = c.value("hard", false);
      clause.prefix = c.value("prefix", false);
      for (const json& t : c.at("tokens")) {
        TemplateToken tok;
        tok.text = t.value("text", std::string());
        tok.slot = t.value("slot", std::string());
        tok.pos = t.value("pos", std::string("NN"));
        tok.chunk = t.value("chunk", std::string("O"));
        tok.head = t.value("head", -1);
        tok.label = t.value("label", std::string());
        tok.optional = t.value("optional", false);
        tok.plural = t.value("plural", false);
        clause.tokens.push_back(std::move(tok));
      }
      check_clause(clause, inv, where);
      inv.clauses.push_back(std::move(clause));
    }
  } catch (const json::exception& e) {
    throw SynthError(source_name + ": " + e.what());
  }
  if (inv.clauses.empty()) throw SynthError(source_name + ": no clause templates");
  return inv;
}

TemplateInventory load_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SynthError("cannot open template file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_templates(buffer.str(), path.string());
}

void validate_synth_config(const SynthConfig& config) {
  if (config.n_sentences == 0) throw SynthError("n_sentences must be at least 1");
  const auto mix = config.mix.values();
  double sum = 0.0;
  for (double p : mix) {
    if (!(p >= 0.0) || p > 1.0) throw SynthError("class mix proportions must lie in [0, 1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw SynthError("class mix proportions must sum to 1");
  if (config.hard_fraction < 0.0 || config.hard_fraction > 1.0) {
    throw SynthError("hard_fraction must lie in [0, 1]");
  }
  if (config.vocabulary.empty()) throw SynthError("vocabulary is empty");
  if (config.templates.clauses.empty()) throw SynthError("no clause templates");
}

std::vector<Sentence> generate_corpus(const SynthConfig& config) {
  validate_synth_config(config);
  const Planner planner(config);

  std::map<Category, std::vector<std::string>> fills;
  for (Category c : {Category::kSize, Category::kType, Category::kBodyPart, Category::kShape,
                     Category::kIntensity}) {
    fills[c] = config.vocabulary.phrases(c);
  }
  std::map<std::string, std::string> plurals;  // lemma -> first plural surface
  for (const auto& [surface, lemma] : config.vocabulary.lemma_table()) {
    if (surface == lemma) continue;
    auto it = plurals.find(lemma);
    if (it == plurals.end() || surface < it->second) plurals[lemma] = surface;
  }

  const Rng root(config.seed);
  const auto target = config.mix.values();
  std::array<std::size_t, kNumLabels> totals{};
  std::vector<Sentence> out;
  out.reserve(config.n_sentences);
  for (std::size_t i = 0; i < config.n_sentences; ++i) {
    std::ostringstream id;
    id << config.id_prefix << '-' << std::setw(6) << std::setfill('0') << (i + 1);
    Rng rng = root.split(i + 1);
    std::optional<Candidate> best;
    double best_distance = 0.0;
    std::size_t built = 0;
    for (std::size_t attempt = 0; attempt < kMaxAttempts && built < kCandidatesPerSentence;
         ++attempt) {
      std::optional<Candidate> c = build_candidate(config, planner, fills, plurals, rng, id.str());
      if (!c) continue;
      ++built;
      const double d = mix_distance(totals, c->counts, target);
      if (!best || d < best_distance) {
        best_distance = d;
        best = std::move(c);
      }
    }
    if (!best) {
      throw SynthError("could not realize sentence " + id.str() +
                       " under the given templates, vocabulary and class mix");
    }
    for (std::size_t k = 0; k < kNumLabels; ++k) totals[k] += best->counts[k];
    out.push_back(std::move(best->sentence));
  }
  return out;
}

std::size_t SplitStats::total_instances() const {
  return instances[0] + instances[1] + instances[2];
}

SplitStats CorpusStats::total() const {
  SplitStats t;
  for (const auto& [name, s] : splits) {
    t.sentences += s.sentences;
    for (std::size_t k = 0; k < kNumLabels; ++k) t.instances[k] += s.instances[k];
  }
  return t;
}

SplitStats count_split(const std::vector<Sentence>& sentences) {
  SplitStats s;
  s.sentences = sentences.size();
  for (const CandidatePair& p : generate_candidates(sentences)) {
    if (p.gold) ++s.instances[label_index(*p.gold)];
  }
  return s;
}

CorpusStats corpus_stats(const std::vector<std::pair<std::string, std::vector<Sentence>>>& splits) {
  CorpusStats stats;
  for (const auto& [name, sentences] : splits) stats.splits.emplace_back(name, count_split(sentences));
  return stats;
}

std::string format_corpus_stats(const CorpusStats& stats) {
  auto with_commas = [](std::size_t v) {
    std::string digits = std::to_string(v);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
      if (i > 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
      out.push_back(digits[i]);
    }
    return out;
  };
  std::vector<std::string> headers;
  for (const auto& [name, s] : stats.splits) headers.push_back(name);
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  auto row = [&](const std::string& label, auto value) {
    std::vector<std::string> cells;
    for (const auto& [name, s] : stats.splits) cells.push_back(value(s));
    rows.emplace_back(label, std::move(cells));
  };
  row("Sentences", [&](const SplitStats& s) { return with_commas(s.sentences); });
  row("Instances", [](const SplitStats&) { return std::string(); });
  for (Label l : kAllLabels) {
    row("  " + std::string(label_name(l)),
        [&](const SplitStats& s) { return with_commas(s.instances[label_index(l)]); });
  }
  std::size_t label_width = 0;
  for (const auto& r : rows) label_width = std::max(label_width, r.first.size());
  std::vector<std::size_t> widths(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    widths[c] = headers[c].size();
    for (const auto& r : rows) widths[c] = std::max(widths[c], r.second[c].size());
  }
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(label_width)) << "";
  for (std::size_t c = 0; c < headers.size(); ++c) {
    out << "  " << std::right << std::setw(static_cast<int>(widths[c])) << headers[c];
  }
  out << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(label_width)) << r.first;
    for (std::size_t c = 0; c < headers.size(); ++c) {
      out << "  " << std::right << std::setw(static_cast<int>(widths[c])) << r.second[c];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace lesionattr
