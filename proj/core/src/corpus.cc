#include "lesionattr/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "lesionattr/random.h"

namespace lesionattr {

using nlohmann::json;

namespace {

std::string trim(std::string_view text) {
  std::size_t b = 0, e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  return std::string(text.substr(b, e - b));
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

[[noreturn]] void sentence_error(const std::string& id, const std::string& what) {
  throw CorpusError("sentence '" + id + "': " + what);
}

Span parse_span(const json& j) {
  return Span{j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>()};
}

template <typename Fn>
void for_each_data_line(const std::filesystem::path& path, Fn fn) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    fn(line, line_no);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Enumerations

std::string_view label_name(Label label) {
  switch (label) {
    case Label::kRelevant:
      return "Relevant";
    case Label::kUncertain:
      return "Uncertain";
    case Label::kIrrelevant:
      return "Irrelevant";
  }
  return "?";
}

std::optional<Label> parse_label(std::string_view text) {
  const std::string t = to_lower(trim(text));
  if (t == "relevant" || t == "0") return Label::kRelevant;
  if (t == "uncertain" || t == "uncertainty" || t == "1") return Label::kUncertain;
  if (t == "irrelevant" || t == "2") return Label::kIrrelevant;
  return std::nullopt;
}

Label label_from_index(std::size_t index) {
  if (index >= kNumLabels) throw std::out_of_range("label index " + std::to_string(index));
  return static_cast<Label>(index);
}

std::string_view ne_name(NeTag tag) {
  switch (tag) {
    case NeTag::kSize:
      return "SIZE";
    case NeTag::kType:
      return "TYPE";
    case NeTag::kBodyPart:
      return "BODYPART";
    case NeTag::kNone:
      return "NONE";
  }
  return "NONE";
}

std::optional<NeTag> parse_ne(std::string_view text) {
  if (text == "SIZE") return NeTag::kSize;
  if (text == "TYPE") return NeTag::kType;
  if (text == "BODYPART") return NeTag::kBodyPart;
  if (text == "NONE" || text == "O" || text.empty()) return NeTag::kNone;
  return std::nullopt;
}

std::string_view category_name(Category category) {
  switch (category) {
    case Category::kSize:
      return "SIZE";
    case Category::kType:
      return "TYPE";
    case Category::kBodyPart:
      return "BODYPART";
    case Category::kShape:
      return "SHAPE";
    case Category::kIntensity:
      return "INTENSITY";
  }
  return "?";
}

std::optional<Category> parse_category(std::string_view text) {
  const std::string t = trim(text);
  if (t == "SIZE") return Category::kSize;
  if (t == "TYPE") return Category::kType;
  if (t == "BODYPART") return Category::kBodyPart;
  if (t == "SHAPE") return Category::kShape;
  if (t == "INTENSITY") return Category::kIntensity;
  return std::nullopt;
}

NeTag ne_for_category(Category category) {
  switch (category) {
    case Category::kSize:
      return NeTag::kSize;
    case Category::kType:
      return NeTag::kType;
    case Category::kBodyPart:
      return NeTag::kBodyPart;
    default:
      return NeTag::kNone;
  }
}

std::string_view role_name(BookmarkRole role) {
  return role == BookmarkRole::kTargetCandidate ? "TARGET_CANDIDATE" : "OTHER";
}

// ---------------------------------------------------------------------------
// Vocabulary

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string normalize_phrase(std::string_view text) {
  std::string out;
  for (const std::string& w : split_words(to_lower(text))) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

void Vocabulary::add(std::string_view phrase, Category category) {
  std::string canonical = normalize_phrase(phrase);
  if (canonical.empty()) throw CorpusError("empty vocabulary phrase");
  if (entries_.count(canonical)) throw CorpusError("duplicate vocabulary phrase: " + canonical);
  longest_ = std::max(longest_, split_words(canonical).size());
  entries_.emplace(std::move(canonical), category);
}

void Vocabulary::add_lemma(std::string_view surface, std::string_view lemma) {
  lemmas_[to_lower(trim(surface))] = to_lower(trim(lemma));
}

std::optional<Category> Vocabulary::find(const std::string& canonical) const {
  auto it = entries_.find(canonical);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Vocabulary::phrases(Category category) const {
  std::vector<std::string> out;
  for (const auto& [phrase, cat] : entries_)
    if (cat == category) out.push_back(phrase);
  return out;
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  Vocabulary vocab;
  for_each_data_line(path, [&](const std::string& line, std::size_t line_no) {
    const auto tab = line.find('\t');
    const auto category = tab == std::string::npos ? std::nullopt
                                                   : parse_category(line.substr(tab + 1));
    if (!category) {
      throw CorpusError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'phrase<TAB>category'");
    }
    try {
      vocab.add(line.substr(0, tab), *category);
    } catch (const CorpusError& e) {
      throw CorpusError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return vocab;
}

void load_lemma_table(const std::filesystem::path& path, Vocabulary& vocab) {
  for_each_data_line(path, [&](const std::string& line, std::size_t line_no) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos || trim(line.substr(tab + 1)).empty()) {
      throw CorpusError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'surface<TAB>lemma'");
    }
    vocab.add_lemma(line.substr(0, tab), line.substr(tab + 1));
  });
}

std::string lemmatize(std::string_view surface,
                      const std::unordered_map<std::string, std::string>& lemma_table) {
  std::string key = to_lower(surface);
  auto it = lemma_table.find(key);
  if (it != lemma_table.end()) return it->second;
  auto exact = lemma_table.find(std::string(surface));
  if (exact != lemma_table.end()) return exact->second;
  return key;
}

// ---------------------------------------------------------------------------
// Corpus IO

void validate_sentence(const Sentence& s) {
  const std::size_t n = s.tokens.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Token& t = s.tokens[i];
    if (t.index != i) sentence_error(s.id, "token index mismatch at " + std::to_string(i));
    if (t.dep_head) {
      if (*t.dep_head >= n) sentence_error(s.id, "dep_head out of range at token " + std::to_string(i));
      if (*t.dep_head == i) sentence_error(s.id, "token " + std::to_string(i) + " is its own head");
    }
  }
  auto check_spans = [&](const std::vector<Span>& spans, const char* what) {
    for (std::size_t i = 0; i < spans.size(); ++i) {
      const Span& sp = spans[i];
      if (sp.empty() || sp.end > n) {
        sentence_error(s.id, std::string(what) + " span [" + std::to_string(sp.start) + ", " +
                                 std::to_string(sp.end) + ") outside " + std::to_string(n) +
                                 " tokens");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (sp.overlaps(spans[j])) sentence_error(s.id, std::string("overlapping ") + what + " spans");
      }
    }
  };
  std::vector<Span> spans;
  for (const Bookmark& b : s.bookmarks) spans.push_back(b.span);
  check_spans(spans, "bookmark");
  spans.clear();
  for (const AttributeMention& m : s.mentions) spans.push_back(m.span);
  check_spans(spans, "mention");
  for (const PairAnnotation& p : s.pairs) {
    if (p.bookmark_index >= s.bookmarks.size() || p.mention_index >= s.mentions.size()) {
      sentence_error(s.id, "pair annotation references a missing bookmark or mention");
    }
  }
}

namespace {

Sentence sentence_from_json(const json& j, std::size_t& unknown_ne) {
  Sentence s;
  s.id = j.at("id").get<std::string>();
  for (const json& tj : j.at("tokens")) {
    Token t;
    t.surface = tj.at("surface").get<std::string>();
    t.lemma = tj.value("lemma", "");
    t.pos = tj.value("pos", "");
    t.chunk = tj.value("chunk", "");
    const std::string ne = tj.value("ne", "NONE");
    if (auto tag = parse_ne(ne)) {
      t.ne = *tag;
    } else {
      t.ne = NeTag::kNone;
      ++unknown_ne;
    }
    if (tj.contains("dep_head") && !tj.at("dep_head").is_null()) {
      const long head = tj.at("dep_head").get<long>();
      if (head >= 0) t.dep_head = static_cast<std::size_t>(head);
    }
    t.index = s.tokens.size();
    s.tokens.push_back(std::move(t));
  }
  if (j.contains("bookmarks")) {
    for (const json& bj : j.at("bookmarks")) {
      Bookmark b;
      b.span = parse_span(bj);
      const std::string role = bj.value("role", "TARGET_CANDIDATE");
      if (role == "TARGET_CANDIDATE") {
        b.role = BookmarkRole::kTargetCandidate;
      } else if (role == "OTHER") {
        b.role = BookmarkRole::kOther;
      } else {
        sentence_error(s.id, "unknown bookmark role '" + role + "'");
      }
      s.bookmarks.push_back(b);
    }
  }
  if (j.contains("mentions")) {
    for (const json& mj : j.at("mentions")) {
      AttributeMention m;
      m.span = parse_span(mj);
      m.normalized = mj.at("normalized").get<std::string>();
      auto cat = parse_category(mj.at("category").get<std::string>());
      if (!cat) sentence_error(s.id, "unknown attribute category");
      m.category = *cat;
      s.mentions.push_back(std::move(m));
    }
  }
  if (j.contains("sentence_embedding") && !j.at("sentence_embedding").is_null()) {
    s.sentence_embedding = j.at("sentence_embedding").get<std::vector<double>>();
  }
  if (j.contains("pairs")) {
    for (const json& pj : j.at("pairs")) {
      PairAnnotation p;
      p.bookmark_index = pj.at("bookmark_index").get<std::size_t>();
      p.mention_index = pj.at("mention_index").get<std::size_t>();
      const json& gold = pj.at("gold");
      auto label = gold.is_number() ? parse_label(std::to_string(gold.get<int>()))
                                    : parse_label(gold.get<std::string>());
      if (!label) sentence_error(s.id, "unknown gold label");
      p.gold = *label;
      s.pairs.push_back(p);
    }
  }
  return s;
}

json sentence_to_json(const Sentence& s) {
  json tokens = json::array();
  for (const Token& t : s.tokens) {
    tokens.push_back({{"surface", t.surface},
                      {"lemma", t.lemma},
                      {"pos", t.pos},
                      {"chunk", t.chunk},
                      {"ne", ne_name(t.ne)},
                      {"dep_head", t.dep_head ? json(*t.dep_head) : json(nullptr)}});
  }
  json bookmarks = json::array();
  for (const Bookmark& b : s.bookmarks) {
    bookmarks.push_back({{"start", b.span.start}, {"end", b.span.end}, {"role", role_name(b.role)}});
  }
  json j = {{"id", s.id}, {"tokens", std::move(tokens)}, {"bookmarks", std::move(bookmarks)}};
  if (!s.mentions.empty()) {
    json mentions = json::array();
    for (const AttributeMention& m : s.mentions) {
      mentions.push_back({{"start", m.span.start},
                          {"end", m.span.end},
                          {"normalized", m.normalized},
                          {"category", category_name(m.category)}});
    }
    j["mentions"] = std::move(mentions);
  }
  if (s.sentence_embedding) j["sentence_embedding"] = *s.sentence_embedding;
  if (!s.pairs.empty()) {
    json pairs = json::array();
    for (const PairAnnotation& p : s.pairs) {
      pairs.push_back({{"bookmark_index", p.bookmark_index},
                       {"mention_index", p.mention_index},
                       {"gold", label_name(p.gold)}});
    }
    j["pairs"] = std::move(pairs);
  }
  return j;
}

}  // namespace

LoadedCorpus parse_corpus(std::istream& in, const std::string& source_name) {
  LoadedCorpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw CorpusError(source_name + ":" + std::to_string(line_no) + ": malformed JSON (" +
                        e.what() + ")");
    }
    Sentence s;
    try {
      s = sentence_from_json(j, corpus.unknown_ne_tags);
    } catch (const json::exception& e) {
      throw CorpusError(source_name + ":" + std::to_string(line_no) + ": malformed record (" +
                        e.what() + ")");
    }
    validate_sentence(s);
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

LoadedCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path.string());
  return parse_corpus(in, path.string());
}

void write_corpus(std::ostream& out, const std::vector<Sentence>& sentences) {
  for (const Sentence& s : sentences) out << sentence_to_json(s).dump() << '\n';
}

void save_corpus(const std::filesystem::path& path, const std::vector<Sentence>& sentences) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  write_corpus(out, sentences);
}

// ---------------------------------------------------------------------------
// Matching and candidates

std::vector<AttributeMention> match_attributes(const Sentence& sentence, const Vocabulary& vocab) {
  std::vector<AttributeMention> mentions;
  if (vocab.empty()) return mentions;
  const std::size_t n = sentence.tokens.size();
  std::vector<std::string> lemmas(n);
  std::vector<bool> blocked(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const Token& t = sentence.tokens[i];
    lemmas[i] = t.lemma.empty() ? lemmatize(t.surface, vocab.lemma_table()) : to_lower(t.lemma);
  }
  for (const Bookmark& b : sentence.bookmarks)
    for (std::size_t i = b.span.start; i < std::min(b.span.end, n); ++i) blocked[i] = true;

  std::size_t i = 0;
  while (i < n) {
    bool matched = false;
    const std::size_t max_len = std::min(vocab.longest_phrase_tokens(), n - i);
    for (std::size_t len = max_len; len >= 1 && !matched; --len) {
      bool free = true;
      std::string phrase;
      for (std::size_t k = i; k < i + len; ++k) {
        if (blocked[k]) {
          free = false;
          break;
        }
        if (k > i) phrase += ' ';
        phrase += lemmas[k];
      }
      if (!free) continue;
      if (auto category = vocab.find(phrase)) {
        mentions.push_back(AttributeMention{Span{i, i + len}, phrase, *category});
        i += len;
        matched = true;
      }
    }
    if (!matched) ++i;
  }
  return mentions;
}

std::vector<CandidatePair> generate_candidates(const Sentence& sentence) {
  std::vector<std::size_t> order(sentence.mentions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sentence.mentions[a].span.start < sentence.mentions[b].span.start;
  });
  std::vector<CandidatePair> pairs;
  for (std::size_t b = 0; b < sentence.bookmarks.size(); ++b) {
    if (sentence.bookmarks[b].role != BookmarkRole::kTargetCandidate) continue;
    for (std::size_t m : order) {
      CandidatePair pair{sentence.id, b, m, std::nullopt, std::nullopt};
      for (const PairAnnotation& a : sentence.pairs) {
        if (a.bookmark_index == b && a.mention_index == m) pair.gold = a.gold;
      }
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

std::vector<CandidatePair> generate_candidates(const std::vector<Sentence>& sentences) {
  std::vector<CandidatePair> out;
  for (const Sentence& s : sentences) {
    auto pairs = generate_candidates(s);
    out.insert(out.end(), std::make_move_iterator(pairs.begin()),
               std::make_move_iterator(pairs.end()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

CorpusSplit split_corpus(const std::vector<Sentence>& sentences, const SplitRatios& ratios,
                         std::uint64_t seed) {
  if (ratios.train <= 0.0 || ratios.dev <= 0.0 || ratios.test <= 0.0) {
    throw std::invalid_argument("split ratios must be positive");
  }
  if (std::abs(ratios.train + ratios.dev + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
  CorpusSplit split;
  const std::size_t n = sentences.size();
  if (n < 3) {
    split.train = sentences;
    split.warning = "fewer than 3 sentences; all assigned to training";
    return split;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  // The small slack keeps products such as 10 * 0.2 from flooring to 1.
  auto floor_size = [n](double r) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9));
  };
  const std::size_t n_dev = floor_size(ratios.dev);
  const std::size_t n_test = floor_size(ratios.test);
  const std::size_t n_train = n - n_dev - n_test;
  for (std::size_t k = 0; k < n; ++k) {
    const Sentence& s = sentences[order[k]];
    if (k < n_train) {
      split.train.push_back(s);
    } else if (k < n_train + n_dev) {
      split.dev.push_back(s);
    } else {
      split.test.push_back(s);
    }
  }
  return split;
}

}  // namespace lesionattr
