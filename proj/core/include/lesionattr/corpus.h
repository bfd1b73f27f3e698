#ifndef LESIONATTR_CORPUS_H_
#define LESIONATTR_CORPUS_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lesionattr {

// Pair classes. The integer values are part of the serialized formats.
enum class Label : int { kRelevant = 0, kUncertain = 1, kIrrelevant = 2 };
inline constexpr std::size_t kNumLabels = 3;
inline constexpr std::array<Label, kNumLabels> kAllLabels = {Label::kRelevant, Label::kUncertain,
                                                             Label::kIrrelevant};

std::string_view label_name(Label label);
std::optional<Label> parse_label(std::string_view text);
inline std::size_t label_index(Label label) { return static_cast<std::size_t>(label); }
Label label_from_index(std::size_t index);

// Named-entity classes carried on tokens. Only three attribute categories are
// tagged; everything else is kNone.
enum class NeTag { kSize, kType, kBodyPart, kNone };
inline constexpr std::size_t kNumNeTags = 4;
std::string_view ne_name(NeTag tag);
std::optional<NeTag> parse_ne(std::string_view text);

enum class Category { kSize, kType, kBodyPart, kShape, kIntensity };
std::string_view category_name(Category category);
std::optional<Category> parse_category(std::string_view text);
NeTag ne_for_category(Category category);

// Half-open token range.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool empty() const { return end <= start; }
  bool contains(std::size_t i) const { return i >= start && i < end; }
  bool overlaps(const Span& other) const { return start < other.end && other.start < end; }
  auto operator<=>(const Span&) const = default;
};

struct Token {
  std::string surface;
  std::string lemma;
  std::string pos;
  std::string chunk;
  NeTag ne = NeTag::kNone;
  std::optional<std::size_t> dep_head;  // nullopt for the root
  std::size_t index = 0;

  bool operator==(const Token&) const = default;
};

enum class BookmarkRole { kTargetCandidate, kOther };
std::string_view role_name(BookmarkRole role);

struct Bookmark {
  Span span;
  BookmarkRole role = BookmarkRole::kTargetCandidate;
  bool operator==(const Bookmark&) const = default;
};

struct AttributeMention {
  Span span;
  std::string normalized;
  Category category = Category::kType;
  bool operator==(const AttributeMention&) const = default;
};

// Gold annotation for one (bookmark, mention) combination of a sentence.
struct PairAnnotation {
  std::size_t bookmark_index = 0;
  std::size_t mention_index = 0;
  Label gold = Label::kRelevant;
  bool operator==(const PairAnnotation&) const = default;
};

struct Sentence {
  std::string id;
  std::vector<Token> tokens;
  std::vector<Bookmark> bookmarks;
  std::vector<AttributeMention> mentions;
  std::optional<std::vector<double>> sentence_embedding;
  std::vector<PairAnnotation> pairs;

  bool operator==(const Sentence&) const = default;
};

struct CandidatePair {
  std::string sentence_id;
  std::size_t bookmark_index = 0;
  std::size_t mention_index = 0;
  std::optional<Label> gold;
  std::optional<Label> predicted;
  bool operator==(const CandidatePair&) const = default;
};

// Raised for malformed corpus, vocabulary, or lemma files and for sentences
// that break the span invariants.
class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Attribute vocabulary plus the surface -> lemma table used for matching.
class Vocabulary {
 public:
  // Adds a canonical phrase; the phrase is lowercased and whitespace-collapsed.
  void add(std::string_view phrase, Category category);
  void add_lemma(std::string_view surface, std::string_view lemma);

  std::optional<Category> find(const std::string& canonical) const;
  bool contains(const std::string& canonical) const { return find(canonical).has_value(); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t longest_phrase_tokens() const { return longest_; }
  const std::map<std::string, Category>& entries() const { return entries_; }
  const std::unordered_map<std::string, std::string>& lemma_table() const { return lemmas_; }

  // All canonical phrases of one category, in lexicographic order.
  std::vector<std::string> phrases(Category category) const;

 private:
  std::map<std::string, Category> entries_;
  std::unordered_map<std::string, std::string> lemmas_;
  std::size_t longest_ = 0;
};

// `canonical phrase<TAB>category` per line; blank lines and `#` comments skipped.
Vocabulary load_vocabulary(const std::filesystem::path& path);
// `surface<TAB>lemma` per line, merged into `vocab`.
void load_lemma_table(const std::filesystem::path& path, Vocabulary& vocab);

std::string to_lower(std::string_view text);
std::string normalize_phrase(std::string_view text);

// Table entry if present, else the lowercased surface.
std::string lemmatize(std::string_view surface,
                      const std::unordered_map<std::string, std::string>& lemma_table);

struct LoadedCorpus {
  std::vector<Sentence> sentences;
  std::size_t unknown_ne_tags = 0;
};

LoadedCorpus load_corpus(const std::filesystem::path& path);
LoadedCorpus parse_corpus(std::istream& in, const std::string& source_name = "<stream>");
void save_corpus(const std::filesystem::path& path, const std::vector<Sentence>& sentences);
void write_corpus(std::ostream& out, const std::vector<Sentence>& sentences);

// Checks span, overlap, dependency, and pair-reference invariants.
void validate_sentence(const Sentence& sentence);

// Greedy longest-match over the lemmatized, lowercased tokens. Matches never
// overlap each other or a bookmark span.
std::vector<AttributeMention> match_attributes(const Sentence& sentence, const Vocabulary& vocab);

// Target bookmarks x mentions, ordered by bookmark index then mention start.
// Gold labels are copied from the sentence's pair annotations when present.
std::vector<CandidatePair> generate_candidates(const Sentence& sentence);
std::vector<CandidatePair> generate_candidates(const std::vector<Sentence>& sentences);

struct SplitRatios {
  double train = 0.6;
  double dev = 0.2;
  double test = 0.2;
};

struct CorpusSplit {
  std::vector<Sentence> train;
  std::vector<Sentence> dev;
  std::vector<Sentence> test;
  std::optional<std::string> warning;
};

// Sentence-level seeded split. Dev and test sizes are floored, the remainder
// goes to training.
CorpusSplit split_corpus(const std::vector<Sentence>& sentences, const SplitRatios& ratios,
                         std::uint64_t seed);

}  // namespace lesionattr

#endif  // LESIONATTR_CORPUS_H_
