#ifndef LESIONATTR_FEATURES_H_
#define LESIONATTR_FEATURES_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lesionattr/autograd.h"
#include "lesionattr/corpus.h"
#include "lesionattr/random.h"
#include "lesionattr/tensor.h"

namespace lesionattr {

inline constexpr std::string_view kBookmarkToken = "BOOKMARK";
inline constexpr std::string_view kOtherBookmarkToken = "OTHER_BOOKMARK";
inline constexpr std::size_t kPositionBits = 10;
inline constexpr int kMaxEncodedDistance = 511;

// Ordered tag list; order defines the one-hot index.
class Tagset {
 public:
  Tagset() = default;
  explicit Tagset(std::vector<std::string> tags);

  std::size_t size() const { return tags_.size(); }
  const std::vector<std::string>& tags() const { return tags_; }
  std::optional<std::size_t> index_of(const std::string& tag) const;

  bool operator==(const Tagset& other) const { return tags_ == other.tags_; }

 private:
  std::vector<std::string> tags_;
  std::unordered_map<std::string, std::size_t> index_;
};

// One tag per line.
Tagset load_tagset(const std::filesystem::path& path);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  void set(std::string token, std::vector<double> vector);
  void set_unk(std::vector<double> vector);

  // Exact surface first, then its lowercase form.
  bool contains(std::string_view surface) const { return find(surface) != nullptr; }
  std::span<const double> lookup(std::string_view surface) const;
  const std::vector<double>* find(std::string_view surface) const;
  std::span<const double> unk_vector() const { return unk_; }
  std::span<const double> pad_vector() const { return pad_; }
  const std::unordered_map<std::string, std::vector<double>>& vectors() const { return vectors_; }

  // Seeded random vectors (N(0, 1/dim)) for every word, the two bookmark
  // placeholders, and the unknown vector. Used when no pretrained file exists.
  static EmbeddingTable random_init(const std::vector<std::string>& words, std::size_t dim,
                                    std::uint64_t seed);

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
  std::vector<double> unk_;
  std::vector<double> pad_;
};

// word2vec text format: "count dim" header then "token v1 ... v_dim" lines.
// A "<unk>" entry becomes the unknown vector; otherwise the table mean is used.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

struct FeatureConfig {
  std::size_t max_len = 128;
  Tagset pos_tagset;
  Tagset chunk_tagset;
  bool use_shortest_path = true;
  // 0 means "same as the word embedding width" (the mean-of-words fallback).
  std::size_t sentence_embedding_dim = 0;
};

void validate_feature_config(const FeatureConfig& config);

// word_dim + |POS| + |chunk| + 4 NE slots + 2 x 10 position bits.
std::size_t feature_width(const FeatureConfig& config, const EmbeddingTable& table);
std::size_t sentence_vec_width(const FeatureConfig& config, const EmbeddingTable& table);

struct PairInput {
  Tensor word_matrix;  // max_len x d
  Tensor path_matrix;  // max_len x d
  ad::Mask word_mask;
  ad::Mask path_mask;
  std::vector<double> sentence_vec;
  std::size_t d = 0;
  bool exact_path = true;
};

// Bit 0 is the sign; bits 1..9 hold min(|distance|, 511) big-endian.
std::array<std::uint8_t, kPositionBits> encode_position(long distance);

struct BlindedSentence {
  std::vector<Token> tokens;      // re-indexed, dependency heads remapped
  std::size_t bookmark_index = 0; // the single BOOKMARK token
  Span attribute;                 // attribute span after collapsing
  std::size_t attribute_anchor = 0;  // last token of the attribute span
};

// Collapses every bookmark span to one placeholder token: BOOKMARK for the
// pair's bookmark, OTHER_BOOKMARK for the rest. Attribute tokens are kept.
BlindedSentence blind_entities(const Sentence& sentence, const CandidatePair& pair);

struct DependencyPath {
  std::vector<std::size_t> indices;
  bool exact = true;
};

// Breadth-first search over undirected dependency arcs, visiting neighbours in
// ascending index order. Falls back to the linear run from -> to when the two
// tokens are not connected.
DependencyPath shortest_dependency_path(std::span<const Token> tokens, std::size_t from,
                                        std::size_t to);

// Writes one token row into `out` (length feature_width).
void encode_token_into(std::span<double> out, std::string_view surface, NeTag ne,
                       const std::string& pos, const std::string& chunk, long d1, long d2,
                       const EmbeddingTable& table, const FeatureConfig& config);
std::vector<double> encode_token(std::string_view surface, NeTag ne, const std::string& pos,
                                 const std::string& chunk, long d1, long d2,
                                 const EmbeddingTable& table, const FeatureConfig& config);

// Start of the max_len window over a sequence of length n that is centred on
// the midpoint of [lo, hi] and shifted to stay in bounds.
std::size_t window_start(std::size_t n, std::size_t max_len, std::size_t lo, std::size_t hi);

PairInput build_pair_input(const Sentence& sentence, const CandidatePair& pair,
                           const EmbeddingTable& table, const FeatureConfig& config);

// Surfaces of every token in the corpus plus the bookmark placeholders; the
// word list for EmbeddingTable::random_init.
std::vector<std::string> corpus_words(const std::vector<Sentence>& sentences);

}  // namespace lesionattr

#endif  // LESIONATTR_FEATURES_H_
