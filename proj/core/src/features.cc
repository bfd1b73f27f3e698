#include "lesionattr/features.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lesionattr {

// ---------------------------------------------------------------------------
// Tagsets and embeddings

Tagset::Tagset(std::vector<std::string> tags) : tags_(std::move(tags)) {
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    if (!index_.emplace(tags_[i], i).second) {
      throw std::invalid_argument("duplicate tag '" + tags_[i] + "'");
    }
  }
}

std::optional<std::size_t> Tagset::index_of(const std::string& tag) const {
  auto it = index_.find(tag);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Tagset load_tagset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tagset " + path.string());
  std::vector<std::string> tags;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (ls >> tag && tag.front() != '#') tags.push_back(tag);
  }
  return Tagset(std::move(tags));
}

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim), unk_(dim, 0.0), pad_(dim, 0.0) {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be positive");
}

void EmbeddingTable::set(std::string token, std::vector<double> vector) {
  if (vector.size() != dim_) {
    throw std::invalid_argument("embedding for '" + token + "' has " +
                                std::to_string(vector.size()) + " values, expected " +
                                std::to_string(dim_));
  }
  vectors_[std::move(token)] = std::move(vector);
}

void EmbeddingTable::set_unk(std::vector<double> vector) {
  if (vector.size() != dim_) throw std::invalid_argument("unk vector has the wrong dimension");
  unk_ = std::move(vector);
}

const std::vector<double>* EmbeddingTable::find(std::string_view surface) const {
  auto it = vectors_.find(std::string(surface));
  if (it != vectors_.end()) return &it->second;
  it = vectors_.find(to_lower(surface));
  if (it != vectors_.end()) return &it->second;
  return nullptr;
}

std::span<const double> EmbeddingTable::lookup(std::string_view surface) const {
  if (const auto* v = find(surface)) return *v;
  return unk_;
}

EmbeddingTable EmbeddingTable::random_init(const std::vector<std::string>& words, std::size_t dim,
                                           std::uint64_t seed) {
  EmbeddingTable table(dim);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(dim));
  // Sorted, de-duplicated order keeps the draw independent of input order.
  std::set<std::string> unique(words.begin(), words.end());
  unique.insert(std::string(kBookmarkToken));
  unique.insert(std::string(kOtherBookmarkToken));
  Rng rng(seed);
  auto draw = [&] {
    std::vector<double> v(dim);
    for (double& x : v) x = stddev * rng.normal();
    return v;
  };
  table.set_unk(draw());
  for (const std::string& w : unique) table.set(w, draw());
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::size_t count = 0, dim = 0;
  if (!(hs >> count >> dim) || dim == 0) {
    throw std::runtime_error(path.string() + ":1: expected 'count dim' header");
  }
  EmbeddingTable table(dim);
  std::vector<double> mean(dim, 0.0);
  bool has_unk = false;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<double> v(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!(ls >> v[i])) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": expected " + std::to_string(dim) + " values");
      }
    }
    if (token == "<unk>") {
      table.set_unk(v);
      has_unk = true;
      continue;
    }
    for (std::size_t i = 0; i < dim; ++i) mean[i] += v[i];
    table.set(std::move(token), std::move(v));
  }
  if (!has_unk && table.size() > 0) {
    for (double& x : mean) x /= static_cast<double>(table.size());
    table.set_unk(std::move(mean));
  }
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::vector<std::string> keys;
  for (const auto& [k, v] : table.vectors()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  out << keys.size() + 1 << ' ' << table.dim() << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  auto write_row = [&](const std::string& token, std::span<const double> v) {
    out << token;
    for (double x : v) out << ' ' << x;
    out << '\n';
  };
  write_row("<unk>", table.unk_vector());
  for (const std::string& k : keys) write_row(k, table.vectors().at(k));
}

// ---------------------------------------------------------------------------
// Configuration

void validate_feature_config(const FeatureConfig& config) {
  if (config.max_len < 2) throw std::invalid_argument("max_len must be at least 2");
}

std::size_t feature_width(const FeatureConfig& config, const EmbeddingTable& table) {
  return table.dim() + config.pos_tagset.size() + config.chunk_tagset.size() + kNumNeTags +
         2 * kPositionBits;
}

std::size_t sentence_vec_width(const FeatureConfig& config, const EmbeddingTable& table) {
  return config.sentence_embedding_dim == 0 ? table.dim() : config.sentence_embedding_dim;
}

// ---------------------------------------------------------------------------
// Encoders

std::array<std::uint8_t, kPositionBits> encode_position(long distance) {
  std::array<std::uint8_t, kPositionBits> bits{};
  bits[0] = distance < 0 ? 1 : 0;
  const long magnitude = std::min<long>(distance < 0 ? -distance : distance, kMaxEncodedDistance);
  for (std::size_t b = 1; b < kPositionBits; ++b) {
    const std::size_t shift = kPositionBits - 1 - b;
    bits[b] = static_cast<std::uint8_t>((magnitude >> shift) & 1);
  }
  return bits;
}

BlindedSentence blind_entities(const Sentence& sentence, const CandidatePair& pair) {
  if (pair.sentence_id != sentence.id) {
    throw std::invalid_argument("pair for sentence '" + pair.sentence_id +
                                "' applied to sentence '" + sentence.id + "'");
  }
  if (pair.bookmark_index >= sentence.bookmarks.size() ||
      pair.mention_index >= sentence.mentions.size()) {
    throw CorpusError("sentence '" + sentence.id + "': pair references a missing entity");
  }
  const Span attribute = sentence.mentions[pair.mention_index].span;
  for (const Bookmark& b : sentence.bookmarks) {
    if (b.span.overlaps(attribute)) {
      throw CorpusError("sentence '" + sentence.id + "': attribute span overlaps a bookmark");
    }
  }

  const std::size_t n = sentence.tokens.size();
  // bookmark id owning each old token, or npos.
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(n, npos);
  for (std::size_t b = 0; b < sentence.bookmarks.size(); ++b)
    for (std::size_t i = sentence.bookmarks[b].span.start; i < sentence.bookmarks[b].span.end; ++i)
      owner[i] = b;

  std::vector<std::size_t> new_of(n);
  std::vector<std::size_t> representative;  // old index whose head the new token inherits
  BlindedSentence out;
  for (std::size_t i = 0; i < n;) {
    const std::size_t idx = out.tokens.size();
    if (owner[i] == npos) {
      new_of[i] = idx;
      Token t = sentence.tokens[i];
      t.index = idx;
      out.tokens.push_back(std::move(t));
      representative.push_back(i);
      ++i;
      continue;
    }
    const std::size_t b = owner[i];
    const Span span = sentence.bookmarks[b].span;
    std::size_t rep = span.end - 1;
    for (std::size_t k = span.start; k < span.end; ++k) {
      new_of[k] = idx;
      const auto& head = sentence.tokens[k].dep_head;
      if (!head || !span.contains(*head)) {
        rep = k;
        break;
      }
    }
    Token t;
    const bool target = b == pair.bookmark_index;
    t.surface = std::string(target ? kBookmarkToken : kOtherBookmarkToken);
    t.lemma = to_lower(t.surface);
    t.pos = sentence.tokens[span.end - 1].pos;
    t.chunk = sentence.tokens[span.end - 1].chunk;
    t.ne = NeTag::kNone;
    t.index = idx;
    if (target) out.bookmark_index = idx;
    out.tokens.push_back(std::move(t));
    representative.push_back(rep);
    for (std::size_t k = span.start; k < span.end; ++k) new_of[k] = idx;
    i = span.end;
  }
  for (std::size_t j = 0; j < out.tokens.size(); ++j) {
    const auto& head = sentence.tokens[representative[j]].dep_head;
    out.tokens[j].dep_head.reset();
    if (head && new_of[*head] != j) out.tokens[j].dep_head = new_of[*head];
  }
  out.attribute = Span{new_of[attribute.start], new_of[attribute.end - 1] + 1};
  out.attribute_anchor = out.attribute.end - 1;
  return out;
}

DependencyPath shortest_dependency_path(std::span<const Token> tokens, std::size_t from,
                                        std::size_t to) {
  const std::size_t n = tokens.size();
  if (from >= n || to >= n) throw std::out_of_range("dependency path endpoint out of range");
  DependencyPath result;
  if (from == to) {
    result.indices = {from};
    return result;
  }
  std::vector<std::vector<std::size_t>> adjacency(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& head = tokens[i].dep_head;
    if (head && *head < n && *head != i) {
      adjacency[i].push_back(*head);
      adjacency[*head].push_back(i);
    }
  }
  for (auto& nbrs : adjacency) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  constexpr std::size_t unseen = static_cast<std::size_t>(-1);
  std::vector<std::size_t> parent(n, unseen);
  std::deque<std::size_t> queue{from};
  parent[from] = from;
  while (!queue.empty() && parent[to] == unseen) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v : adjacency[u]) {
      if (parent[v] != unseen) continue;
      parent[v] = u;
      queue.push_back(v);
    }
  }
  if (parent[to] == unseen) {
    result.exact = false;
    if (from < to) {
      for (std::size_t i = from; i <= to; ++i) result.indices.push_back(i);
    } else {
      for (std::size_t i = from + 1; i-- > to;) result.indices.push_back(i);
    }
    return result;
  }
  for (std::size_t v = to; v != from; v = parent[v]) result.indices.push_back(v);
  result.indices.push_back(from);
  std::reverse(result.indices.begin(), result.indices.end());
  return result;
}

void encode_token_into(std::span<double> out, std::string_view surface, NeTag ne,
                       const std::string& pos, const std::string& chunk, long d1, long d2,
                       const EmbeddingTable& table, const FeatureConfig& config) {
  const std::size_t width = feature_width(config, table);
  if (out.size() != width) throw std::invalid_argument("encode_token: output width mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  std::size_t offset = 0;
  const auto word = table.lookup(surface);
  std::copy(word.begin(), word.end(), out.begin());
  offset += table.dim();
  if (auto p = config.pos_tagset.index_of(pos)) out[offset + *p] = 1.0;
  offset += config.pos_tagset.size();
  if (auto c = config.chunk_tagset.index_of(chunk)) out[offset + *c] = 1.0;
  offset += config.chunk_tagset.size();
  out[offset + static_cast<std::size_t>(ne)] = 1.0;
  offset += kNumNeTags;
  for (long d : {d1, d2}) {
    const auto bits = encode_position(d);
    for (std::size_t b = 0; b < kPositionBits; ++b) out[offset + b] = bits[b];
    offset += kPositionBits;
  }
}

std::vector<double> encode_token(std::string_view surface, NeTag ne, const std::string& pos,
                                 const std::string& chunk, long d1, long d2,
                                 const EmbeddingTable& table, const FeatureConfig& config) {
  std::vector<double> out(feature_width(config, table));
  encode_token_into(out, surface, ne, pos, chunk, d1, d2, table, config);
  return out;
}

std::size_t window_start(std::size_t n, std::size_t max_len, std::size_t lo, std::size_t hi) {
  if (n <= max_len) return 0;
  const long mid = static_cast<long>((lo + hi) / 2);
  long start = mid - static_cast<long>(max_len / 2);
  // The window must include both ends whenever they fit.
  if (hi - lo < max_len) {
    start = std::min(start, static_cast<long>(lo));
    start = std::max(start, static_cast<long>(hi) - static_cast<long>(max_len) + 1);
  }
  start = std::clamp(start, 0L, static_cast<long>(n - max_len));
  return static_cast<std::size_t>(start);
}

PairInput build_pair_input(const Sentence& sentence, const CandidatePair& pair,
                           const EmbeddingTable& table, const FeatureConfig& config) {
  validate_feature_config(config);
  const BlindedSentence blinded = blind_entities(sentence, pair);
  const std::size_t d = feature_width(config, table);
  const std::size_t max_len = config.max_len;
  const long anchor = static_cast<long>(blinded.attribute_anchor);
  const long bookmark = static_cast<long>(blinded.bookmark_index);

  PairInput input;
  input.d = d;
  input.word_matrix = Tensor({max_len, d});
  input.path_matrix = Tensor({max_len, d});
  input.word_mask.assign(max_len, 0);
  input.path_mask.assign(max_len, 0);

  const std::size_t n = blinded.tokens.size();
  const std::size_t lo = std::min<std::size_t>(anchor, bookmark);
  const std::size_t hi = std::max<std::size_t>(anchor, bookmark);
  const std::size_t start = window_start(n, max_len, lo, hi);
  const std::size_t count = std::min(n - start, max_len);
  for (std::size_t r = 0; r < count; ++r) {
    const Token& t = blinded.tokens[start + r];
    const long i = static_cast<long>(start + r);
    encode_token_into(std::span<double>(input.word_matrix.data() + r * d, d), t.surface, t.ne,
                      t.pos, t.chunk, i - anchor, i - bookmark, table, config);
    input.word_mask[r] = 1;
  }

  if (config.use_shortest_path) {
    const DependencyPath path = shortest_dependency_path(
        blinded.tokens, blinded.attribute_anchor, blinded.bookmark_index);
    input.exact_path = path.exact;
    const std::size_t len = path.indices.size();
    const std::size_t pstart = window_start(len, max_len, 0, len - 1);
    const std::size_t pcount = std::min(len - pstart, max_len);
    const long bookmark_pos = static_cast<long>(len - 1);
    for (std::size_t r = 0; r < pcount; ++r) {
      const long k = static_cast<long>(pstart + r);
      const Token& t = blinded.tokens[path.indices[pstart + r]];
      encode_token_into(std::span<double>(input.path_matrix.data() + r * d, d), t.surface, t.ne,
                        t.pos, t.chunk, k, k - bookmark_pos, table, config);
      input.path_mask[r] = 1;
    }
  }

  const std::size_t sdim = sentence_vec_width(config, table);
  if (sentence.sentence_embedding) {
    if (sentence.sentence_embedding->size() != sdim) {
      throw std::invalid_argument("sentence '" + sentence.id + "' embedding has " +
                                  std::to_string(sentence.sentence_embedding->size()) +
                                  " values, expected " + std::to_string(sdim));
    }
    input.sentence_vec = *sentence.sentence_embedding;
  } else {
    if (sdim != table.dim()) {
      throw std::invalid_argument("sentence '" + sentence.id +
                                  "' has no sentence embedding and the fallback width " +
                                  std::to_string(table.dim()) + " differs from " +
                                  std::to_string(sdim));
    }
    input.sentence_vec.assign(sdim, 0.0);
    std::size_t found = 0;
    for (const Token& t : sentence.tokens) {
      const auto* v = table.find(t.surface);
      if (!v) continue;
      for (std::size_t i = 0; i < sdim; ++i) input.sentence_vec[i] += (*v)[i];
      ++found;
    }
    if (found) {
      for (double& x : input.sentence_vec) x /= static_cast<double>(found);
    }
  }
  return input;
}

std::vector<std::string> corpus_words(const std::vector<Sentence>& sentences) {
  std::set<std::string> words;
  for (const Sentence& s : sentences)
    for (const Token& t : s.tokens) words.insert(to_lower(t.surface));
  words.insert(std::string(kBookmarkToken));
  words.insert(std::string(kOtherBookmarkToken));
  return {words.begin(), words.end()};
}

}  // namespace lesionattr
