#include "lesionattr/pipeline.h"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lesionattr {
namespace {

using nlohmann::json;

constexpr std::string_view kModelFormat = "lesionattr.model";
constexpr int kModelFormatVersion = 1;

void reject_unknown(const json& section, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, value] : section.items()) {
    if (!known.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

Tagset tagset_from(const json& value, const std::filesystem::path& base_dir) {
  if (value.is_array()) return Tagset(value.get<std::vector<std::string>>());
  std::filesystem::path p = value.get<std::string>();
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return load_tagset(p);
}

std::string_view pooling_name(PoolingMode mode) {
  return mode == PoolingMode::kMax ? "max" : "average";
}

std::string_view stop_mode_name(StopMode mode) {
  return mode == StopMode::kFixedAfterStall ? "fixed_after_stall" : "patience";
}

json model_to_json(const ModelConfig& m) {
  return {{"heads", m.heads},
          {"head_dim", m.head_dim},
          {"conv_window", m.conv_window},
          {"fc_sizes", m.fc_sizes},
          {"dropout_p", m.dropout_p},
          {"variant", std::string(variant_name(m.variant))},
          {"pooling", std::string(pooling_name(m.pooling))}};
}

void model_from_json(const json& j, ModelConfig& m, const std::string& where) {
  reject_unknown(j, {"heads", "head_dim", "conv_window", "fc_sizes", "dropout_p", "variant", "pooling"},
                 where);
  m.heads = j.value("heads", m.heads);
  m.head_dim = j.value("head_dim", m.head_dim);
  m.conv_window = j.value("conv_window", m.conv_window);
  m.fc_sizes = j.value("fc_sizes", m.fc_sizes);
  m.dropout_p = j.value("dropout_p", m.dropout_p);
  if (j.contains("variant")) {
    const auto v = parse_variant(j.at("variant").get<std::string>());
    if (!v) throw ConfigError(where + ": variant must be MULTI_HEAD or CNN_BASELINE");
    m.variant = *v;
  }
  if (j.contains("pooling")) {
    const std::string p = j.at("pooling").get<std::string>();
    if (p == "average") {
      m.pooling = PoolingMode::kAverage;
    } else if (p == "max") {
      m.pooling = PoolingMode::kMax;
    } else {
      throw ConfigError(where + ": pooling must be average or max");
    }
  }
}

}  // namespace

Tagset default_pos_tagset() {
  return Tagset({"CC",  "CD",  "DT",   "EX",  "FW",  "IN",  "JJ",  "JJR", "JJS",  "LS",
                 "MD",  "NN",  "NNS",  "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB",
                 "RBR", "RBS", "RP",   "SYM", "TO",  "UH",  "VB",  "VBD", "VBG",  "VBN",
                 "VBP", "VBZ", "WDT",  "WP",  "WP$", "WRB", ".",   ",",   ":",    "(",
                 ")",   "``",  "''",   "HYPH"});
}

Tagset default_chunk_tagset() {
  return Tagset({"O",      "B-NP",   "I-NP",   "B-VP",   "I-VP",   "B-PP",   "I-PP",   "B-ADJP",
                 "I-ADJP", "B-ADVP", "I-ADVP", "B-SBAR", "I-SBAR", "B-PRT",  "I-PRT",  "B-CONJP",
                 "I-CONJP", "B-INTJ", "I-INTJ", "B-LST", "I-LST",  "B-UCP",  "I-UCP"});
}

RunConfig default_run_config() {
  RunConfig c;
  c.features.pos_tagset = default_pos_tagset();
  c.features.chunk_tagset = default_chunk_tagset();
  return c;
}

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir,
                           const std::string& source_name) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(source_name + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(source_name + ": top level must be an object");
  RunConfig c = default_run_config();
  try {
    reject_unknown(doc, {"features", "model", "train"}, source_name);
    if (doc.contains("features")) {
      const json& f = doc.at("features");
      const std::string where = source_name + ": features";
      reject_unknown(f, {"max_len", "pos_tagset", "chunk_tagset", "use_shortest_path",
                         "sentence_embedding_dim", "word_dim", "embeddings", "embedding_seed"},
                     where);
      c.features.max_len = f.value("max_len", c.features.max_len);
      c.features.use_shortest_path = f.value("use_shortest_path", c.features.use_shortest_path);
      c.features.sentence_embedding_dim =
          f.value("sentence_embedding_dim", c.features.sentence_embedding_dim);
      if (f.contains("pos_tagset")) c.features.pos_tagset = tagset_from(f.at("pos_tagset"), base_dir);
      if (f.contains("chunk_tagset")) {
        c.features.chunk_tagset = tagset_from(f.at("chunk_tagset"), base_dir);
      }
      c.word_dim = f.value("word_dim", c.word_dim);
      c.embedding_seed = f.value("embedding_seed", c.embedding_seed);
      if (f.contains("embeddings")) {
        std::filesystem::path p = f.at("embeddings").get<std::string>();
        if (!p.empty() && p.is_relative() && !base_dir.empty()) p = base_dir / p;
        c.embeddings = p;
      }
    }
    if (doc.contains("model")) model_from_json(doc.at("model"), c.model, source_name + ": model");
    if (doc.contains("train")) {
      const json& t = doc.at("train");
      const std::string where = source_name + ": train";
      reject_unknown(t, {"lr", "batch_size", "dropout_p", "patience_epochs", "max_epochs", "seed",
                         "stop_mode", "threads"},
                     where);
      c.train.lr = t.value("lr", c.train.lr);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.dropout_p = t.value("dropout_p", c.train.dropout_p);
      c.train.patience_epochs = t.value("patience_epochs", c.train.patience_epochs);
      c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
      c.train.seed = t.value("seed", c.train.seed);
      c.train.threads = t.value("threads", c.train.threads);
      if (t.contains("stop_mode")) {
        const std::string m = t.at("stop_mode").get<std::string>();
        if (m == "patience") {
          c.train.stop_mode = StopMode::kPatience;
        } else if (m == "fixed_after_stall") {
          c.train.stop_mode = StopMode::kFixedAfterStall;
        } else {
          throw ConfigError(where + ": stop_mode must be patience or fixed_after_stall");
        }
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(source_name + ": " + e.what());
  }
  // Training dropout drives the model's dropout layers.
  c.model.dropout_p = c.train.dropout_p;
  try {
    validate_feature_config(c.features);
    validate_model_config(c.model);
    validate_train_config(c.train);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source_name + ": " + e.what());
  }
  if (c.word_dim == 0) throw ConfigError(source_name + ": word_dim must be positive");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), path.parent_path(), path.string());
}

std::string run_config_to_json(const RunConfig& c) {
  json doc;
  doc["features"] = {{"max_len", c.features.max_len},
                     {"pos_tagset", c.features.pos_tagset.tags()},
                     {"chunk_tagset", c.features.chunk_tagset.tags()},
                     {"use_shortest_path", c.features.use_shortest_path},
                     {"sentence_embedding_dim", c.features.sentence_embedding_dim},
                     {"word_dim", c.word_dim},
                     {"embeddings", c.embeddings.string()},
                     {"embedding_seed", c.embedding_seed}};
  doc["model"] = model_to_json(c.model);
  doc["train"] = {{"lr", c.train.lr},
                  {"batch_size", c.train.batch_size},
                  {"dropout_p", c.train.dropout_p},
                  {"patience_epochs", c.train.patience_epochs},
                  {"max_epochs", c.train.max_epochs},
                  {"seed", c.train.seed},
                  {"stop_mode", std::string(stop_mode_name(c.train.stop_mode))},
                  {"threads", c.train.threads}};
  return doc.dump(2);
}

EmbeddingTable prepare_embeddings(const RunConfig& config, const std::vector<Sentence>& sentences) {
  if (!config.embeddings.empty()) {
    EmbeddingTable table = load_embeddings(config.embeddings);
    return table;
  }
  return EmbeddingTable::random_init(corpus_words(sentences), config.word_dim,
                                     config.embedding_seed);
}

void save_checkpoint(const std::filesystem::path& dir, const Model& model,
                     const FeatureConfig& features, const EmbeddingTable& embeddings) {
  std::filesystem::create_directories(dir);
  save_params(model.params(), dir / "params.json");
  save_embeddings(embeddings, dir / "embeddings.vec");
  json doc = {{"format", std::string(kModelFormat)},
              {"version", kModelFormatVersion},
              {"model", model_to_json(model.config())},
              {"features",
               {{"max_len", features.max_len},
                {"pos_tagset", features.pos_tagset.tags()},
                {"chunk_tagset", features.chunk_tagset.tags()},
                {"use_shortest_path", features.use_shortest_path},
                {"sentence_embedding_dim", features.sentence_embedding_dim}}},
              {"feature_width", model.feature_width()},
              {"sentence_dim", model.sentence_dim()},
              {"use_path", model.use_path()},
              {"word_dim", embeddings.dim()}};
  std::ofstream out(dir / "model.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "model.json").string());
  out << doc.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const std::filesystem::path meta_path = dir / "model.json";
  std::ifstream in(meta_path);
  if (!in) throw ConfigError("cannot open " + meta_path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(meta_path.string() + ": invalid JSON: " + e.what());
  }
  const std::string where = meta_path.string();
  if (doc.value("format", std::string()) != kModelFormat ||
      doc.value("version", 0) != kModelFormatVersion) {
    throw ConfigError(where + ": not a lesionattr model description");
  }
  ModelConfig model_config;
  FeatureConfig features;
  std::size_t width = 0, sentence_dim = 0, word_dim = 0;
  bool use_path = true;
  try {
    model_from_json(doc.at("model"), model_config, where);
    const json& f = doc.at("features");
    features.max_len = f.at("max_len").get<std::size_t>();
    features.pos_tagset = Tagset(f.at("pos_tagset").get<std::vector<std::string>>());
    features.chunk_tagset = Tagset(f.at("chunk_tagset").get<std::vector<std::string>>());
    features.use_shortest_path = f.at("use_shortest_path").get<bool>();
    features.sentence_embedding_dim = f.at("sentence_embedding_dim").get<std::size_t>();
    width = doc.at("feature_width").get<std::size_t>();
    sentence_dim = doc.at("sentence_dim").get<std::size_t>();
    use_path = doc.at("use_path").get<bool>();
    word_dim = doc.at("word_dim").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  EmbeddingTable embeddings = load_embeddings(dir / "embeddings.vec");
  if (embeddings.dim() != word_dim) {
    throw ConfigError(where + ": embeddings have dimension " + std::to_string(embeddings.dim()) +
                      ", expected " + std::to_string(word_dim));
  }
  if (feature_width(features, embeddings) != width) {
    throw ConfigError(where + ": feature width does not match the stored tagsets and embeddings");
  }
  Model model(model_config, width, sentence_dim, use_path, 0);
  assign_params(model.params(), load_params(dir / "params.json"));
  return Checkpoint{std::move(model), std::move(features), std::move(embeddings)};
}

}  // namespace lesionattr
