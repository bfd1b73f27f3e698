#ifndef LESIONATTR_PIPELINE_H_
#define LESIONATTR_PIPELINE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lesionattr/corpus.h"
#include "lesionattr/features.h"
#include "lesionattr/model.h"
#include "lesionattr/trainer.h"

namespace lesionattr {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Penn Treebank POS tags and IOB chunk tags, used when a run does not name
// its own tagset files.
Tagset default_pos_tagset();
Tagset default_chunk_tagset();

// Everything a training run needs besides the corpus files. The JSON layout
// mirrors the struct field names:
//   {"features": {"max_len", "pos_tagset", "chunk_tagset", "use_shortest_path",
//                 "sentence_embedding_dim", "word_dim", "embeddings", "embedding_seed"},
//    "model":    {"heads", "head_dim", "conv_window", "fc_sizes", "dropout_p",
//                 "variant", "pooling"},
//    "train":    {"lr", "batch_size", "dropout_p", "patience_epochs", "max_epochs",
//                 "seed", "stop_mode", "threads"}}
// Tagsets may be given as a file path or an inline list. Relative paths are
// resolved against the config file's directory. Unknown keys are errors.
struct RunConfig {
  FeatureConfig features;
  std::size_t word_dim = 50;
  std::filesystem::path embeddings;  // empty: seeded random vectors
  std::uint64_t embedding_seed = 13;
  ModelConfig model;
  TrainConfig train;
};

RunConfig default_run_config();
RunConfig parse_run_config(std::string_view json_text,
                           const std::filesystem::path& base_dir = {},
                           const std::string& source_name = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

// Pretrained vectors when configured, otherwise random vectors over the words
// of `sentences`.
EmbeddingTable prepare_embeddings(const RunConfig& config, const std::vector<Sentence>& sentences);

// A trained model with everything needed to encode new inputs.
struct Checkpoint {
  Model model;
  FeatureConfig features;
  EmbeddingTable embeddings;
};

// Writes params.json, model.json and embeddings.vec into `dir`.
void save_checkpoint(const std::filesystem::path& dir, const Model& model,
                     const FeatureConfig& features, const EmbeddingTable& embeddings);
// Rebuilds the model from model.json and checks every parameter shape.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace lesionattr

#endif  // LESIONATTR_PIPELINE_H_
