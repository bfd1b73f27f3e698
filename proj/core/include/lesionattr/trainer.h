#ifndef LESIONATTR_TRAINER_H_
#define LESIONATTR_TRAINER_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lesionattr/corpus.h"
#include "lesionattr/features.h"
#include "lesionattr/metrics.h"
#include "lesionattr/model.h"
#include "lesionattr/rules.h"

namespace lesionattr {

// Candidate pairs of a set of sentences together with their encoded inputs.
struct Example {
  CandidatePair pair;
  std::size_t sentence = 0;  // index into Dataset::sentences
  PairInput input;
};

struct Dataset {
  std::vector<Sentence> sentences;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  const Sentence& sentence_of(const Example& e) const { return sentences[e.sentence]; }
};

// Encodes every candidate pair. Trailing padding rows are dropped from the
// stored matrices (the model ignores them) to keep memory proportional to the
// real sentence lengths. With `require_gold`, unlabeled pairs are an error.
Dataset build_dataset(std::vector<Sentence> sentences, const EmbeddingTable& table,
                      const FeatureConfig& config, bool require_gold);

// Removes trailing rows whose mask is 0 (keeps at least one row).
void trim_padding(PairInput& input);

enum class StopMode {
  kPatience,        // stop after `patience` epochs without a new best dev loss
  kFixedAfterStall  // run exactly `patience` more epochs after the first stall
};

struct TrainConfig {
  double lr = 0.0007;
  std::size_t batch_size = 128;
  double dropout_p = 0.5;
  std::size_t patience_epochs = 10;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 1;
  StopMode stop_mode = StopMode::kPatience;
  // Worker threads for the per-batch gradient computation; 0 = hardware
  // concurrency. Results do not depend on this value.
  std::size_t threads = 0;
};

void validate_train_config(const TrainConfig& config);

// Early-stopping bookkeeping over a stream of dev losses.
class EarlyStopping {
 public:
  EarlyStopping(std::size_t patience, StopMode mode) : patience_(patience), mode_(mode) {}

  // Records the loss of the next epoch; returns true when training should stop.
  bool observe(double dev_loss);
  bool improved() const { return improved_; }
  std::size_t best_epoch() const { return best_epoch_; }  // 1-based, 0 before any epoch
  double best_loss() const { return best_loss_; }
  std::size_t epochs() const { return epochs_; }

 private:
  std::size_t patience_;
  StopMode mode_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  double best_loss_ = 0.0;
  bool improved_ = false;
  std::size_t first_stall_ = 0;  // 1-based epoch, 0 = no stall yet
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_macro_f1 = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t chosen_epoch = 0;

  bool operator==(const TrainHistory&) const = default;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  Model model;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Minibatch Adam with seeded shuffling and early stopping on dev loss; the
// returned model holds the parameters of the best dev-loss epoch.
TrainResult train(const Dataset& train_set, const Dataset& dev_set, ModelConfig model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch = {});

// Mean cross-entropy over a dataset, evaluation mode.
double dataset_loss(const Model& model, const Dataset& data);

struct Prediction {
  CandidatePair pair;  // with `predicted` filled
  std::array<double, kNumLabels> probabilities{};
  Label model_label = Label::kRelevant;
  std::optional<Label> rule_label;
};

// Forward-argmax per pair, overridden by a firing rule when `rules` is given.
std::vector<Prediction> predict(const Model& model, const Dataset& data,
                                const RuleSet* rules = nullptr);

// Metrics of predict(). Throws on an empty dataset or missing gold labels.
Metrics evaluate(const Model& model, const Dataset& data, const RuleSet* rules = nullptr);

// Rules alone (Relevant default), through the same Metrics path.
Metrics evaluate_rules(const Dataset& data, const RuleSet& rules);
std::vector<CandidatePair> rule_predictions(const Dataset& data, const RuleSet& rules);

// One JSON object per pair: ids, mention, gold (if any), predicted label,
// class probabilities and the fired rule label (if any).
void write_predictions(const std::filesystem::path& path, const Dataset& data,
                       const std::vector<Prediction>& predictions);
std::vector<CandidatePair> read_predictions(const std::filesystem::path& path);

}  // namespace lesionattr

#endif  // LESIONATTR_TRAINER_H_
