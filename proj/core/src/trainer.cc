#include "lesionattr/trainer.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <thread>

#include "lesionattr/optim.h"

namespace lesionattr {

namespace {

// Fixed number of gradient partitions per batch. Each partition accumulates
// its examples in order and partitions are summed in index order, so the
// result is independent of how many threads run them.
constexpr std::size_t kGradientChunks = 8;

std::size_t argmax(const std::array<double, kNumLabels>& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

template <typename Fn>
void run_chunks(std::size_t chunks, std::size_t threads, Fn fn) {
  if (threads <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::vector<std::jthread> workers;
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&, t] {
      for (std::size_t c = t; c < chunks; c += threads) fn(c);
    });
  }
}

std::size_t resolve_threads(std::size_t requested) {
  std::size_t n = requested == 0 ? std::thread::hardware_concurrency() : requested;
  return std::clamp<std::size_t>(n, 1, kGradientChunks);
}

}  // namespace

// ---------------------------------------------------------------------------
// Datasets

void trim_padding(PairInput& input) {
  auto trim = [](Tensor& m, ad::Mask& mask) {
    std::size_t keep = 1;
    for (std::size_t r = 0; r < mask.size(); ++r)
      if (mask[r]) keep = r + 1;
    if (m.rank() != 2 || keep >= m.rows()) return;
    const std::size_t d = m.cols();
    std::vector<double> data(m.data(), m.data() + keep * d);
    m = Tensor({keep, d}, std::move(data));
    mask.resize(keep);
  };
  trim(input.word_matrix, input.word_mask);
  trim(input.path_matrix, input.path_mask);
}

Dataset build_dataset(std::vector<Sentence> sentences, const EmbeddingTable& table,
                      const FeatureConfig& config, bool require_gold) {
  Dataset data;
  data.sentences = std::move(sentences);
  for (std::size_t s = 0; s < data.sentences.size(); ++s) {
    const Sentence& sentence = data.sentences[s];
    for (CandidatePair& pair : generate_candidates(sentence)) {
      if (require_gold && !pair.gold) {
        throw CorpusError("sentence '" + sentence.id + "': candidate pair without a gold label");
      }
      Example e;
      e.input = build_pair_input(sentence, pair, table, config);
      trim_padding(e.input);
      e.pair = std::move(pair);
      e.sentence = s;
      data.examples.push_back(std::move(e));
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Early stopping

void validate_train_config(const TrainConfig& c) {
  if (!(c.lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (c.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (c.patience_epochs == 0) throw std::invalid_argument("patience_epochs must be positive");
  if (c.max_epochs == 0) throw std::invalid_argument("max_epochs must be positive");
  if (c.dropout_p < 0.0 || c.dropout_p >= 1.0) {
    throw std::invalid_argument("dropout_p must lie in [0, 1)");
  }
}

bool EarlyStopping::observe(double dev_loss) {
  ++epochs_;
  improved_ = best_epoch_ == 0 || dev_loss < best_loss_;
  if (improved_) {
    best_loss_ = dev_loss;
    best_epoch_ = epochs_;
  } else if (first_stall_ == 0) {
    first_stall_ = epochs_;
  }
  if (mode_ == StopMode::kPatience) return epochs_ - best_epoch_ >= patience_;
  // The stalled epoch itself counts as the first of the extra epochs.
  return first_stall_ != 0 && epochs_ - first_stall_ + 1 >= patience_;
}

// ---------------------------------------------------------------------------
// Training

double dataset_loss(const Model& model, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("dataset_loss: empty dataset");
  const auto bound = model.bind(false);
  Rng unused(0);
  double total = 0.0;
  for (const Example& e : data.examples) {
    if (!e.pair.gold) throw std::invalid_argument("dataset_loss: pair without gold label");
    total += loss(model.logits(e.input, bound, false, unused), *e.pair.gold).value()[0];
  }
  return total / static_cast<double>(data.size());
}

TrainResult train(const Dataset& train_set, const Dataset& dev_set, ModelConfig model_config,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  validate_train_config(cfg);
  if (train_set.empty() || dev_set.empty()) {
    throw std::invalid_argument("train: training and dev sets must be non-empty");
  }
  for (const Dataset* d : {&train_set, &dev_set}) {
    for (const Example& e : d->examples) {
      if (!e.pair.gold) throw std::invalid_argument("train: pair without gold label");
    }
  }
  const PairInput& probe = train_set.examples.front().input;
  model_config.dropout_p = cfg.dropout_p;
  const Rng root(cfg.seed);
  Model model(model_config, probe.d, probe.sentence_vec.size(),
              probe.path_mask.size() > 0 &&
                  std::any_of(probe.path_mask.begin(), probe.path_mask.end(),
                              [](std::uint8_t m) { return m != 0; }),
              root.split(0).next_u64());

  const std::size_t threads = resolve_threads(cfg.threads);
  AdamState adam;
  EarlyStopping stopper(cfg.patience_epochs, cfg.stop_mode);
  ParamStore best = model.params();
  TrainHistory history;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng epoch_rng = root.split(epoch);
    epoch_rng.shuffle(order);
    double loss_sum = 0.0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      std::vector<std::vector<Tensor>> chunk_grads(kGradientChunks);
      std::vector<double> chunk_loss(kGradientChunks, 0.0);

      run_chunks(kGradientChunks, threads, [&](std::size_t c) {
        const std::size_t lo = count * c / kGradientChunks;
        const std::size_t hi = count * (c + 1) / kGradientChunks;
        if (lo == hi) return;
        const auto bound = model.bind(true);
        for (std::size_t k = lo; k < hi; ++k) {
          const Example& e = train_set.examples[order[start + k]];
          Rng dropout_rng = epoch_rng.split(start + k + 1);
          ad::Var l = loss(model.logits(e.input, bound, true, dropout_rng), *e.pair.gold);
          chunk_loss[c] += l.value()[0];
          ad::backward(l);
        }
        auto& grads = chunk_grads[c];
        grads.reserve(bound.size());
        for (const ad::Var& p : bound) {
          grads.push_back(p.grad().empty() ? Tensor::zeros_like(p.value()) : p.grad());
        }
      });

      std::vector<Tensor> batch_grad;
      double batch_loss = 0.0;
      for (std::size_t c = 0; c < kGradientChunks; ++c) {
        batch_loss += chunk_loss[c];
        if (chunk_grads[c].empty()) continue;
        if (batch_grad.empty()) {
          batch_grad = std::move(chunk_grads[c]);
        } else {
          for (std::size_t i = 0; i < batch_grad.size(); ++i) {
            batch_grad[i].add_inplace(chunk_grads[c][i]);
          }
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingDiverged("non-finite training loss in epoch " + std::to_string(epoch) +
                               " at batch starting " + std::to_string(start));
      }
      const double inv = 1.0 / static_cast<double>(count);
      for (Tensor& g : batch_grad)
        for (double& v : g.values()) v *= inv;
      adam_step(model.params().values(), batch_grad, adam, cfg.lr);
      loss_sum += batch_loss;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(train_set.size());
    {
      const auto bound = model.bind(false);
      Rng unused(0);
      double dev_loss = 0.0;
      Confusion confusion{};
      for (const Example& e : dev_set.examples) {
        ad::Var z = model.logits(e.input, bound, false, unused);
        dev_loss += loss(z, *e.pair.gold).value()[0];
        const auto p = ad::softmax(z.value().values());
        const std::size_t guess =
            static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        ++confusion[label_index(*e.pair.gold)][guess];
      }
      record.dev_loss = dev_loss / static_cast<double>(dev_set.size());
      record.dev_macro_f1 = compute_prf(confusion).macro.f1;
    }
    if (!std::isfinite(record.dev_loss)) {
      throw TrainingDiverged("non-finite dev loss in epoch " + std::to_string(epoch));
    }
    history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);

    const bool stop = stopper.observe(record.dev_loss);
    if (stopper.improved()) best = model.params();
    if (stop) break;
  }

  history.chosen_epoch = stopper.best_epoch();
  assign_params(model.params(), best);
  return TrainResult{std::move(model), std::move(history)};
}

// ---------------------------------------------------------------------------
// Prediction and evaluation

std::vector<Prediction> predict(const Model& model, const Dataset& data, const RuleSet* rules) {
  const auto bound = model.bind(false);
  Rng unused(0);
  std::vector<Prediction> out;
  out.reserve(data.size());
  for (const Example& e : data.examples) {
    Prediction p;
    p.pair = e.pair;
    const auto z = model.logits(e.input, bound, false, unused);
    const auto probs = ad::softmax(z.value().values());
    std::copy(probs.begin(), probs.end(), p.probabilities.begin());
    p.model_label = label_from_index(argmax(p.probabilities));
    if (rules) {
      const Sentence& s = data.sentence_of(e);
      p.rule_label = apply_rules(s.tokens, s.mentions[e.pair.mention_index].span, *rules);
    }
    p.pair.predicted = postprocess(p.model_label, p.rule_label);
    out.push_back(std::move(p));
  }
  return out;
}

Metrics evaluate(const Model& model, const Dataset& data, const RuleSet* rules) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  std::vector<CandidatePair> pairs;
  for (Prediction& p : predict(model, data, rules)) pairs.push_back(std::move(p.pair));
  return compute_prf(build_confusion(pairs));
}

std::vector<CandidatePair> rule_predictions(const Dataset& data, const RuleSet& rules) {
  std::vector<CandidatePair> pairs;
  pairs.reserve(data.size());
  for (const Example& e : data.examples) {
    CandidatePair p = e.pair;
    p.predicted = rule_classify(data.sentence_of(e), p, rules);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

Metrics evaluate_rules(const Dataset& data, const RuleSet& rules) {
  if (data.empty()) throw std::invalid_argument("evaluate_rules: empty dataset");
  return compute_prf(build_confusion(rule_predictions(data, rules)));
}

void write_predictions(const std::filesystem::path& path, const Dataset& data,
                       const std::vector<Prediction>& predictions) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const Prediction& p = predictions[i];
    const Sentence& s = data.sentence_of(data.examples.at(i));
    const AttributeMention& m = s.mentions.at(p.pair.mention_index);
    nlohmann::json j = {{"sentence_id", p.pair.sentence_id},
                        {"bookmark_index", p.pair.bookmark_index},
                        {"mention_index", p.pair.mention_index},
                        {"mention", m.normalized},
                        {"predicted", label_name(*p.pair.predicted)},
                        {"model_label", label_name(p.model_label)}};
    for (Label l : kAllLabels) {
      j["probabilities"][std::string(label_name(l))] = p.probabilities[label_index(l)];
    }
    if (p.pair.gold) j["gold"] = label_name(*p.pair.gold);
    if (p.rule_label) j["rule_label"] = label_name(*p.rule_label);
    out << j.dump() << '\n';
  }
}

std::vector<CandidatePair> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<CandidatePair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CandidatePair p;
      p.sentence_id = j.at("sentence_id").get<std::string>();
      p.bookmark_index = j.at("bookmark_index").get<std::size_t>();
      p.mention_index = j.at("mention_index").get<std::size_t>();
      p.predicted = parse_label(j.at("predicted").get<std::string>());
      if (j.contains("gold")) p.gold = parse_label(j.at("gold").get<std::string>());
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace lesionattr
