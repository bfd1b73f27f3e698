// Command-line front end: corpus preparation, training, evaluation and
// synthetic data generation.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <tuple>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lesionattr/corpus.h"
#include "lesionattr/metrics.h"
#include "lesionattr/pipeline.h"
#include "lesionattr/rules.h"
#include "lesionattr/synth.h"
#include "lesionattr/trainer.h"

namespace fs = std::filesystem;
using namespace lesionattr;

namespace {

fs::path data_dir() {
  if (const char* env = std::getenv("LESIONATTR_DATA")) return env;
  const fs::path installed = LESIONATTR_DEFAULT_DATA_DIR;
  if (fs::exists(installed / "rules.tsv")) return installed;
  return LESIONATTR_SOURCE_DATA_DIR;
}

Vocabulary read_vocabulary(const std::string& vocab, const std::string& lemmas) {
  Vocabulary v = load_vocabulary(vocab.empty() ? data_dir() / "vocabulary.tsv" : fs::path(vocab));
  const fs::path lemma_path = lemmas.empty() ? data_dir() / "lemmas.tsv" : fs::path(lemmas);
  if (fs::exists(lemma_path)) load_lemma_table(lemma_path, v);
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<Sentence> read_sentences(const fs::path& path) {
  LoadedCorpus c = load_corpus(path);
  if (c.unknown_ne_tags > 0) {
    std::cerr << path.string() << ": " << c.unknown_ne_tags
              << " unknown NE tags read as NONE\n";
  }
  return std::move(c.sentences);
}

void print_metrics(const std::vector<std::pair<std::string, Metrics>>& rows,
                   const std::string& json_path) {
  std::cout << format_metrics_table(rows);
  if (!json_path.empty()) {
    std::ostringstream out;
    out << "{\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out << "\"" << rows[i].first << "\": " << metrics_to_json(rows[i].second, 2)
          << (i + 1 < rows.size() ? ",\n" : "\n");
    }
    out << "}\n";
    write_text(json_path, out.str());
  }
}

int run_ingest(const std::string& corpus, const std::string& vocab, const std::string& lemmas,
               const std::string& out, bool rematch) {
  const Vocabulary v = read_vocabulary(vocab, lemmas);
  std::vector<Sentence> sentences = read_sentences(corpus);
  std::size_t matched = 0, candidates = 0;
  for (Sentence& s : sentences) {
    for (Token& t : s.tokens) {
      if (t.lemma.empty()) t.lemma = lemmatize(t.surface, v.lemma_table());
    }
    if (s.mentions.empty() || rematch) {
      if (rematch && !s.pairs.empty()) {
        throw CorpusError("sentence '" + s.id + "': cannot re-match mentions of an annotated sentence");
      }
      s.mentions = match_attributes(s, v);
      ++matched;
    }
    candidates += generate_candidates(s).size();
  }
  save_corpus(out, sentences);
  std::cout << sentences.size() << " sentences, " << matched << " matched, " << candidates
            << " candidate pairs -> " << out << '\n';
  return 0;
}

int run_split(const std::string& corpus, const std::string& out_dir, double train, double dev,
              double test, std::uint64_t seed) {
  const std::vector<Sentence> sentences = read_sentences(corpus);
  const CorpusSplit split = split_corpus(sentences, {train, dev, test}, seed);
  if (split.warning) std::cerr << "warning: " << *split.warning << '\n';
  fs::create_directories(out_dir);
  save_corpus(fs::path(out_dir) / "train.jsonl", split.train);
  save_corpus(fs::path(out_dir) / "dev.jsonl", split.dev);
  save_corpus(fs::path(out_dir) / "test.jsonl", split.test);
  std::cout << format_corpus_stats(
      corpus_stats({{"Training", split.train}, {"Validation", split.dev}, {"Test", split.test}}));
  return 0;
}

int run_train(const std::string& config_path, const std::string& train_path,
              const std::string& dev_path, const std::string& out_dir,
              const std::string& variant, std::int64_t seed) {
  RunConfig config = config_path.empty() ? default_run_config() : load_run_config(config_path);
  if (!variant.empty()) {
    const auto v = parse_variant(variant);
    if (!v) throw ConfigError("unknown variant " + variant);
    config.model.variant = *v;
  }
  if (seed >= 0) config.train.seed = static_cast<std::uint64_t>(seed);
  std::vector<Sentence> train_sentences = read_sentences(train_path);
  std::vector<Sentence> dev_sentences = read_sentences(dev_path);
  std::vector<Sentence> all = train_sentences;
  all.insert(all.end(), dev_sentences.begin(), dev_sentences.end());
  const EmbeddingTable table = prepare_embeddings(config, all);
  const Dataset train_set = build_dataset(std::move(train_sentences), table, config.features, true);
  const Dataset dev_set = build_dataset(std::move(dev_sentences), table, config.features, true);
  std::cout << "train pairs " << train_set.size() << ", dev pairs " << dev_set.size()
            << ", feature width " << feature_width(config.features, table) << '\n';

  const auto start = std::chrono::steady_clock::now();
  TrainResult result = train(train_set, dev_set, config.model, config.train, [&](const EpochRecord& r) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "epoch " << std::setw(3) << r.epoch << "  train_loss " << std::fixed
              << std::setprecision(4) << r.train_loss << "  dev_loss " << r.dev_loss
              << "  dev_macro_f1 " << r.dev_macro_f1 << "  " << std::setprecision(1) << secs
              << "s\n"
              << std::defaultfloat << std::flush;
  });
  save_checkpoint(out_dir, result.model, config.features, table);
  write_text(fs::path(out_dir) / "config.json", run_config_to_json(config) + "\n");
  std::ostringstream hist;
  hist << "{\"chosen_epoch\": " << result.history.chosen_epoch << ", \"epochs\": [";
  for (std::size_t i = 0; i < result.history.epochs.size(); ++i) {
    const EpochRecord& r = result.history.epochs[i];
    hist << (i ? ", " : "") << std::setprecision(17) << "{\"epoch\": " << r.epoch
         << ", \"train_loss\": " << r.train_loss << ", \"dev_loss\": " << r.dev_loss
         << ", \"dev_macro_f1\": " << r.dev_macro_f1 << "}";
  }
  hist << "]}\n";
  write_text(fs::path(out_dir) / "history.json", hist.str());
  std::cout << "best epoch " << result.history.chosen_epoch << " -> " << out_dir << '\n';
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& test_path,
             const std::string& rules_path, bool use_rules, const std::string& json_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Dataset data = build_dataset(read_sentences(test_path), ckpt.embeddings, ckpt.features, true);
  std::vector<std::pair<std::string, Metrics>> rows;
  rows.emplace_back(std::string(variant_name(ckpt.model.config().variant)), evaluate(ckpt.model, data));
  if (use_rules || !rules_path.empty()) {
    const RuleSet rules =
        compile_rules(rules_path.empty() ? data_dir() / "rules.tsv" : fs::path(rules_path));
    rows.emplace_back(rows.front().first + " + rules", evaluate(ckpt.model, data, &rules));
    rows.emplace_back("Rule-based", evaluate_rules(data, rules));
  }
  print_metrics(rows, json_path);
  return 0;
}

int run_predict(const std::string& checkpoint, const std::string& corpus,
                const std::string& rules_path, bool use_rules, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Dataset data = build_dataset(read_sentences(corpus), ckpt.embeddings, ckpt.features, false);
  RuleSet rules;
  if (use_rules || !rules_path.empty()) {
    rules = compile_rules(rules_path.empty() ? data_dir() / "rules.tsv" : fs::path(rules_path));
  }
  const auto predictions = predict(ckpt.model, data, rules.empty() ? nullptr : &rules);
  write_predictions(out, data, predictions);
  std::cout << predictions.size() << " predictions -> " << out << '\n';
  return 0;
}

int run_synth(const std::string& vocab, const std::string& lemmas, const std::string& templates,
              std::size_t n, std::uint64_t seed, const std::vector<double>& mix, double hard,
              const std::string& out) {
  SynthConfig config;
  config.vocabulary = read_vocabulary(vocab, lemmas);
  config.templates =
      load_templates(templates.empty() ? data_dir() / "templates.json" : fs::path(templates));
  config.n_sentences = n;
  config.seed = seed;
  config.hard_fraction = hard;
  if (!mix.empty()) {
    if (mix.size() != 3) throw SynthError("--mix takes three proportions");
    config.mix = {mix[0], mix[1], mix[2]};
  }
  const std::vector<Sentence> sentences = generate_corpus(config);
  save_corpus(out, sentences);
  std::cout << format_corpus_stats(corpus_stats({{"Generated", sentences}}));
  return 0;
}

int run_report(const std::string& gold_path, const std::vector<std::string>& prediction_specs,
               const std::vector<std::string>& split_specs, const std::string& json_path) {
  auto parse_spec = [](const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) return std::pair<std::string, std::string>(fs::path(spec).stem().string(), spec);
    return std::pair<std::string, std::string>(spec.substr(0, eq), spec.substr(eq + 1));
  };
  if (!split_specs.empty()) {
    std::vector<std::pair<std::string, std::vector<Sentence>>> splits;
    for (const std::string& spec : split_specs) {
      auto [name, path] = parse_spec(spec);
      splits.emplace_back(name, read_sentences(path));
    }
    std::cout << format_corpus_stats(corpus_stats(splits)) << '\n';
  }
  if (prediction_specs.empty()) return 0;
  if (gold_path.empty()) throw std::invalid_argument("--gold is required with --predictions");
  const std::vector<CandidatePair> gold = generate_candidates(read_sentences(gold_path));
  std::vector<std::pair<std::string, Metrics>> rows;
  std::vector<std::pair<std::string, ErrorReport>> reports;
  for (const std::string& spec : prediction_specs) {
    auto [name, path] = parse_spec(spec);
    const std::vector<CandidatePair> predicted = read_predictions(path);
    std::map<std::tuple<std::string, std::size_t, std::size_t>, Label> by_key;
    for (const CandidatePair& p : predicted) {
      if (p.predicted) by_key[{p.sentence_id, p.bookmark_index, p.mention_index}] = *p.predicted;
    }
    std::vector<CandidatePair> joined;
    for (CandidatePair g : gold) {
      auto it = by_key.find({g.sentence_id, g.bookmark_index, g.mention_index});
      if (it == by_key.end() || !g.gold) {
        throw std::invalid_argument(name + ": no prediction or gold label for a pair of sentence '" +
                                    g.sentence_id + "'");
      }
      g.predicted = it->second;
      joined.push_back(std::move(g));
    }
    rows.emplace_back(name, compute_prf(build_confusion(joined)));
    reports.emplace_back(name, error_report(gold, predicted));
  }
  print_metrics(rows, json_path);
  for (const auto& [name, report] : reports) {
    std::cout << '\n' << name << '\n' << format_error_report(report);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bookmark-attribute relation classification"};
  app.require_subcommand(1);

  std::string corpus, vocab, lemmas, out, config_path, train_path, dev_path, test_path, checkpoint,
      rules_path, json_path, templates, variant, gold;
  bool rematch = false, use_rules = false;
  double r_train = 0.6, r_dev = 0.2, r_test = 0.2, hard = 0.1;
  std::uint64_t seed = 1;
  std::int64_t train_seed = -1;
  std::size_t n = 2000;
  std::vector<double> mix;
  std::vector<std::string> predictions, splits;

  auto* ingest = app.add_subcommand("ingest", "Match attribute mentions and write annotated JSONL");
  ingest->add_option("--corpus", corpus, "Input corpus JSONL")->required();
  ingest->add_option("--vocab", vocab, "Attribute vocabulary TSV");
  ingest->add_option("--lemmas", lemmas, "Lemma table TSV");
  ingest->add_option("--out", out, "Output JSONL")->required();
  ingest->add_flag("--rematch", rematch, "Re-match sentences that already list mentions");

  auto* split = app.add_subcommand("split", "Split a corpus into train/dev/test by sentence");
  split->add_option("--corpus", corpus, "Labeled corpus JSONL")->required();
  split->add_option("--out-dir", out, "Writes train.jsonl, dev.jsonl, test.jsonl")->required();
  split->add_option("--train", r_train, "Training share")->capture_default_str();
  split->add_option("--dev", r_dev, "Dev share")->capture_default_str();
  split->add_option("--test", r_test, "Test share")->capture_default_str();
  split->add_option("--seed", seed, "Shuffle seed")->capture_default_str();

  auto* trn = app.add_subcommand("train", "Train a model and write a checkpoint directory");
  trn->add_option("--config", config_path, "Run config JSON");
  trn->add_option("--train", train_path)->required();
  trn->add_option("--dev", dev_path)->required();
  trn->add_option("--out", out, "Checkpoint directory")->required();
  trn->add_option("--variant", variant, "MULTI_HEAD or CNN_BASELINE (overrides the config)");
  trn->add_option("--seed", train_seed, "Training seed (overrides the config)");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled corpus");
  ev->add_option("--checkpoint", checkpoint)->required();
  ev->add_option("--test", test_path)->required();
  ev->add_flag("--rules", use_rules, "Also report model + rules and rules alone");
  ev->add_option("--rules-file", rules_path, "Rule table (default: shipped rules.tsv)");
  ev->add_option("--json", json_path, "Write metrics JSON here");

  auto* pr = app.add_subcommand("predict", "Write per-pair predictions as JSONL");
  pr->add_option("--checkpoint", checkpoint)->required();
  pr->add_option("--corpus", corpus)->required();
  pr->add_flag("--rules", use_rules, "Apply rule post-processing");
  pr->add_option("--rules-file", rules_path);
  pr->add_option("--out", out)->required();

  auto* sy = app.add_subcommand("synth", "Generate a synthetic labeled corpus");
  sy->add_option("--vocab", vocab);
  sy->add_option("--lemmas", lemmas);
  sy->add_option("--templates", templates);
  sy->add_option("-n,--sentences", n);
  sy->add_option("--seed", seed);
  sy->add_option("--mix", mix, "Relevant Uncertain Irrelevant proportions")->expected(3);
  sy->add_option("--hard-fraction", hard);
  sy->add_option("--out", out)->required();

  auto* rp = app.add_subcommand("report", "Corpus statistics, metrics and error buckets");
  rp->add_option("--gold", gold, "Labeled corpus the predictions refer to");
  rp->add_option("--predictions", predictions, "[name=]predictions.jsonl, repeatable");
  rp->add_option("--split", splits, "[name=]corpus.jsonl for the statistics table, repeatable");
  rp->add_option("--json", json_path);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return run_ingest(corpus, vocab, lemmas, out, rematch);
    if (*split) return run_split(corpus, out, r_train, r_dev, r_test, seed);
    if (*trn) return run_train(config_path, train_path, dev_path, out, variant, train_seed);
    if (*ev) return run_eval(checkpoint, test_path, rules_path, use_rules, json_path);
    if (*pr) return run_predict(checkpoint, corpus, rules_path, use_rules, out);
    if (*sy) return run_synth(vocab, lemmas, templates, n, seed, mix, hard, out);
    if (*rp) return run_report(gold, predictions, splits, json_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
