// Forward and forward+backward cost of one pair at the default model size.

#include <benchmark/benchmark.h>

#include "lesionattr/autograd.h"
#include "lesionattr/model.h"

namespace lesionattr {
namespace {

// Feature width of the default setup: 100-dim words, 21 feature bits + tags.
constexpr std::size_t kWidth = 141;

PairInput random_input(std::size_t rows, Rng& rng) {
  PairInput in;
  in.d = kWidth;
  in.word_matrix = Tensor({rows, kWidth});
  in.path_matrix = Tensor({rows, kWidth});
  for (std::size_t i = 0; i < rows * kWidth; ++i) {
    in.word_matrix.data()[i] = rng.normal();
    in.path_matrix.data()[i] = rng.normal();
  }
  in.word_mask.assign(rows, 1);
  in.path_mask.assign(rows, 1);
  in.sentence_vec.assign(100, 0.1);
  return in;
}

Model make_model(ModelVariant variant) {
  ModelConfig cfg;
  cfg.variant = variant;
  return Model(cfg, kWidth, 100, true, 1);
}

void BM_Forward(benchmark::State& state) {
  const Model model = make_model(static_cast<ModelVariant>(state.range(1)));
  Rng rng(7);
  const PairInput in = random_input(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(in));
}

void BM_ForwardBackward(benchmark::State& state) {
  const Model model = make_model(static_cast<ModelVariant>(state.range(1)));
  Rng rng(7);
  const PairInput in = random_input(static_cast<std::size_t>(state.range(0)), rng);
  auto bound = model.bind(true);
  for (auto _ : state) {
    const ad::Var l = loss(model.logits(in, bound, true, rng), Label::kRelevant);
    ad::backward(l);
    for (ad::Var& p : bound) p.zero_grad();
  }
}

const auto kMultiHead = static_cast<long>(ModelVariant::kMultiHead);
const auto kCnn = static_cast<long>(ModelVariant::kCnnBaseline);

BENCHMARK(BM_Forward)->ArgsProduct({{16, 32, 64}, {kMultiHead, kCnn}});
BENCHMARK(BM_ForwardBackward)->ArgsProduct({{16, 32, 64}, {kMultiHead, kCnn}});

}  // namespace
}  // namespace lesionattr

BENCHMARK_MAIN();
