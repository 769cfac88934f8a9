#include <benchmark/benchmark.h>

#include <string>
#include <utility>
#include <vector>

#include "rpn2t/geometry.hpp"
#include "rpn2t/losses.hpp"
#include "rpn2t/netspec.hpp"
#include "rpn2t/ops.hpp"
#include "rpn2t/tracker.hpp"

using namespace rpn2t;

namespace {

Tensor random_tensor(std::vector<int> shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  rng.fill_normal(t, 1.0);
  return t;
}

// args: channels in, channels out, spatial size, kernel
void BM_Conv2d(benchmark::State& state) {
  const int ci = static_cast<int>(state.range(0)), co = static_cast<int>(state.range(1));
  const int n = static_cast<int>(state.range(2)), k = static_cast<int>(state.range(3));
  const Tensor x = random_tensor({1, ci, n, n}, 1);
  const Tensor w = random_tensor({co, ci, k, k}, 2);
  const Tensor b({co});
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 1, k / 2));
  state.SetItemsProcessed(state.iterations() * 2LL * ci * co * k * k * n * n);
}
BENCHMARK(BM_Conv2d)->Args({3, 16, 107, 7})->Args({24, 24, 14, 3})->Args({256, 256, 14, 3});

// teacher at 203 against its surgery student at 107
void BM_Backbone(benchmark::State& state) {
  const bool student = state.range(1) != 0;
  const NetworkSpec teacher = state.range(0) ? reference_teacher_spec() : tiny_teacher_spec();
  const NetworkSpec spec = student ? surgery(teacher) : teacher;
  Rng rng(3);
  const Network net = Network::random(spec, rng);
  const Tensor x = random_tensor({1, 3, spec.input_size, spec.input_size}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
  state.SetLabel(std::string(state.range(0) ? "reference" : "tiny") + "@" + std::to_string(spec.input_size));
}
BENCHMARK(BM_Backbone)->Args({0, 0})->Args({0, 1})->Args({1, 0})->Args({1, 1})->Unit(benchmark::kMillisecond);

void BM_MatchAnchors(benchmark::State& state) {
  const AnchorGridConfig g;
  const MatchScheme scheme =
      state.range(0) ? MatchScheme::all_positions() : MatchScheme::anchor_matched(0.7);
  std::vector<Rect> boxes;
  Rng rng(5);
  for (int i = 0; i < 256; ++i) {
    const double w = rng.uniform(60.0, 200.0), h = rng.uniform(60.0, 200.0);
    boxes.push_back({rng.uniform() * (203.0 - w), rng.uniform() * (203.0 - h), w, h});
  }
  size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(match_anchors(boxes[i++ % boxes.size()], g, scheme));
}
BENCHMARK(BM_MatchAnchors)->Arg(0)->Arg(1);

// one SGD step of the head on a minibatch of backbone features
void BM_HeadStep(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0)), channels = 16;
  const AnchorGridConfig g;
  Rng rng(6);
  HeadNet head(channels, 32, rng);
  const Tensor feats = random_tensor({batch, channels, g.grid_size, g.grid_size}, 7);
  const auto cells_a = match_anchors(canonical_target(g), g, MatchScheme::anchor_matched(0.7));
  const auto cells_q = match_anchors(canonical_target(g), g, MatchScheme::all_positions());
  std::vector<LabelMap> la, lq;
  for (int i = 0; i < batch; ++i) {
    const SampleClass c = i % 4 == 0 ? SampleClass::Positive : SampleClass::Negative;
    la.push_back(label_map(c, cells_a, g));
    lq.push_back(label_map(c, cells_q, g));
  }
  const Rpn2tConfig cfg;
  for (auto _ : state) {
    head.zero_grad();
    HeadNet::Cache cache;
    const ScoreMaps maps = head.forward(feats, &cache);
    const auto loss = rpn2t_loss(maps, std::span<const LabelMap>(la), std::span<const LabelMap>(lq), cfg);
    head.backward(cache, loss.grad);
    for (Tensor* p : head.parameters()) {
      auto w = p->data();
      const auto gr = std::as_const(*p).grad();
      for (size_t j = 0; j < w.size(); ++j) w[j] -= 1e-3f * gr[j];
    }
    benchmark::DoNotOptimize(loss.value);
  }
}
BENCHMARK(BM_HeadStep)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
