#include <benchmark/benchmark.h>

#include "hexpose/appearance.hpp"
#include "hexpose/geometry.hpp"
#include "hexpose/inference.hpp"
#include "hexpose/learning.hpp"
#include "hexpose/synth.hpp"

using namespace hexpose;

namespace {

struct Scene {
  PartHierarchy h = PartHierarchy::load(std::filesystem::path(HEXPOSE_DOCS_DIR) / "hierarchy_human.json");
  ExemplarLibrary lib = fit_library(random_annotations(h, 30, 7), h);
  SynthScene scene = make_scene(h, lib, SceneOptions{}, 1);
};

const Scene& scene() {
  static const Scene s;
  return s;
}

void BM_Psi(benchmark::State& state) {
  Rng rng = make_stream(1);
  ChildGeometry a;
  for (int k = 0; k < state.range(0); ++k) {
    a.points.push_back({uniform_real(rng, -10, 10), uniform_real(rng, -10, 10)});
    a.kinds.push_back(ChildKind::Atomic);
  }
  ChildGeometry b = a;
  const SimilarityTransform t{1.2, 1.4, {3, -2}};
  for (Point2& p : b.points) p = t(p);
  for (auto _ : state) benchmark::DoNotOptimize(psi(b, a, {kPi / 3}));
}
BENCHMARK(BM_Psi)->Arg(3)->Arg(6)->Arg(12);

void BM_TopPeaks(benchmark::State& state) {
  const Scene& s = scene();
  for (auto _ : state)
    benchmark::DoNotOptimize(top_peaks(s.scene.maps, static_cast<std::uint32_t>(s.h.node(0).id), 1.0,
                                       static_cast<std::size_t>(state.range(0)), 2.0));
}
BENCHMARK(BM_TopPeaks)->Arg(10)->Arg(50);

void BM_Infer(benchmark::State& state) {
  const Scene& s = scene();
  const ScoringModel m{s.h, s.lib, s.scene.maps};
  const WeightVector w = WeightVector::uniform(s.h, 1.0, 1.0, 0.01, 0.0);
  InferenceParams p;
  p.max_hypotheses = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(infer(m, w, p).score);
}
BENCHMARK(BM_Infer)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
