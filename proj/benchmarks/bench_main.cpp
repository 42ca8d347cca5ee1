#include <benchmark/benchmark.h>

#include <map>
#include <numeric>

#include "viewsel/edges.hpp"
#include "viewsel/projector.hpp"
#include "viewsel/scoring.hpp"
#include "viewsel/selection.hpp"
#include "viewsel/sim.hpp"

using namespace viewsel;

namespace {

GeometryParams desk(int n) {
  const double sod = 3.0 * n;
  return {sod, 1.5 * sod, n + n / 4, n + n / 4, 1.5, {n, n, n}, 1.0};
}

const Phantom& phantom(int n) {
  static std::map<int, Phantom> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    auto spec = default_phantom_spec({n, n, n}, 1.0);
    if (n < 64) spec.pores.count = 5;
    it = cache.emplace(n, make_phantom(spec)).first;
  }
  return it->second;
}

void BM_ForwardProject(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ConeBeamGeometry g(desk(n));
  const auto& v = phantom(n).truth;
  double angle = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_project(v, g, angle));
    angle += 7.0;
  }
}
BENCHMARK(BM_ForwardProject)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_BackProject(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ConeBeamGeometry g(desk(n));
  const auto p = forward_project(phantom(n).truth, g, 30.0);
  for (auto _ : state) benchmark::DoNotOptimize(back_project(p, g, 30.0));
}
BENCHMARK(BM_BackProject)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_CannyVolume(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto& v = phantom(n).truth;
  for (auto _ : state) benchmark::DoNotOptimize(canny_edges(v));
}
BENCHMARK(BM_CannyVolume)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

// One EPVS scoring pass: edge alignment of every candidate on a 180-angle grid.
void BM_EpvsScoringStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ConeBeamGeometry g(desk(n));
  const auto grid = candidate_angles(180);
  const auto edges = canny_edges(phantom(n).cad).to_volume();
  std::vector<std::size_t> all(grid.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (auto _ : state) benchmark::DoNotOptimize(edge_alignment_scores(edges, g, grid, all, {}));
}
BENCHMARK(BM_EpvsScoringStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

// One EAVS scoring pass: band-mask overlap of every candidate on the central slice.
void BM_EavsScoringStep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto& v = phantom(n).cad;
  const auto slice = canny_slice(v.slice(n / 2), n, n);
  const auto grid = candidate_angles(180);
  for (auto _ : state) {
    double s = 0.0;
    for (const double a : grid.angles()) s += mask_alignment(slice, n, n, a, 3.0);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_EavsScoringStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_SoftmaxWeightedMean(benchmark::State& state) {
  const ConeBeamGeometry g(desk(64));
  const auto p = forward_project(phantom(64).truth, g, 10.0);
  for (auto _ : state) benchmark::DoNotOptimize(softmax_weighted_mean(p.data(), {}));
}
BENCHMARK(BM_SoftmaxWeightedMean);

}  // namespace

BENCHMARK_MAIN();
