#include <benchmark/benchmark.h>

#include "dmlab/doob.hpp"
#include "dmlab/komlos.hpp"
#include "dmlab/processes.hpp"
#include "dmlab/rng.hpp"

namespace {

void BM_ConditionalExpectation(benchmark::State& state) {
  const int depth = static_cast<int>(state.range(0));
  const auto tree = dmlab::binary_tree_space(depth);
  dmlab::Rng rng(1);
  dmlab::RandomVariable f(tree.atom_count());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.symmetric();
  const dmlab::Dyadic mid = dmlab::Dyadic::of(1, 1);
  for (auto _ : state) {
    auto g = dmlab::conditional_expectation(tree, f, mid);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_ConditionalExpectation)->Arg(8)->Arg(10)->Arg(12);

void BM_DoobDecompose(benchmark::State& state) {
  const int depth = static_cast<int>(state.range(0));
  const auto tree = dmlab::binary_tree_space(depth);
  const auto walk = dmlab::gen_squared_walk(tree);
  for (auto _ : state) {
    auto pair = dmlab::doob_decompose_discrete(tree, walk, depth);
    benchmark::DoNotOptimize(pair);
  }
}
BENCHMARK(BM_DoobDecompose)->Arg(6)->Arg(8)->Arg(10);

void BM_SnellEnvelope(benchmark::State& state) {
  const int depth = static_cast<int>(state.range(0));
  const auto tree = dmlab::binary_tree_space(depth);
  const auto walk = dmlab::gen_squared_walk(tree);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dmlab::class_d_sup(tree, walk));
  }
}
BENCHMARK(BM_SnellEnvelope)->Arg(6)->Arg(8)->Arg(10);

void BM_MinNormConvexHull(benchmark::State& state) {
  const auto vectors_n = static_cast<std::size_t>(state.range(0));
  const auto tree = dmlab::binary_tree_space(6);
  dmlab::Rng rng(2);
  std::vector<dmlab::RandomVariable> vectors;
  for (std::size_t k = 0; k < vectors_n; ++k) {
    dmlab::RandomVariable f(tree.atom_count());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = 2.0 * rng.symmetric();
    vectors.push_back(std::move(f));
  }
  for (auto _ : state) {
    auto res = dmlab::min_norm_convex_hull(tree, vectors, 1e-10);
    benchmark::DoNotOptimize(res);
  }
}
BENCHMARK(BM_MinNormConvexHull)->Arg(4)->Arg(10)->Arg(20);

}  // namespace

BENCHMARK_MAIN();
