#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "dmlab/doob.hpp"
#include "dmlab/processes.hpp"
#include "helpers.hpp"

using dmlab::AdaptedProcess;
using dmlab::Dyadic;
using dmlab::FiniteFilteredSpace;
using dmlab::Partition;
using dmlab::RandomVariable;
using dmlab::Rng;

namespace {

AdaptedProcess deterministic_time_process(const FiniteFilteredSpace& space, int level) {
  AdaptedProcess s;
  s.level = level;
  const std::int64_t points = (std::int64_t{1} << level) + 1;
  for (std::int64_t j = 0; j < points; ++j) {
    s.values.emplace_back(space.atom_count(), Dyadic::of(j, level).value());
  }
  return s;
}

}  // namespace

TEST_CASE("binary tree shape") {
  const auto tree = dmlab::binary_tree_space(3);  // 8 atoms on the level-3 grid
  CHECK(tree.atom_count() == 8);
  CHECK(tree.depth() == 3);
  const auto branches = dmlab::binary_tree_branch_indices(3, 3);
  CHECK(branches == std::vector<std::int64_t>{3, 6, 8});
  CHECK(tree.partition_at(Dyadic::zero()).block_count == 1);
  CHECK(tree.partition_at(Dyadic::of(2, 3)).block_count == 1);
  CHECK(tree.partition_at(Dyadic::of(3, 3)).block_count == 2);
  CHECK(tree.partition_at(Dyadic::of(6, 3)).block_count == 4);
  CHECK(tree.partition_at(Dyadic::one()).block_count == 8);

  const auto wide = dmlab::binary_tree_space(2, 4);
  CHECK(wide.atom_count() == 4);
  CHECK(dmlab::binary_tree_branch_indices(2, 4) == std::vector<std::int64_t>{8, 16});
}

TEST_CASE("submartingale check") {
  const auto tree = dmlab::binary_tree_space(3);
  CHECK(dmlab::is_submartingale(tree, deterministic_time_process(tree, 3)).ok);

  // martingales pass with equality
  const auto pair = dmlab::gen_ground_truth(11, tree, 3, 0.0);
  CHECK(dmlab::is_submartingale(tree, pair.s).ok);

  // S_0 = 1, S_1 = 0: violation exactly 1
  std::vector<Partition> parts(3, Partition::trivial(2));
  parts[2] = Partition::singletons(2);
  const FiniteFilteredSpace space({"u", "d"}, {0.5, 0.5}, 1, std::move(parts));
  AdaptedProcess s;
  s.level = 1;
  s.values = {RandomVariable(2, 1.0), RandomVariable(2, 1.0), RandomVariable(2, 0.0)};
  const auto check = dmlab::is_submartingale(space, s);
  CHECK_FALSE(check.ok);
  CHECK(check.max_violation == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("ground truth generator") {
  const auto tree = dmlab::binary_tree_space(3);

  // jump scale 0: A vanishes, S is the martingale
  const auto flat = dmlab::gen_ground_truth(5, tree, 3, 0.0);
  for (std::int64_t j = 0; j < flat.a.point_count(); ++j) {
    for (std::size_t i = 0; i < tree.atom_count(); ++i) {
      CHECK(flat.a.at_index(j)[i] == 0.0);
      CHECK(flat.s.at_index(j)[i] == flat.m.at_index(j)[i]);
    }
  }

  // seed 42, depth 3: the discrete decomposition recovers (M, A) exactly
  const auto pair = dmlab::gen_ground_truth(42, tree, 3, 1.0);
  const auto recovered = dmlab::doob_decompose_discrete(tree, pair.s, 3);
  const auto gm = dmlab::sample_to_level(pair.m, 3);
  const auto ga = dmlab::sample_to_level(pair.a, 3);
  for (std::int64_t j = 0; j < recovered.m.point_count(); ++j) {
    for (std::size_t i = 0; i < tree.atom_count(); ++i) {
      CHECK(std::abs(recovered.m.at_index(j)[i] - gm.at_index(j)[i]) < 1e-10);
      CHECK(std::abs(recovered.a.at_index(j)[i] - ga.at_index(j)[i]) < 1e-10);
    }
  }

  // generator output is deterministic in the seed
  const auto again = dmlab::gen_ground_truth(42, tree, 3, 1.0);
  for (std::int64_t j = 0; j < pair.s.point_count(); ++j) {
    for (std::size_t i = 0; i < tree.atom_count(); ++i) {
      CHECK(pair.s.at_index(j)[i] == again.s.at_index(j)[i]);
    }
  }
}

TEST_CASE("ground truth pair invariants hold across seeds") {
  Rng seed_rng(1234);
  for (int rep = 0; rep < 100; ++rep) {
    const int depth = 2 + static_cast<int>(seed_rng.below(4));
    const auto tree = dmlab::binary_tree_space(depth);
    const int level = 1 + static_cast<int>(seed_rng.below(static_cast<std::uint64_t>(depth)));
    const auto pair =
        dmlab::gen_ground_truth(seed_rng.next_u64(), tree, level, 0.5 + seed_rng.uniform01());

    CHECK(dmlab::is_adapted(tree, pair.s));
    CHECK(dmlab::is_submartingale(tree, pair.s).ok);
    // A_0 = 0, increasing, predictable at the generation level
    for (std::size_t i = 0; i < tree.atom_count(); ++i) {
      CHECK(pair.a.at_index(0)[i] == 0.0);
    }
    for (std::int64_t j = 1; j < pair.a.point_count(); ++j) {
      for (std::size_t i = 0; i < tree.atom_count(); ++i) {
        CHECK(pair.a.at_index(j)[i] >= pair.a.at_index(j - 1)[i]);
      }
    }
    const auto al = dmlab::sample_to_level(pair.a, level);
    for (std::int64_t j = 1; j < al.point_count(); ++j) {
      const auto& part = tree.partition_at(Dyadic::of(j - 1, level));
      std::vector<double> first(static_cast<std::size_t>(part.block_count), 0.0);
      std::vector<bool> seen(static_cast<std::size_t>(part.block_count), false);
      for (std::size_t i = 0; i < tree.atom_count(); ++i) {
        const auto b = static_cast<std::size_t>(part.block_of[i]);
        if (!seen[b]) {
          seen[b] = true;
          first[b] = al.at_index(j)[i];
        } else {
          CHECK(first[b] == al.at_index(j)[i]);
        }
      }
    }
    // M is a martingale on the master grid
    for (std::int64_t j = 1; j < pair.m.point_count(); ++j) {
      const auto drift = dmlab::conditional_expectation(tree, pair.m.at_index(j),
                                                        Dyadic::of(j - 1, tree.depth()));
      for (std::size_t i = 0; i < tree.atom_count(); ++i) {
        CHECK(std::abs(drift[i] - pair.m.at_index(j - 1)[i]) < 1e-12);
      }
    }
  }
}

TEST_CASE("squared walk") {
  const auto tree = dmlab::binary_tree_space(2);  // hand-checkable: branches at 1/2, 1
  const auto s = dmlab::gen_squared_walk(tree);
  CHECK(s.level == 2);
  for (std::size_t i = 0; i < 4; ++i) CHECK(s.at_index(0)[i] == 0.0);
  // after one +-1/sqrt(2) step: W^2 = 1/2 everywhere
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(s.at_time(Dyadic::of(1, 1))[i] == doctest::Approx(0.5).epsilon(1e-15));
  }
  CHECK(dmlab::expectation(tree, s.horizon()) == doctest::Approx(1.0).epsilon(1e-14));

  // master-depth compensator is the quadratic-variation staircase
  const auto deep = dmlab::binary_tree_space(5);
  const auto walk = dmlab::gen_squared_walk(deep);
  CHECK(dmlab::expectation(deep, walk.horizon()) == doctest::Approx(1.0).epsilon(1e-12));
  const auto pair = dmlab::doob_decompose_discrete(deep, walk, 5);
  const auto branches = dmlab::binary_tree_branch_indices(5, 5);
  for (std::int64_t j = 0; j < pair.a.point_count(); ++j) {
    const auto count = std::count_if(branches.begin(), branches.end(),
                                     [j](std::int64_t b) { return b <= j; });
    const double expected = static_cast<double>(count) / 5.0;
    for (std::size_t i = 0; i < deep.atom_count(); ++i) {
      CHECK(std::abs(pair.a.at_index(j)[i] - expected) < 1e-12);
    }
  }

  // sampling to a coarser level keeps the shared grid values
  const auto coarse = dmlab::gen_squared_walk(deep, 3);
  CHECK(coarse.level == 3);
  for (std::int64_t j = 0; j <= 8; ++j) {
    for (std::size_t i = 0; i < deep.atom_count(); ++i) {
      CHECK(coarse.at_index(j)[i] == walk.at_index(j * 4)[i]);
    }
  }

  // wrong space shape is rejected
  Rng rng(3);
  const auto other = dmlab::testing::random_space(rng, 8, 3);
  CHECK_THROWS_AS(dmlab::gen_squared_walk(other), std::invalid_argument);
}

TEST_CASE("class-D supremum via the Snell envelope") {
  // constant process: sup is |c|
  const auto tree = dmlab::binary_tree_space(2);
  CHECK(dmlab::class_d_sup(tree, dmlab::make_constant_process(tree, 2, -2.5)) ==
        doctest::Approx(2.5).epsilon(1e-14));

  // one fair +-1 step: stopping before the step gives 0, after gives 1
  const auto one_step = dmlab::binary_tree_space(1);
  AdaptedProcess s;
  s.level = 1;
  s.values = {RandomVariable(2, 0.0), RandomVariable(2, 0.0),
              RandomVariable({std::vector<double>{1.0, -1.0}})};
  CHECK(dmlab::class_d_sup(one_step, s) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("Snell envelope equals exhaustive stopping-time enumeration") {
  Rng rng(77);
  for (int rep = 0; rep < 6; ++rep) {
    const int depth = 2 + static_cast<int>(rng.below(2));  // depth <= 3
    const auto tree = dmlab::binary_tree_space(depth);
    const auto s = dmlab::testing::random_adapted_process(rng, tree, depth, 2.0);
    const double sup = dmlab::class_d_sup(tree, s);

    double best = 0.0;
    std::size_t count = 0;
    dmlab::testing::enumerate_stopping_times(
        tree, depth, [&](const std::vector<Dyadic>& times) {
          dmlab::KahanSum mean;
          for (std::size_t i = 0; i < tree.atom_count(); ++i) {
            mean.add(tree.prob(i) * std::abs(s.at_time(times[i])[i]));
          }
          best = std::max(best, mean.total());
          ++count;
        });
    CHECK(count > 1);
    CHECK(sup == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("Snell value dominates random stopping times") {
  Rng rng(31);
  const auto tree = dmlab::binary_tree_space(4);
  const auto s = dmlab::testing::random_adapted_process(rng, tree, 4, 1.5);
  const double sup = dmlab::class_d_sup(tree, s);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto tau = dmlab::testing::random_stopping_time(rng, tree, 4);
    REQUIRE(dmlab::is_stopping_time(tree, tau));
    const auto stopped = dmlab::evaluate_at_stopping_time(tree, s, tau);
    dmlab::KahanSum mean;
    for (std::size_t i = 0; i < tree.atom_count(); ++i) {
      mean.add(tree.prob(i) * std::abs(stopped[i]));
    }
    CHECK(mean.total() <= sup + 1e-12);
  }
}

TEST_CASE("adaptedness is closed under sums and scalar multiples") {
  Rng rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    const auto space = dmlab::testing::random_space(rng, 5, 3);
    const auto x = dmlab::testing::random_adapted_process(rng, space, 3);
    const auto y = dmlab::testing::random_adapted_process(rng, space, 3);
    CHECK(dmlab::is_adapted(space, dmlab::add(x, y)));
    CHECK(dmlab::is_adapted(space, dmlab::scale(x, -2.75)));
  }
}
