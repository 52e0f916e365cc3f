#pragma once

#include <cstdint>
#include <vector>

#include "dmlab/filtered_space.hpp"
#include "dmlab/rng.hpp"

namespace dmlab {

// Process on the grid D_level: values[j] is the atom vector at time
// j/2^level. Adaptedness (value at t constant on partition blocks at t) is
// an invariant of everything this library produces; boundary inputs are
// checked with validate_adapted.
struct AdaptedProcess {
  int level = 0;
  std::vector<RandomVariable> values;

  std::int64_t point_count() const { return static_cast<std::int64_t>(values.size()); }
  const RandomVariable& at_index(std::int64_t j) const {
    return values[static_cast<std::size_t>(j)];
  }
  RandomVariable& at_index(std::int64_t j) { return values[static_cast<std::size_t>(j)]; }
  const RandomVariable& at_time(const Dyadic& t) const {
    return values[static_cast<std::size_t>(index_at_level(t, level))];
  }
  const RandomVariable& horizon() const { return values.back(); }
};

bool is_adapted(const FiniteFilteredSpace& space, const AdaptedProcess& x);
void validate_adapted(const FiniteFilteredSpace& space, const AdaptedProcess& x,
                      const char* what);

AdaptedProcess make_constant_process(const FiniteFilteredSpace& space, int level,
                                     double value);
// Values at the shared grid times, no interpolation.
AdaptedProcess sample_to_level(const AdaptedProcess& x, int n);
AdaptedProcess add(const AdaptedProcess& x, const AdaptedProcess& y);
AdaptedProcess subtract(const AdaptedProcess& x, const AdaptedProcess& y);
AdaptedProcess scale(const AdaptedProcess& x, double c);

// M_t = E[f | F_t] on the grid D_level: the martingale closed by f.
AdaptedProcess martingale_from_horizon(const FiniteFilteredSpace& space,
                                       const RandomVariable& f, int level);

struct SubmartingaleCheck {
  bool ok = false;
  double max_violation = 0.0;  // max over atoms/times of (S_s - E[S_t|F_s])+
};

// E[S_t | F_s] >= S_s - 1e-12 per atom over consecutive grid pairs
// (consecutive suffices by the tower property). Throws on non-adapted input.
SubmartingaleCheck is_submartingale(const FiniteFilteredSpace& space,
                                    const AdaptedProcess& s);

// Martingale M, predictable increasing compensator A with A_0 = 0, and
// S = M + A, all on the master grid. `level` is the predictability level:
// A jumps only at level-`level` grid times and each jump is measurable one
// level-`level` step ahead, so the discrete decomposition at any grid
// level >= `level` recovers (M, A) exactly.
struct GroundTruthPair {
  int level = 0;
  AdaptedProcess m;
  AdaptedProcess a;
  AdaptedProcess s;
};

// Standard binary tree: 2^tree_depth atoms (sign sequences), uniform
// probabilities, branching k at master time ceil(k * 2^master_depth /
// tree_depth) / 2^master_depth; the partition at t groups atoms sharing the
// signs of all branchings <= t.
FiniteFilteredSpace binary_tree_space(int tree_depth, int master_depth);
inline FiniteFilteredSpace binary_tree_space(int depth) {
  return binary_tree_space(depth, depth);
}
// 1-based branching positions on the master grid of the tree above.
std::vector<std::int64_t> binary_tree_branch_indices(int tree_depth, int master_depth);

// Draws M_1 per atom and back-propagates via conditional expectations;
// draws nonnegative predictable jumps for A at level-`level` grid times,
// scaled by jump_scale. Deterministic in the seed.
GroundTruthPair gen_ground_truth(std::uint64_t seed, const FiniteFilteredSpace& space,
                                 int level, double jump_scale);

// S_t = W_t^2 for the scaled walk W on a binary tree built by
// binary_tree_space (increments +-1/sqrt(tree_depth), one per branching).
// Its master-depth compensator is the exact quadratic-variation staircase
// (#branch times <= t) / tree_depth, and E[S_1] = 1. Throws if the space
// does not have the binary-tree shape.
AdaptedProcess gen_squared_walk(const FiniteFilteredSpace& space);
AdaptedProcess gen_squared_walk(const FiniteFilteredSpace& space, int level);

// X_tau per atom: result(w) = X_{tau(w)}(w). Throws if tau is not a
// stopping time at the process's level.
RandomVariable evaluate_at_stopping_time(const FiniteFilteredSpace& space,
                                         const AdaptedProcess& x,
                                         const StoppingTime& tau);

// Snell envelope of |S|: U_t = max(|S_t|, E[U_{t+1/2^n} | F_t]).
AdaptedProcess snell_envelope_abs(const FiniteFilteredSpace& space,
                                  const AdaptedProcess& s);

// sup over stopping times of E[|S_tau|], attained on finite spaces; computed
// as E[U_0] for the Snell envelope U of |S|.
double class_d_sup(const FiniteFilteredSpace& space, const AdaptedProcess& s);

// First grid time with X_t > c, capped at 1. Hitting times of adapted
// processes are stopping times.
StoppingTime hitting_time(const FiniteFilteredSpace& space, const AdaptedProcess& x,
                          double c);

}  // namespace dmlab
