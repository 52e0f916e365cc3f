#pragma once

// Shared test utilities: random refining filtrations, random adapted data,
// and the independent oracles (stopping-time enumeration, simplex grid
// search) the solver tests are checked against. Everything here must stay
// independent of the implementation paths it is used to verify.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dmlab/filtered_space.hpp"
#include "dmlab/numeric.hpp"
#include "dmlab/processes.hpp"
#include "dmlab/rng.hpp"

namespace dmlab::testing {

// Random refining filtration: start trivial, randomly split one block per
// grid step (when possible).
inline FiniteFilteredSpace random_space(Rng& rng, std::size_t atom_count, int depth) {
  std::vector<std::string> atoms(atom_count);
  for (std::size_t i = 0; i < atom_count; ++i) atoms[i] = "w" + std::to_string(i);
  std::vector<double> probs(atom_count);
  KahanSum total;
  for (auto& p : probs) {
    p = 0.1 + rng.uniform01();
    total.add(p);
  }
  for (auto& p : probs) p /= total.total();

  const std::int64_t points = (std::int64_t{1} << depth) + 1;
  std::vector<Partition> parts;
  parts.reserve(static_cast<std::size_t>(points));
  std::vector<std::int32_t> ids(atom_count, 0);
  std::int32_t blocks = 1;
  parts.push_back(Partition::from_block_ids(ids));
  for (std::int64_t j = 1; j < points; ++j) {
    if (rng.uniform01() < 0.6 && static_cast<std::size_t>(blocks) < atom_count) {
      // split a random block with >= 2 atoms
      std::vector<std::int32_t> candidates;
      for (std::int32_t b = 0; b < blocks; ++b) {
        const auto members =
            std::count(ids.begin(), ids.end(), b);
        if (members >= 2) candidates.push_back(b);
      }
      if (!candidates.empty()) {
        const auto target =
            candidates[static_cast<std::size_t>(rng.below(candidates.size()))];
        bool moved = false;
        std::size_t last_member = 0;
        for (std::size_t i = 0; i < atom_count; ++i) {
          if (ids[i] != target) continue;
          last_member = i;
          if (rng.uniform01() < 0.5) {
            ids[i] = blocks;
            moved = true;
          }
        }
        if (!moved) ids[last_member] = blocks;
        // keep both halves nonempty
        if (std::count(ids.begin(), ids.end(), target) == 0) {
          for (std::size_t i = 0; i < atom_count; ++i) {
            if (ids[i] == blocks) {
              ids[i] = target;
              break;
            }
          }
        }
        if (std::count(ids.begin(), ids.end(), blocks) > 0) ++blocks;
      }
    }
    parts.push_back(Partition::from_block_ids(ids));
  }
  return FiniteFilteredSpace(std::move(atoms), std::move(probs), depth, std::move(parts));
}

inline RandomVariable random_vector(Rng& rng, std::size_t atoms, double scale = 1.0) {
  RandomVariable f(atoms);
  for (std::size_t i = 0; i < atoms; ++i) f[i] = scale * rng.symmetric();
  return f;
}

// Adapted by construction: per time, draw one value per block.
inline AdaptedProcess random_adapted_process(Rng& rng, const FiniteFilteredSpace& space,
                                             int level, double scale = 1.0) {
  AdaptedProcess p;
  p.level = level;
  const std::int64_t points = (std::int64_t{1} << level) + 1;
  p.values.reserve(static_cast<std::size_t>(points));
  for (std::int64_t j = 0; j < points; ++j) {
    const Partition& part = space.partition_at(Dyadic::of(j, level));
    std::vector<double> block_value(static_cast<std::size_t>(part.block_count));
    for (auto& v : block_value) v = scale * rng.symmetric();
    RandomVariable v(space.atom_count());
    for (std::size_t i = 0; i < space.atom_count(); ++i) {
      v[i] = block_value[static_cast<std::size_t>(part.block_of[i])];
    }
    p.values.push_back(std::move(v));
  }
  return p;
}

// Random stopping time: march forward, each still-running block stops with
// probability `stop_prob`; everything left stops at the horizon.
inline StoppingTime random_stopping_time(Rng& rng, const FiniteFilteredSpace& space,
                                         int level, double stop_prob = 0.3) {
  StoppingTime tau;
  tau.level = level;
  tau.times.assign(space.atom_count(), Dyadic::one());
  std::vector<bool> running(space.atom_count(), true);
  const std::int64_t points = (std::int64_t{1} << level) + 1;
  for (std::int64_t j = 0; j < points; ++j) {
    const Dyadic t = Dyadic::of(j, level);
    const Partition& part = space.partition_at(t);
    std::vector<signed char> decision(static_cast<std::size_t>(part.block_count), -1);
    for (std::size_t i = 0; i < space.atom_count(); ++i) {
      if (!running[i]) continue;
      auto& d = decision[static_cast<std::size_t>(part.block_of[i])];
      if (d < 0) d = (j + 1 == points || rng.uniform01() < stop_prob) ? 1 : 0;
      if (d == 1) {
        tau.times[i] = t;
        running[i] = false;
      }
    }
  }
  return tau;
}

// Exhaustive stopping-time enumeration (oracle for the Snell envelope).
// Walks the grid; at each time every still-running block of the current
// partition independently stops or continues. Exponential, so keep the
// instances tiny.
inline void enumerate_stopping_times(
    const FiniteFilteredSpace& space, int level,
    const std::function<void(const std::vector<Dyadic>&)>& visit) {
  const std::int64_t points = (std::int64_t{1} << level) + 1;
  std::vector<Dyadic> assigned(space.atom_count(), Dyadic::one());
  std::vector<bool> running(space.atom_count(), true);

  std::function<void(std::int64_t)> step = [&](std::int64_t j) {
    if (j == points) {
      visit(assigned);
      return;
    }
    const Dyadic t = Dyadic::of(j, level);
    const Partition& part = space.partition_at(t);
    std::vector<std::int32_t> active_blocks;
    for (std::size_t i = 0; i < space.atom_count(); ++i) {
      if (running[i] &&
          std::find(active_blocks.begin(), active_blocks.end(), part.block_of[i]) ==
              active_blocks.end()) {
        active_blocks.push_back(part.block_of[i]);
      }
    }
    const std::size_t k = active_blocks.size();
    const bool last = j + 1 == points;
    const std::uint64_t combos = last ? 1 : (std::uint64_t{1} << k);
    for (std::uint64_t mask = 0; mask < combos; ++mask) {
      std::vector<std::size_t> stopped;
      for (std::size_t b = 0; b < k; ++b) {
        const bool stop_here = last || ((mask >> b) & 1);
        if (!stop_here) continue;
        for (std::size_t i = 0; i < space.atom_count(); ++i) {
          if (running[i] && part.block_of[i] == active_blocks[b]) {
            running[i] = false;
            assigned[i] = t;
            stopped.push_back(i);
          }
        }
      }
      step(j + 1);
      for (std::size_t i : stopped) {
        running[i] = true;
        assigned[i] = Dyadic::one();
      }
    }
  };
  step(0);
}

// Dense simplex grid search with local refinement; the independent oracle
// for the min-norm solver on <= 3 vectors.
inline double grid_search_min_norm(const FiniteFilteredSpace& space,
                                   const std::vector<RandomVariable>& vectors) {
  const std::size_t m = vectors.size();
  std::vector<std::vector<double>> gram(m, std::vector<double>(m, 0.0));
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a; b < m; ++b) {
      gram[a][b] = gram[b][a] = inner_product(space, vectors[a], vectors[b]);
    }
  }
  const auto norm2 = [&](double l0, double l1, double l2) {
    const double l[3] = {l0, l1, l2};
    double acc = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) acc += l[a] * l[b] * gram[a][b];
    }
    return acc;
  };

  double best0 = 1.0, best1 = 0.0;
  double best = norm2(1.0, 0.0, 0.0);
  const auto scan = [&](double c0, double c1, double halfwidth, double step) {
    for (double a = std::max(0.0, c0 - halfwidth); a <= std::min(1.0, c0 + halfwidth);
         a += step) {
      const double b_lo = m < 3 ? 1.0 - a : std::max(0.0, c1 - halfwidth);
      const double b_hi = m < 3 ? 1.0 - a : std::min(1.0 - a, c1 + halfwidth);
      for (double b = b_lo; b <= b_hi; b += step) {
        if (m < 2 && a < 1.0) continue;
        const double c = 1.0 - a - (m >= 2 ? b : 0.0);
        if (m >= 3 && c < -1e-15) continue;
        const double v = m == 1   ? norm2(1.0, 0.0, 0.0)
                         : m == 2 ? norm2(a, 1.0 - a, 0.0)
                                  : norm2(a, b, std::max(0.0, c));
        if (v < best) {
          best = v;
          best0 = a;
          best1 = b;
        }
        if (m < 2) break;
      }
      if (m < 2) break;
    }
  };
  scan(0.5, 0.5, 1.0, 1e-3);
  double width = 2e-3, step = 1e-4;
  for (int round = 0; round < 4; ++round) {
    scan(best0, best1, width, step);
    width /= 10.0;
    step /= 10.0;
  }
  return std::sqrt(std::max(0.0, best));
}

}  // namespace dmlab::testing
