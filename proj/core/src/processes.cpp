#include "dmlab/processes.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dmlab/numeric.hpp"

namespace dmlab {

bool is_adapted(const FiniteFilteredSpace& space, const AdaptedProcess& x) {
  if (x.level < 0 || x.level > space.depth()) return false;
  if (x.point_count() != (std::int64_t{1} << x.level) + 1) return false;
  for (std::int64_t j = 0; j < x.point_count(); ++j) {
    const RandomVariable& v = x.at_index(j);
    if (v.size() != space.atom_count()) return false;
    if (!all_finite(v.values)) return false;
    const Partition& part = space.partition_at(Dyadic::of(j, x.level));
    std::vector<double> first(static_cast<std::size_t>(part.block_count));
    std::vector<bool> seen(static_cast<std::size_t>(part.block_count), false);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto b = static_cast<std::size_t>(part.block_of[i]);
      if (!seen[b]) {
        seen[b] = true;
        first[b] = v[i];
      } else if (first[b] != v[i]) {  // exact: adapted values agree bitwise
        return false;
      }
    }
  }
  return true;
}

void validate_adapted(const FiniteFilteredSpace& space, const AdaptedProcess& x,
                      const char* what) {
  require(is_adapted(space, x), std::string(what) + ": process is not adapted");
}

AdaptedProcess make_constant_process(const FiniteFilteredSpace& space, int level,
                                     double value) {
  AdaptedProcess p;
  p.level = level;
  p.values.assign(static_cast<std::size_t>((std::int64_t{1} << level) + 1),
                  RandomVariable(space.atom_count(), value));
  return p;
}

AdaptedProcess sample_to_level(const AdaptedProcess& x, int n) {
  require(n >= 0 && n <= x.level, "sample_to_level: target level must be <= process level");
  if (n == x.level) return x;
  AdaptedProcess out;
  out.level = n;
  const std::int64_t stride = std::int64_t{1} << (x.level - n);
  const std::int64_t points = (std::int64_t{1} << n) + 1;
  out.values.reserve(static_cast<std::size_t>(points));
  for (std::int64_t j = 0; j < points; ++j) out.values.push_back(x.at_index(j * stride));
  return out;
}

namespace {
AdaptedProcess zip(const AdaptedProcess& x, const AdaptedProcess& y, double sign) {
  require(x.level == y.level && x.point_count() == y.point_count(),
          "process arithmetic: level mismatch");
  AdaptedProcess out;
  out.level = x.level;
  out.values.resize(x.values.size());
  for (std::size_t j = 0; j < x.values.size(); ++j) {
    const auto& a = x.values[j];
    const auto& b = y.values[j];
    require(a.size() == b.size(), "process arithmetic: dimension mismatch");
    RandomVariable v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i] + sign * b[i];
    out.values[j] = std::move(v);
  }
  return out;
}
}  // namespace

AdaptedProcess add(const AdaptedProcess& x, const AdaptedProcess& y) { return zip(x, y, 1.0); }
AdaptedProcess subtract(const AdaptedProcess& x, const AdaptedProcess& y) {
  return zip(x, y, -1.0);
}

AdaptedProcess scale(const AdaptedProcess& x, double c) {
  AdaptedProcess out = x;
  for (auto& v : out.values) {
    for (auto& e : v.values) e *= c;
  }
  return out;
}

AdaptedProcess martingale_from_horizon(const FiniteFilteredSpace& space,
                                       const RandomVariable& f, int level) {
  require(level >= 0 && level <= space.depth(),
          "martingale_from_horizon: level out of range");
  AdaptedProcess out;
  out.level = level;
  const std::int64_t points = (std::int64_t{1} << level) + 1;
  out.values.reserve(static_cast<std::size_t>(points));
  for (std::int64_t j = 0; j < points; ++j) {
    out.values.push_back(conditional_expectation(space, f, Dyadic::of(j, level)));
  }
  return out;
}

SubmartingaleCheck is_submartingale(const FiniteFilteredSpace& space,
                                    const AdaptedProcess& s) {
  validate_adapted(space, s, "is_submartingale");
  SubmartingaleCheck check;
  for (std::int64_t j = 0; j + 1 < s.point_count(); ++j) {
    const RandomVariable drift =
        conditional_expectation(space, s.at_index(j + 1), Dyadic::of(j, s.level));
    for (std::size_t i = 0; i < drift.size(); ++i) {
      check.max_violation = std::max(check.max_violation, s.at_index(j)[i] - drift[i]);
    }
  }
  check.max_violation = std::max(check.max_violation, 0.0);
  check.ok = check.max_violation <= 1e-12;
  return check;
}

std::vector<std::int64_t> binary_tree_branch_indices(int tree_depth, int master_depth) {
  require(tree_depth >= 1 && tree_depth <= 24, "binary tree depth must be in [1, 24]");
  require(master_depth >= 1 && master_depth <= 30, "master depth must be in [1, 30]");
  const std::int64_t intervals = std::int64_t{1} << master_depth;
  require(tree_depth <= intervals, "binary tree depth exceeds master grid resolution");
  std::vector<std::int64_t> idx(static_cast<std::size_t>(tree_depth));
  for (int k = 1; k <= tree_depth; ++k) {
    idx[static_cast<std::size_t>(k - 1)] =
        (static_cast<std::int64_t>(k) * intervals + tree_depth - 1) / tree_depth;
  }
  return idx;
}

FiniteFilteredSpace binary_tree_space(int tree_depth, int master_depth) {
  const auto branch = binary_tree_branch_indices(tree_depth, master_depth);
  const std::int64_t atom_count = std::int64_t{1} << tree_depth;
  std::vector<std::string> atoms(static_cast<std::size_t>(atom_count));
  for (std::int64_t i = 0; i < atom_count; ++i) {
    std::string name(static_cast<std::size_t>(tree_depth), '+');
    for (int k = 0; k < tree_depth; ++k) {
      if ((i >> (tree_depth - 1 - k)) & 1) name[static_cast<std::size_t>(k)] = '-';
    }
    atoms[static_cast<std::size_t>(i)] = std::move(name);
  }
  std::vector<double> probs(static_cast<std::size_t>(atom_count),
                            std::ldexp(1.0, -tree_depth));
  const std::int64_t points = (std::int64_t{1} << master_depth) + 1;
  std::vector<Partition> parts(static_cast<std::size_t>(points));
  int revealed = 0;
  for (std::int64_t j = 0; j < points; ++j) {
    while (revealed < tree_depth && branch[static_cast<std::size_t>(revealed)] <= j) {
      ++revealed;
    }
    Partition p;
    p.block_of.resize(static_cast<std::size_t>(atom_count));
    for (std::int64_t i = 0; i < atom_count; ++i) {
      p.block_of[static_cast<std::size_t>(i)] =
          static_cast<std::int32_t>(i >> (tree_depth - revealed));
    }
    p.block_count = static_cast<std::int32_t>(std::int64_t{1} << revealed);
    parts[static_cast<std::size_t>(j)] = std::move(p);
  }
  return FiniteFilteredSpace(std::move(atoms), std::move(probs), master_depth,
                             std::move(parts));
}

GroundTruthPair gen_ground_truth(std::uint64_t seed, const FiniteFilteredSpace& space,
                                 int level, double jump_scale) {
  require(level >= 1 && level <= space.depth(),
          "gen_ground_truth: level must be in [1, master depth]");
  require(jump_scale >= 0.0 && std::isfinite(jump_scale),
          "gen_ground_truth: jump scale must be nonnegative");
  Rng rng(seed);
  const std::size_t n = space.atom_count();
  const int master = space.depth();

  RandomVariable m1(n);
  for (std::size_t i = 0; i < n; ++i) m1[i] = rng.symmetric();

  GroundTruthPair pair;
  pair.level = level;
  pair.m = martingale_from_horizon(space, m1, master);

  // Level-`level` staircase with jumps drawn per block of the partition one
  // grid step before the jump time.
  const std::int64_t steps = std::int64_t{1} << level;
  std::vector<RandomVariable> cum(static_cast<std::size_t>(steps) + 1,
                                  RandomVariable(n, 0.0));
  for (std::int64_t j = 1; j <= steps; ++j) {
    const Partition& part = space.partition_at(Dyadic::of(j - 1, level));
    std::vector<double> jump(static_cast<std::size_t>(part.block_count));
    for (auto& v : jump) v = jump_scale * rng.uniform01();
    RandomVariable& next = cum[static_cast<std::size_t>(j)];
    const RandomVariable& prev = cum[static_cast<std::size_t>(j - 1)];
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = prev[i] + jump[static_cast<std::size_t>(part.block_of[i])];
    }
  }

  pair.a.level = master;
  pair.a.values.resize(static_cast<std::size_t>((std::int64_t{1} << master) + 1));
  const std::int64_t stride = std::int64_t{1} << (master - level);
  for (std::int64_t mIdx = 0; mIdx < pair.a.point_count(); ++mIdx) {
    pair.a.values[static_cast<std::size_t>(mIdx)] =
        cum[static_cast<std::size_t>(mIdx / stride)];
  }
  pair.s = add(pair.m, pair.a);
  return pair;
}

namespace {
int tree_depth_from_atoms(std::size_t atom_count) {
  int d = 0;
  std::size_t n = atom_count;
  while (n > 1 && n % 2 == 0) {
    n /= 2;
    ++d;
  }
  require(n == 1 && d >= 1, "squared walk: atom count is not a power of two");
  return d;
}
}  // namespace

AdaptedProcess gen_squared_walk(const FiniteFilteredSpace& space) {
  const int tree_depth = tree_depth_from_atoms(space.atom_count());
  const int master = space.depth();
  const auto branch = binary_tree_branch_indices(tree_depth, master);
  const std::int64_t atom_count = static_cast<std::int64_t>(space.atom_count());

  // Shape check: partitions must reveal sign prefixes exactly at the branch
  // times, probabilities uniform.
  const double uniform = std::ldexp(1.0, -tree_depth);
  for (std::size_t i = 0; i < space.atom_count(); ++i) {
    require(space.prob(i) == uniform,
            "squared walk: space is not the uniform binary tree");
  }
  int revealed = 0;
  for (std::int64_t j = 0; j < space.master_point_count(); ++j) {
    while (revealed < tree_depth && branch[static_cast<std::size_t>(revealed)] <= j) {
      ++revealed;
    }
    const Partition& p = space.partition_at_index(j);
    require(p.block_count == static_cast<std::int32_t>(std::int64_t{1} << revealed),
            "squared walk: space is not the standard binary tree for this depth");
    for (std::int64_t i = 0; i < atom_count; ++i) {
      require(p.block_of[static_cast<std::size_t>(i)] ==
                  static_cast<std::int32_t>(i >> (tree_depth - revealed)),
              "squared walk: space is not the standard binary tree for this depth");
    }
  }

  const double inv_depth = 1.0 / static_cast<double>(tree_depth);
  AdaptedProcess s;
  s.level = master;
  s.values.resize(static_cast<std::size_t>(space.master_point_count()));
  // net[i] after k branchings: #(+) - #(-) among the first k signs.
  std::vector<int> net(static_cast<std::size_t>(atom_count), 0);
  revealed = 0;
  for (std::int64_t j = 0; j < space.master_point_count(); ++j) {
    while (revealed < tree_depth && branch[static_cast<std::size_t>(revealed)] <= j) {
      for (std::int64_t i = 0; i < atom_count; ++i) {
        const bool minus = (i >> (tree_depth - 1 - revealed)) & 1;
        net[static_cast<std::size_t>(i)] += minus ? -1 : 1;
      }
      ++revealed;
    }
    RandomVariable v(space.atom_count());
    for (std::int64_t i = 0; i < atom_count; ++i) {
      const double w = static_cast<double>(net[static_cast<std::size_t>(i)]);
      v[static_cast<std::size_t>(i)] = w * w * inv_depth;
    }
    s.values[static_cast<std::size_t>(j)] = std::move(v);
  }
  return s;
}

AdaptedProcess gen_squared_walk(const FiniteFilteredSpace& space, int level) {
  return sample_to_level(gen_squared_walk(space), level);
}

RandomVariable evaluate_at_stopping_time(const FiniteFilteredSpace& space,
                                         const AdaptedProcess& x,
                                         const StoppingTime& tau) {
  require(tau.level == x.level,
          "evaluate_at_stopping_time: stopping time and process level mismatch");
  require(is_stopping_time(space, tau), "tau is not a stopping time");
  RandomVariable out(space.atom_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = x.at_time(tau.times[i])[i];
  }
  return out;
}

AdaptedProcess snell_envelope_abs(const FiniteFilteredSpace& space,
                                  const AdaptedProcess& s) {
  validate_adapted(space, s, "snell_envelope_abs");
  AdaptedProcess u;
  u.level = s.level;
  u.values.resize(s.values.size());
  const std::int64_t last = s.point_count() - 1;
  RandomVariable tail(space.atom_count());
  for (std::size_t i = 0; i < tail.size(); ++i) tail[i] = std::abs(s.at_index(last)[i]);
  u.values[static_cast<std::size_t>(last)] = tail;
  for (std::int64_t j = last - 1; j >= 0; --j) {
    RandomVariable cont = conditional_expectation(
        space, u.at_index(j + 1), Dyadic::of(j, s.level));
    RandomVariable here(space.atom_count());
    for (std::size_t i = 0; i < here.size(); ++i) {
      here[i] = std::max(std::abs(s.at_index(j)[i]), cont[i]);
    }
    u.values[static_cast<std::size_t>(j)] = std::move(here);
  }
  return u;
}

double class_d_sup(const FiniteFilteredSpace& space, const AdaptedProcess& s) {
  const AdaptedProcess u = snell_envelope_abs(space, s);
  return expectation(space, u.at_index(0));
}

StoppingTime hitting_time(const FiniteFilteredSpace& space, const AdaptedProcess& x,
                          double c) {
  validate_adapted(space, x, "hitting_time");
  StoppingTime tau;
  tau.level = x.level;
  tau.times.assign(space.atom_count(), Dyadic::one());
  for (std::size_t i = 0; i < space.atom_count(); ++i) {
    for (std::int64_t j = 0; j < x.point_count(); ++j) {
      if (x.at_index(j)[i] > c) {
        tau.times[i] = Dyadic::of(j, x.level);
        break;
      }
    }
  }
  return tau;
}

}  // namespace dmlab
