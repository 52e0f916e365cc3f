#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmlab/dyadic.hpp"

namespace dmlab {

// One value per atom.
struct RandomVariable {
  std::vector<double> values;

  RandomVariable() = default;
  explicit RandomVariable(std::vector<double> v) : values(std::move(v)) {}
  explicit RandomVariable(std::size_t n, double fill = 0.0) : values(n, fill) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

// Partition of the atom set. block_of[i] is the block id of atom i; ids are
// contiguous, numbered by first occurrence.
struct Partition {
  std::vector<std::int32_t> block_of;
  std::int32_t block_count = 0;

  static Partition from_block_ids(std::vector<std::int32_t> ids);
  static Partition trivial(std::size_t atom_count);
  static Partition singletons(std::size_t atom_count);
};

// Every fine block contained in a single coarse block.
bool refines(const Partition& fine, const Partition& coarse);

// A random time, one dyadic value per atom, living on the level-`level` grid.
// Only measurable maps ({tau <= t} a union of blocks at t) are stopping
// times; see is_stopping_time.
struct StoppingTime {
  int level = 0;
  std::vector<Dyadic> times;
};

// Finite filtered probability space: atoms with strictly positive
// probabilities and, for every master-grid time j/2^depth, a partition of
// the atoms. Partitions must refine as time advances; coarser dyadic grids
// index into the same partitions. Immutable after construction; all
// operations are pure, so instances are safe to share across threads.
class FiniteFilteredSpace {
 public:
  FiniteFilteredSpace(std::vector<std::string> atoms, std::vector<double> probs,
                      int depth, std::vector<Partition> partitions);

  std::size_t atom_count() const { return atoms_.size(); }
  int depth() const { return depth_; }
  const std::vector<std::string>& atoms() const { return atoms_; }
  const std::vector<double>& probs() const { return probs_; }
  double prob(std::size_t i) const { return probs_[i]; }
  double min_prob() const { return min_prob_; }

  std::int64_t master_index(const Dyadic& t) const;
  const Partition& partition_at(const Dyadic& t) const;
  const Partition& partition_at_index(std::int64_t j) const { return partitions_[static_cast<std::size_t>(j)]; }
  std::int64_t master_point_count() const { return static_cast<std::int64_t>(partitions_.size()); }

 private:
  std::vector<std::string> atoms_;
  std::vector<double> probs_;
  int depth_;
  std::vector<Partition> partitions_;
  double min_prob_;
};

// E[f | F_t]: on each block of the partition at t, the probability-weighted
// block average.
RandomVariable conditional_expectation(const FiniteFilteredSpace& space,
                                       const RandomVariable& f, const Dyadic& t);

double expectation(const FiniteFilteredSpace& space, const RandomVariable& f);

// Weighted L^p norm, p in {1, 2}.
double lp_norm(const FiniteFilteredSpace& space, const RandomVariable& f, int p);

// Weighted L^2 inner product sum_w p_w f(w) g(w).
double inner_product(const FiniteFilteredSpace& space, const RandomVariable& f,
                     const RandomVariable& g);

// True iff {tau <= t} is a union of partition blocks at t for every t on the
// level-tau.level grid.
bool is_stopping_time(const FiniteFilteredSpace& space, const StoppingTime& tau);

StoppingTime constant_stopping_time(const FiniteFilteredSpace& space,
                                    const Dyadic& t, int level);

}  // namespace dmlab
