#include "dmlab/filtered_space.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "dmlab/numeric.hpp"

namespace dmlab {

Partition Partition::from_block_ids(std::vector<std::int32_t> ids) {
  // Renumber by first occurrence so equal partitions have equal encodings.
  std::vector<std::int32_t> remap(ids.size(), -1);
  std::int32_t next = 0;
  Partition p;
  p.block_of.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < ids.size(),
            "partition block id out of range");
    if (remap[static_cast<std::size_t>(ids[i])] < 0) {
      remap[static_cast<std::size_t>(ids[i])] = next++;
    }
    p.block_of[i] = remap[static_cast<std::size_t>(ids[i])];
  }
  p.block_count = next;
  return p;
}

Partition Partition::trivial(std::size_t atom_count) {
  Partition p;
  p.block_of.assign(atom_count, 0);
  p.block_count = atom_count > 0 ? 1 : 0;
  return p;
}

Partition Partition::singletons(std::size_t atom_count) {
  Partition p;
  p.block_of.resize(atom_count);
  for (std::size_t i = 0; i < atom_count; ++i) p.block_of[i] = static_cast<std::int32_t>(i);
  p.block_count = static_cast<std::int32_t>(atom_count);
  return p;
}

bool refines(const Partition& fine, const Partition& coarse) {
  if (fine.block_of.size() != coarse.block_of.size()) return false;
  std::vector<std::int32_t> image(static_cast<std::size_t>(fine.block_count), -1);
  for (std::size_t i = 0; i < fine.block_of.size(); ++i) {
    auto& slot = image[static_cast<std::size_t>(fine.block_of[i])];
    if (slot < 0) {
      slot = coarse.block_of[i];
    } else if (slot != coarse.block_of[i]) {
      return false;
    }
  }
  return true;
}

FiniteFilteredSpace::FiniteFilteredSpace(std::vector<std::string> atoms,
                                         std::vector<double> probs, int depth,
                                         std::vector<Partition> partitions)
    : atoms_(std::move(atoms)),
      probs_(std::move(probs)),
      depth_(depth),
      partitions_(std::move(partitions)) {
  require(!atoms_.empty(), "atoms: empty atom list");
  require(probs_.size() == atoms_.size(), "probs: size does not match atom count");
  require(depth_ >= 1 && depth_ <= 30, "depth: must be in [1, 30]");

  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (!seen.insert(atoms_[i]).second) {
      throw std::invalid_argument("atoms[" + std::to_string(i) + "]: duplicate id \"" +
                                  atoms_[i] + "\"");
    }
  }

  KahanSum total;
  min_prob_ = 1.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (!(std::isfinite(probs_[i]) && probs_[i] > 0.0)) {
      throw std::invalid_argument("probs[" + std::to_string(i) +
                                  "]: must be finite and > 0");
    }
    min_prob_ = std::min(min_prob_, probs_[i]);
    total.add(probs_[i]);
  }
  require(std::abs(total.total() - 1.0) <= 1e-12,
          "probs: sum to " + std::to_string(total.total()) + ", expected 1 within 1e-12");

  const std::int64_t expected = (std::int64_t{1} << depth_) + 1;
  require(static_cast<std::int64_t>(partitions_.size()) == expected,
          "partitions: expected " + std::to_string(expected) + " grid times, got " +
              std::to_string(partitions_.size()));
  for (std::size_t j = 0; j < partitions_.size(); ++j) {
    const auto& p = partitions_[j];
    if (p.block_of.size() != atoms_.size()) {
      throw std::invalid_argument(
          "partitions[" + Dyadic::of(static_cast<std::int64_t>(j), depth_).str() +
          "]: wrong atom count");
    }
    bool ids_ok = true;
    for (auto id : p.block_of) ids_ok = ids_ok && id >= 0 && id < p.block_count;
    if (!ids_ok) {
      throw std::invalid_argument(
          "partitions[" + Dyadic::of(static_cast<std::int64_t>(j), depth_).str() +
          "]: block id out of range");
    }
  }
  // Refinement in time; the chain also forces the t = 0 partition coarsest.
  for (std::size_t j = 0; j + 1 < partitions_.size(); ++j) {
    if (!refines(partitions_[j + 1], partitions_[j])) {
      throw std::invalid_argument(
          "partitions[" + Dyadic::of(static_cast<std::int64_t>(j + 1), depth_).str() +
          "]: does not refine the partition at " +
          Dyadic::of(static_cast<std::int64_t>(j), depth_).str());
    }
  }
}

std::int64_t FiniteFilteredSpace::master_index(const Dyadic& t) const {
  if (!on_grid(t, depth_)) {
    throw std::invalid_argument("no partition at " + t.str());
  }
  return index_at_level(t, depth_);
}

const Partition& FiniteFilteredSpace::partition_at(const Dyadic& t) const {
  return partitions_[static_cast<std::size_t>(master_index(t))];
}

RandomVariable conditional_expectation(const FiniteFilteredSpace& space,
                                       const RandomVariable& f, const Dyadic& t) {
  require(f.size() == space.atom_count(), "conditional_expectation: dimension mismatch");
  const Partition& part = space.partition_at(t);
  const auto blocks = static_cast<std::size_t>(part.block_count);
  std::vector<KahanSum> num(blocks);
  std::vector<KahanSum> den(blocks);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto b = static_cast<std::size_t>(part.block_of[i]);
    num[b].add(space.prob(i) * f[i]);
    den[b].add(space.prob(i));
  }
  std::vector<double> mean(blocks);
  for (std::size_t b = 0; b < blocks; ++b) mean[b] = num[b].total() / den[b].total();
  RandomVariable out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    out[i] = mean[static_cast<std::size_t>(part.block_of[i])];
  }
  return out;
}

double expectation(const FiniteFilteredSpace& space, const RandomVariable& f) {
  require(f.size() == space.atom_count(), "expectation: dimension mismatch");
  KahanSum s;
  for (std::size_t i = 0; i < f.size(); ++i) s.add(space.prob(i) * f[i]);
  return s.total();
}

double lp_norm(const FiniteFilteredSpace& space, const RandomVariable& f, int p) {
  require(f.size() == space.atom_count(), "lp_norm: dimension mismatch");
  require(p == 1 || p == 2, "lp_norm: p must be 1 or 2");
  KahanSum s;
  if (p == 1) {
    for (std::size_t i = 0; i < f.size(); ++i) s.add(space.prob(i) * std::abs(f[i]));
    return s.total();
  }
  for (std::size_t i = 0; i < f.size(); ++i) s.add(space.prob(i) * f[i] * f[i]);
  return std::sqrt(s.total());
}

double inner_product(const FiniteFilteredSpace& space, const RandomVariable& f,
                     const RandomVariable& g) {
  require(f.size() == space.atom_count() && g.size() == space.atom_count(),
          "inner_product: dimension mismatch");
  KahanSum s;
  for (std::size_t i = 0; i < f.size(); ++i) s.add(space.prob(i) * f[i] * g[i]);
  return s.total();
}

bool is_stopping_time(const FiniteFilteredSpace& space, const StoppingTime& tau) {
  if (tau.times.size() != space.atom_count()) return false;
  if (tau.level < 0 || tau.level > space.depth()) return false;
  for (const auto& t : tau.times) {
    if (!on_grid(t, tau.level)) return false;
  }
  const std::int64_t points = (std::int64_t{1} << tau.level) + 1;
  for (std::int64_t j = 0; j < points; ++j) {
    const Dyadic t = Dyadic::of(j, tau.level);
    const Partition& part = space.partition_at(t);
    // {tau <= t} must be block-constant at t.
    std::vector<signed char> state(static_cast<std::size_t>(part.block_count), -1);
    for (std::size_t i = 0; i < tau.times.size(); ++i) {
      const signed char in_event = tau.times[i] <= t ? 1 : 0;
      auto& slot = state[static_cast<std::size_t>(part.block_of[i])];
      if (slot < 0) {
        slot = in_event;
      } else if (slot != in_event) {
        return false;
      }
    }
  }
  return true;
}

StoppingTime constant_stopping_time(const FiniteFilteredSpace& space, const Dyadic& t,
                                    int level) {
  require(on_grid(t, level), "constant time " + t.str() + " not on the level-" +
                                 std::to_string(level) + " grid");
  require(level <= space.depth(), "stopping-time level exceeds master depth");
  StoppingTime tau;
  tau.level = level;
  tau.times.assign(space.atom_count(), t);
  return tau;
}

}  // namespace dmlab
