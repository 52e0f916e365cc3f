#include "dmlab/limit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dmlab/numeric.hpp"
#include "dmlab/parallel.hpp"

namespace dmlab {

const DoobPair& CombinedProcesses::pair_for(int level) const {
  require(level >= first_level && level <= last_level, "no decomposition at this level");
  return pairs[static_cast<std::size_t>(level - first_level)];
}

const ConvexWeights& CombinedProcesses::weights_for(int n) const {
  require(n >= first_level && n <= last_level, "no combination at this level");
  return level_weights[static_cast<std::size_t>(n - first_level)];
}

CombinedProcesses build_combined(const FiniteFilteredSpace& space,
                                 const AdaptedProcess& s, int level_from, int level_to,
                                 const std::vector<ConvexWeights>& weights,
                                 int threads) {
  require(level_from >= 1 && level_from <= level_to && level_to <= space.depth(),
          "build_combined: bad level range");
  const std::size_t count = static_cast<std::size_t>(level_to - level_from + 1);
  require(weights.size() == count, "build_combined: one weight vector per level required");
  for (std::size_t i = 0; i < count; ++i) {
    const int n = level_from + static_cast<int>(i);
    require(weights[i].start == n,
            "build_combined: mismatched weight support (start level)");
    require(weights[i].support_end() <= level_to + 1,
            "build_combined: mismatched weight support (end level)");
    require(weights[i].in_simplex(1e-9), "build_combined: weights not in the simplex");
  }

  CombinedProcesses cp;
  cp.first_level = level_from;
  cp.last_level = level_to;
  cp.level_weights = weights;
  cp.s = sample_to_level(s, space.depth());
  validate_adapted(space, cp.s, "build_combined");

  cp.pairs.resize(count);
  parallel_for_index(static_cast<std::int64_t>(count), threads, [&](std::int64_t i) {
    cp.pairs[static_cast<std::size_t>(i)] =
        doob_decompose_discrete(space, cp.s, level_from + static_cast<int>(i));
  });
  DoobPair master = doob_decompose_discrete(space, cp.s, space.depth());
  cp.reference_m = std::move(master.m);
  cp.reference_a = std::move(master.a);

  // Identity at shared grid times: mixed_M_t + mixed_A_t = S_t per atom.
  const int master_level = space.depth();
  for (int n = level_from; n <= level_to; ++n) {
    const AdaptedProcess mixed_m =
        martingale_from_horizon(space, combined_m1(cp, n), n);
    const ConvexWeights& w = cp.weights_for(n);
    const std::int64_t points = (std::int64_t{1} << n) + 1;
    double worst = 0.0;
    for (std::int64_t t = 0; t < points; ++t) {
      const std::int64_t master_idx = t << (master_level - n);
      for (std::size_t i = 0; i < space.atom_count(); ++i) {
        KahanSum mixed_a;
        for (std::size_t k = 0; k < w.weights.size(); ++k) {
          const int j = w.start + static_cast<int>(k);
          const std::int64_t jdx = t << (j - n);
          mixed_a.add(w.weights[k] * cp.pair_for(j).a.at_index(jdx)[i]);
        }
        const double total = mixed_m.at_index(t)[i] + mixed_a.total();
        worst = std::max(worst, std::abs(total - cp.s.at_index(master_idx)[i]));
      }
    }
    if (worst > 1e-12) {
      throw std::runtime_error(
          "build_combined: identity mixed_M + mixed_A = S violated at level " +
          std::to_string(n) + " (max gap " + std::to_string(worst) + ")");
    }
  }
  return cp;
}

RandomVariable combined_m1(const CombinedProcesses& cp, int n) {
  const ConvexWeights& w = cp.weights_for(n);
  const std::size_t atoms = cp.s.horizon().size();
  RandomVariable out(atoms);
  for (std::size_t i = 0; i < atoms; ++i) {
    KahanSum sum;
    for (std::size_t k = 0; k < w.weights.size(); ++k) {
      const int j = w.start + static_cast<int>(k);
      sum.add(w.weights[k] * cp.pair_for(j).m.horizon()[i]);
    }
    out[i] = sum.total();
  }
  return out;
}

AdaptedProcess combined_martingale(const FiniteFilteredSpace& space,
                                   const CombinedProcesses& cp, int n) {
  return martingale_from_horizon(space, combined_m1(cp, n), space.depth());
}

AdaptedProcess combined_compensator(const FiniteFilteredSpace& space,
                                    const CombinedProcesses& cp, int n) {
  const ConvexWeights& w = cp.weights_for(n);
  const int master = space.depth();
  AdaptedProcess out;
  out.level = master;
  const std::int64_t points = (std::int64_t{1} << master) + 1;
  out.values.assign(static_cast<std::size_t>(points),
                    RandomVariable(space.atom_count(), 0.0));
  for (std::int64_t m = 0; m < points; ++m) {
    RandomVariable& v = out.values[static_cast<std::size_t>(m)];
    for (std::size_t i = 0; i < space.atom_count(); ++i) {
      KahanSum sum;
      for (std::size_t k = 0; k < w.weights.size(); ++k) {
        const int j = w.start + static_cast<int>(k);
        const std::int64_t stride = std::int64_t{1} << (master - j);
        sum.add(w.weights[k] * cp.pair_for(j).a.at_index((m + stride - 1) / stride)[i]);
      }
      v[i] = sum.total();
    }
  }
  return out;
}

StoppingTime sigma_round_up(const StoppingTime& tau, int n) {
  StoppingTime sigma;
  sigma.level = n;
  sigma.times.resize(tau.times.size());
  for (std::size_t i = 0; i < tau.times.size(); ++i) {
    sigma.times[i] = round_up_to_level(tau.times[i], n);
    require(tau.times[i] <= sigma.times[i], "sigma_round_up: round-up went backwards");
  }
  return sigma;
}

RandomVariable combined_compensator_at(const FiniteFilteredSpace& space,
                                       const CombinedProcesses& cp, int n,
                                       const StoppingTime& tau) {
  require(tau.level == space.depth(), "combined_compensator_at: tau must be at master depth");
  require(is_stopping_time(space, tau), "tau is not a stopping time");
  const ConvexWeights& w = cp.weights_for(n);
  RandomVariable out(space.atom_count());
  for (std::size_t i = 0; i < space.atom_count(); ++i) {
    KahanSum sum;
    const std::int64_t master_idx = index_at_level(tau.times[i], space.depth());
    for (std::size_t k = 0; k < w.weights.size(); ++k) {
      const int j = w.start + static_cast<int>(k);
      const std::int64_t stride = std::int64_t{1} << (space.depth() - j);
      sum.add(w.weights[k] *
              cp.pair_for(j).a.at_index((master_idx + stride - 1) / stride)[i]);
    }
    out[i] = sum.total();
  }
  return out;
}

std::vector<CompensatorMeanRow> compensator_mean_at_tau(const FiniteFilteredSpace& space,
                                                        const CombinedProcesses& cp,
                                                        const StoppingTime& tau) {
  require(tau.level == space.depth(),
          "compensator_mean_at_tau: tau must be at master depth");
  require(is_stopping_time(space, tau), "tau is not a stopping time");

  const int master = space.depth();
  const std::size_t atoms = space.atom_count();
  const std::size_t levels = cp.pairs.size();

  // Per level j: A^j at sigma_j and E[S_{sigma_j}].
  std::vector<RandomVariable> a_stopped(levels);
  std::vector<double> s_stopped_mean(levels, 0.0);
  for (std::size_t li = 0; li < levels; ++li) {
    const int j = cp.first_level + static_cast<int>(li);
    const StoppingTime sigma = sigma_round_up(tau, j);
    a_stopped[li] = evaluate_at_stopping_time(space, cp.pair_for(j).a, sigma);
    KahanSum s_mean;
    for (std::size_t i = 0; i < atoms; ++i) {
      const std::int64_t idx = index_at_level(sigma.times[i], master);
      s_mean.add(space.prob(i) * cp.s.at_index(idx)[i]);
    }
    s_stopped_mean[li] = s_mean.total();
  }
  const double mean_m0 = expectation(space, cp.reference_m.at_index(0));
  const RandomVariable a_ref_at_tau = [&] {
    RandomVariable v(atoms);
    for (std::size_t i = 0; i < atoms; ++i) {
      v[i] = cp.reference_a.at_index(index_at_level(tau.times[i], master))[i];
    }
    return v;
  }();
  const double reference_mean = expectation(space, a_ref_at_tau);

  std::vector<CompensatorMeanRow> rows;
  rows.reserve(static_cast<std::size_t>(cp.last_level - cp.first_level + 1));
  for (int n = cp.first_level; n <= cp.last_level; ++n) {
    const ConvexWeights& w = cp.weights_for(n);
    RandomVariable mixed(atoms);
    for (std::size_t i = 0; i < atoms; ++i) {
      KahanSum sum;
      for (std::size_t k = 0; k < w.weights.size(); ++k) {
        const std::size_t li = static_cast<std::size_t>(w.start + static_cast<int>(k) -
                                                        cp.first_level);
        sum.add(w.weights[k] * a_stopped[li][i]);
      }
      mixed[i] = sum.total();
    }
    // Step-extension identity: the mixture of A^j at sigma_j is bitwise the
    // step extension of the mixture at tau.
    const RandomVariable direct = combined_compensator_at(space, cp, n, tau);
    for (std::size_t i = 0; i < atoms; ++i) {
      if (mixed[i] != direct[i]) {
        throw std::runtime_error(
            "compensator_mean_at_tau: step-extension identity violated at atom " +
            std::to_string(i));
      }
    }

    CompensatorMeanRow row;
    row.n = n;
    row.mean_at_tau = expectation(space, mixed);
    KahanSum mixture;
    for (std::size_t k = 0; k < w.weights.size(); ++k) {
      const std::size_t li =
          static_cast<std::size_t>(w.start + static_cast<int>(k) - cp.first_level);
      mixture.add(w.weights[k] * s_stopped_mean[li]);
    }
    row.stopped_mixture = mixture.total() - mean_m0;
    row.identity_gap = std::abs(row.mean_at_tau - row.stopped_mixture);
    row.reference_mean = reference_mean;
    row.reference_gap = std::abs(row.mean_at_tau - reference_mean);
    rows.push_back(row);
  }
  return rows;
}

PredictabilityReport predictability_check(const FiniteFilteredSpace& space,
                                          const CombinedProcesses& cp,
                                          const std::vector<StoppingTime>& taus,
                                          double tol, double jump_threshold) {
  const int master = space.depth();
  const std::size_t atoms = space.atom_count();
  PredictabilityReport report;
  report.tol = tol;
  report.jump_threshold = jump_threshold;
  report.upper_ok = true;
  report.equality_ok = true;
  report.taus_ok = true;

  // Mixed compensator at a grid time on every level whose grid contains it;
  // scratch holds the running max over levels per atom.
  std::vector<double> running(atoms);
  const std::int64_t points = (std::int64_t{1} << master) + 1;
  for (std::int64_t m = 0; m < points; ++m) {
    const Dyadic t = Dyadic::of(m, master);
    if (t.level > cp.last_level) continue;  // finer than every computed level
    const int n_lo = std::max(cp.first_level, t.level);

    PredictabilityGridRow row;
    row.t = t;
    row.eligible_levels = cp.last_level - n_lo + 1;
    if (row.eligible_levels <= 0) continue;

    std::fill(running.begin(), running.end(), -std::numeric_limits<double>::infinity());
    for (int n = n_lo; n <= cp.last_level; ++n) {
      const ConvexWeights& w = cp.weights_for(n);
      for (std::size_t i = 0; i < atoms; ++i) {
        KahanSum sum;
        for (std::size_t k = 0; k < w.weights.size(); ++k) {
          const int j = w.start + static_cast<int>(k);
          sum.add(w.weights[k] * cp.pair_for(j).a.at_index(m >> (master - j))[i]);
        }
        running[i] = std::max(running[i], sum.total());
      }
    }

    const RandomVariable& ref = cp.reference_a.at_index(m);
    row.max_surplus = -std::numeric_limits<double>::infinity();
    row.max_abs_gap = 0.0;
    for (std::size_t i = 0; i < atoms; ++i) {
      const double gap = running[i] - ref[i];
      row.max_surplus = std::max(row.max_surplus, gap);
      row.max_abs_gap = std::max(row.max_abs_gap, std::abs(gap));
    }
    if (m > 0) {
      const RandomVariable& prev = cp.reference_a.at_index(m - 1);
      for (std::size_t i = 0; i < atoms; ++i) {
        row.jump = std::max(row.jump, ref[i] - prev[i]);
      }
    }
    row.continuity = row.jump < jump_threshold;
    row.upper_ok = row.max_surplus <= tol;
    row.equality_ok = !row.continuity || row.max_abs_gap <= tol;
    report.upper_ok = report.upper_ok && row.upper_ok;
    report.equality_ok = report.equality_ok && row.equality_ok;
    report.grid.push_back(row);
  }

  for (std::size_t ti = 0; ti < taus.size(); ++ti) {
    const StoppingTime& tau = taus[ti];
    require(tau.level == master, "predictability_check: taus must be at master depth");
    require(is_stopping_time(space, tau), "tau is not a stopping time");
    PredictabilityTauRow row;
    row.tau_index = ti;
    for (std::size_t i = 0; i < atoms; ++i) {
      const Dyadic t = tau.times[i];
      const int n_lo = std::max(cp.first_level, t.level);
      if (t.level > cp.last_level) {
        ++row.skipped_atoms;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      for (int n = n_lo; n <= cp.last_level; ++n) {
        const ConvexWeights& w = cp.weights_for(n);
        KahanSum sum;
        for (std::size_t k = 0; k < w.weights.size(); ++k) {
          const int j = w.start + static_cast<int>(k);
          sum.add(w.weights[k] * cp.pair_for(j).a.at_index(index_at_level(t, j))[i]);
        }
        best = std::max(best, sum.total());
      }
      const double ref = cp.reference_a.at_index(index_at_level(t, master))[i];
      row.max_abs_gap = std::max(row.max_abs_gap, std::abs(best - ref));
      ++row.asserted_atoms;
    }
    row.ok = row.max_abs_gap <= tol;
    report.taus_ok = report.taus_ok && row.ok;
    report.taus.push_back(row);
  }
  return report;
}

ConvergenceCurve convergence_curve(
    const FiniteFilteredSpace& space, const AdaptedProcess& s, int level_from,
    int level_to, const std::vector<std::pair<std::string, StoppingTime>>& targets,
    int threads) {
  require(level_from >= 1 && level_from <= level_to && level_to <= space.depth(),
          "convergence_curve: bad level range");
  require(!targets.empty(), "convergence_curve: no measurement targets");

  const int master = space.depth();
  const AdaptedProcess sm = sample_to_level(s, master);

  std::vector<RandomVariable> m1_sequence(
      static_cast<std::size_t>(level_to - level_from + 1));
  parallel_for_index(static_cast<std::int64_t>(m1_sequence.size()), threads,
                     [&](std::int64_t i) {
                       const DoobPair pair = doob_decompose_discrete(
                           space, sm, level_from + static_cast<int>(i));
                       m1_sequence[static_cast<std::size_t>(i)] = pair.m.horizon();
                     });

  KomlosExtraction extraction = komlos_extract(space, m1_sequence);
  std::vector<ConvexWeights> weights = extraction.weights;
  for (auto& w : weights) w.start += level_from;  // positions -> levels

  const CombinedProcesses cp =
      build_combined(space, sm, level_from, level_to, weights, threads);

  const RandomVariable& m1_ref = cp.reference_m.horizon();
  ConvergenceCurve curve;
  for (int n = level_from; n <= level_to; ++n) {
    const RandomVariable mixed_m1 = combined_m1(cp, n);
    RandomVariable m_diff(space.atom_count());
    for (std::size_t i = 0; i < m_diff.size(); ++i) m_diff[i] = mixed_m1[i] - m1_ref[i];
    const double gap_m1 = lp_norm(space, m_diff, 1);

    for (const auto& [label, tau] : targets) {
      const RandomVariable mixed = combined_compensator_at(space, cp, n, tau);
      RandomVariable ref(space.atom_count());
      for (std::size_t i = 0; i < ref.size(); ++i) {
        ref[i] = cp.reference_a.at_index(index_at_level(tau.times[i], master))[i];
      }
      RandomVariable diff(space.atom_count());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = mixed[i] - ref[i];

      ConvergenceCurveRow row;
      row.depth = n;
      row.target = label;
      row.l1_gap_a = lp_norm(space, diff, 1);
      row.l1_gap_m1 = gap_m1;
      row.mean_gap_at_tau = std::abs(expectation(space, mixed) - expectation(space, ref));
      row.per_atom_bound = row.l1_gap_a / space.min_prob();
      curve.rows.push_back(row);
    }
  }
  return curve;
}

}  // namespace dmlab
