#include "dmlab/doob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dmlab/numeric.hpp"

namespace dmlab {

DoobPair doob_decompose_discrete(const FiniteFilteredSpace& space,
                                 const AdaptedProcess& s, int level) {
  require(level >= 1 && level <= space.depth(),
          "doob_decompose_discrete: level out of range");
  require(s.level >= level,
          "doob_decompose_discrete: process lives on a coarser grid than the target level");
  const AdaptedProcess sn = sample_to_level(s, level);
  validate_adapted(space, sn, "doob_decompose_discrete");

  DoobPair pair;
  pair.level = level;
  pair.a.level = level;
  pair.a.values.resize(sn.values.size());
  pair.a.values[0] = RandomVariable(space.atom_count(), 0.0);
  for (std::int64_t j = 1; j < sn.point_count(); ++j) {
    RandomVariable diff(space.atom_count());
    for (std::size_t i = 0; i < diff.size(); ++i) {
      diff[i] = sn.at_index(j)[i] - sn.at_index(j - 1)[i];
    }
    const RandomVariable drift =
        conditional_expectation(space, diff, Dyadic::of(j - 1, level));
    RandomVariable next(space.atom_count());
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] = pair.a.at_index(j - 1)[i] + drift[i];
    }
    pair.a.values[static_cast<std::size_t>(j)] = std::move(next);
  }
  pair.m = subtract(sn, pair.a);
  return pair;
}

AdaptedProcess extend_martingale(const FiniteFilteredSpace& space, const DoobPair& pair,
                                 int target_level) {
  require(target_level >= pair.level && target_level <= space.depth(),
          "extend_martingale: target level out of range");
  if (target_level == pair.level) return pair.m;
  return martingale_from_horizon(space, pair.m.horizon(), target_level);
}

AdaptedProcess extend_compensator_step(const FiniteFilteredSpace& space,
                                       const DoobPair& pair, int target_level) {
  require(target_level >= pair.level && target_level <= space.depth(),
          "extend_compensator_step: target level out of range");
  if (target_level == pair.level) return pair.a;
  AdaptedProcess out;
  out.level = target_level;
  const std::int64_t points = (std::int64_t{1} << target_level) + 1;
  out.values.resize(static_cast<std::size_t>(points));
  const std::int64_t stride = std::int64_t{1} << (target_level - pair.level);
  for (std::int64_t m = 0; m < points; ++m) {
    // s = m/2^target lies in (t - 1/2^n, t] for t = ceil(m/stride)/2^n.
    out.values[static_cast<std::size_t>(m)] = pair.a.at_index((m + stride - 1) / stride);
  }
  return out;
}

StoppingTime tau_threshold(const FiniteFilteredSpace& space, const AdaptedProcess& a,
                           double c) {
  require(c > 0.0 && std::isfinite(c), "threshold must be positive");
  validate_adapted(space, a, "tau_threshold");
  bool zero_start = true;
  for (std::size_t i = 0; i < space.atom_count(); ++i) {
    zero_start = zero_start && a.at_index(0)[i] == 0.0;
  }
  require(zero_start, "tau_threshold: compensator must start at 0");

  StoppingTime tau;
  tau.level = a.level;
  tau.times.assign(space.atom_count(), Dyadic::one());
  for (std::size_t i = 0; i < space.atom_count(); ++i) {
    for (std::int64_t j = 1; j < a.point_count(); ++j) {
      if (a.at_index(j)[i] > c) {
        tau.times[i] = Dyadic::of(j - 1, a.level);
        break;
      }
    }
  }
  require(is_stopping_time(space, tau),
          "tau_threshold: result is not a stopping time (compensator not predictable?)");
  return tau;
}

AdaptedProcess normalize_to_zero_horizon(const FiniteFilteredSpace& space,
                                         const AdaptedProcess& s) {
  const AdaptedProcess correction =
      martingale_from_horizon(space, s.horizon(), s.level);
  return subtract(s, correction);
}

namespace {
// int over {tau < 1} of f_tau, with f on the tau grid.
double integral_on_stopped(const FiniteFilteredSpace& space, const AdaptedProcess& f,
                           const StoppingTime& tau) {
  KahanSum sum;
  for (std::size_t i = 0; i < space.atom_count(); ++i) {
    if (tau.times[i] < Dyadic::one()) {
      sum.add(space.prob(i) * f.at_time(tau.times[i])[i]);
    }
  }
  return sum.total();
}
}  // namespace

UIDiagnostics ui_diagnostics(const FiniteFilteredSpace& space, const AdaptedProcess& s,
                             int level_from, int level_to,
                             const std::vector<double>& thresholds) {
  require(level_from >= 1 && level_from <= level_to && level_to <= s.level,
          "ui_diagnostics: bad level range");
  require(!thresholds.empty(), "ui_diagnostics: empty threshold grid");
  for (double c : thresholds) {
    require(c > 0.0 && std::isfinite(c), "ui_diagnostics: thresholds must be positive");
  }
  const SubmartingaleCheck sub = is_submartingale(space, s);
  require(sub.ok, "ui_diagnostics: input is not a submartingale (violation " +
                      std::to_string(sub.max_violation) + ")");

  const AdaptedProcess normalized = normalize_to_zero_horizon(space, s);

  UIDiagnostics diag;
  diag.thresholds = thresholds;
  diag.envelope_sup.assign(thresholds.size(), 0.0);
  diag.min_eq1_slack = std::numeric_limits<double>::infinity();
  diag.min_markov_slack = std::numeric_limits<double>::infinity();

  for (int n = level_from; n <= level_to; ++n) {
    const DoobPair pair = doob_decompose_discrete(space, normalized, n);
    const AdaptedProcess s_raw_n = sample_to_level(s, n);
    const AdaptedProcess s_norm_n = sample_to_level(normalized, n);
    const RandomVariable& a1 = pair.a.horizon();
    const double mean_a1 = expectation(space, a1);

    for (std::size_t ci = 0; ci < thresholds.size(); ++ci) {
      const double c = thresholds[ci];
      UIDiagnosticsRow row;
      row.level = n;
      row.threshold = c;

      KahanSum tail;
      KahanSum prob_gt;
      for (std::size_t i = 0; i < space.atom_count(); ++i) {
        if (a1[i] > c) {
          tail.add(space.prob(i) * a1[i]);
          prob_gt.add(space.prob(i));
        }
      }
      row.tail_mass = tail.total();
      row.lhs = row.tail_mass;

      const StoppingTime tau_c = tau_threshold(space, pair.a, c);
      const StoppingTime tau_half = tau_threshold(space, pair.a, c / 2.0);
      KahanSum p_lt;
      for (std::size_t i = 0; i < space.atom_count(); ++i) {
        if (tau_c.times[i] < Dyadic::one()) p_lt.add(space.prob(i));
      }
      row.prob_tau_lt_1 = p_lt.total();

      row.norm_s_at_tau = integral_on_stopped(space, s_norm_n, tau_c);
      row.norm_s_at_tau_half = integral_on_stopped(space, s_norm_n, tau_half);
      row.raw_s_at_tau = integral_on_stopped(space, s_raw_n, tau_c);
      row.raw_s_at_tau_half = integral_on_stopped(space, s_raw_n, tau_half);
      row.rhs = -2.0 * row.norm_s_at_tau_half - row.norm_s_at_tau;
      row.markov_bound = mean_a1 / c;

      diag.min_eq1_slack = std::min(diag.min_eq1_slack, row.rhs - row.lhs);
      diag.min_markov_slack =
          std::min(diag.min_markov_slack, row.markov_bound - row.prob_tau_lt_1);
      diag.envelope_sup[ci] = std::max(diag.envelope_sup[ci], row.tail_mass);
      diag.rows.push_back(row);
    }
  }
  return diag;
}

}  // namespace dmlab
