#pragma once

#include <vector>

#include "dmlab/processes.hpp"

namespace dmlab {

// Discrete decomposition at grid level `level`: S = M + A with M a level
// martingale, A_0 = 0 and A_t measurable one grid step ahead.
struct DoobPair {
  int level = 0;
  AdaptedProcess m;
  AdaptedProcess a;
};

// A_t - A_{t-1/2^n} := E[S_t - S_{t-1/2^n} | F_{t-1/2^n}], M := S - A.
// S may live on a finer grid; it is sampled down to D_n first. A is
// increasing per atom iff S is a submartingale.
DoobPair doob_decompose_discrete(const FiniteFilteredSpace& space,
                                 const AdaptedProcess& s, int level);

// M_t := E[M_1 | F_t] on D_target; agrees with pair.m at the coarse grid
// times by the tower property.
AdaptedProcess extend_martingale(const FiniteFilteredSpace& space, const DoobPair& pair,
                                 int target_level);

// Right-continuous step extension: the value at s in (t - 1/2^n, t] is A_t,
// realized on D_target by exact dyadic round-up.
AdaptedProcess extend_compensator_step(const FiniteFilteredSpace& space,
                                       const DoobPair& pair, int target_level);

// tau_n(c) = inf{(j-1)/2^n : A_{j/2^n} > c} ∧ 1, strict inequality. Requires
// c > 0, A_0 = 0. The result is checked to be a stopping time (it is one
// precisely because A is predictable).
StoppingTime tau_threshold(const FiniteFilteredSpace& space, const AdaptedProcess& a,
                           double c);

// S~_t = S_t - E[S_1 | F_t]: nonpositive for submartingales, vanishes at the
// horizon, and has the same compensator as S at every level.
AdaptedProcess normalize_to_zero_horizon(const FiniteFilteredSpace& space,
                                         const AdaptedProcess& s);

// One (level, threshold) cell of the uniform-integrability diagnostics.
// The inequality columns are computed under the normalization above; the
// raw S-at-tau integrals are kept alongside.
struct UIDiagnosticsRow {
  int level = 0;
  double threshold = 0.0;
  double tail_mass = 0.0;       // E[A_1 1{A_1 > c}]
  double prob_tau_lt_1 = 0.0;   // P[tau_n(c) < 1]
  double lhs = 0.0;             // tail mass, the left side of the bound
  double rhs = 0.0;             // -2 int_{tau(c/2)<1} S~_tau(c/2) - int_{tau(c)<1} S~_tau(c)
  double markov_bound = 0.0;    // E[A_1]/c
  double raw_s_at_tau = 0.0;    // int_{tau(c)<1} S_tau(c), unnormalized
  double raw_s_at_tau_half = 0.0;
  double norm_s_at_tau = 0.0;
  double norm_s_at_tau_half = 0.0;
};

struct UIDiagnostics {
  std::vector<double> thresholds;
  std::vector<UIDiagnosticsRow> rows;        // ordered by (level, threshold)
  std::vector<double> envelope_sup;          // per threshold: sup over levels of tail mass
  double min_eq1_slack = 0.0;                // min over rows of rhs - lhs
  double min_markov_slack = 0.0;             // min over rows of bound - probability
};

// Uniform-integrability tail diagnostics of the compensators A^n across
// levels n1..n2. Throws if S is not a class-D submartingale.
UIDiagnostics ui_diagnostics(const FiniteFilteredSpace& space, const AdaptedProcess& s,
                             int level_from, int level_to,
                             const std::vector<double>& thresholds);

}  // namespace dmlab
