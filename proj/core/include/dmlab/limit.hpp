#pragma once

#include <string>
#include <vector>

#include "dmlab/doob.hpp"
#include "dmlab/komlos.hpp"

namespace dmlab {

// Convex combinations across refining decompositions, one set of weights
// per start level n: the mixed martingale is the martingale closed by
// sum_j w_j M^j_1, the mixed compensator mixes the right-continuous step
// extensions of the A^j with the same weights. The reference pair is the
// master-depth decomposition of S; on a finite space it is the terminal
// object of the refinement.
class CombinedProcesses {
 public:
  int first_level = 0;
  int last_level = 0;
  std::vector<ConvexWeights> level_weights;  // per n; start is an absolute level
  std::vector<DoobPair> pairs;               // per level j in [first, last]
  AdaptedProcess s;                          // on the master grid
  AdaptedProcess reference_m;
  AdaptedProcess reference_a;

  const DoobPair& pair_for(int level) const;
  const ConvexWeights& weights_for(int n) const;
};

// Decomposes S at every level in [level_from, level_to] plus the master
// depth, and mixes with the given weights (weights[i].start must be
// level_from + i, support within [n, level_to]). Verifies the identity
// mixed_M_t + mixed_A_t = S_t at every shared grid time within 1e-12.
CombinedProcesses build_combined(const FiniteFilteredSpace& space,
                                 const AdaptedProcess& s, int level_from, int level_to,
                                 const std::vector<ConvexWeights>& weights,
                                 int threads = 1);

RandomVariable combined_m1(const CombinedProcesses& cp, int n);
// E[mixed_M_1 | F_t] on the master grid.
AdaptedProcess combined_martingale(const FiniteFilteredSpace& space,
                                   const CombinedProcesses& cp, int n);
// Mixture of step extensions on the master grid.
AdaptedProcess combined_compensator(const FiniteFilteredSpace& space,
                                    const CombinedProcesses& cp, int n);
// Mixed compensator evaluated at a master-level stopping time: per atom
// sum_j w_j A^j_{sigma_j(w)} with sigma_j the level-j round-up of tau. This
// equals the step extension at tau exactly, by construction.
RandomVariable combined_compensator_at(const FiniteFilteredSpace& space,
                                       const CombinedProcesses& cp, int n,
                                       const StoppingTime& tau);

// sigma_n = inf{t in D_n : t >= tau}; always a level-n stopping time, with
// sigma_n >= tau and sigma_n - tau < 1/2^n per atom.
StoppingTime sigma_round_up(const StoppingTime& tau, int n);

struct CompensatorMeanRow {
  int n = 0;
  double mean_at_tau = 0.0;      // E[mixed_A_tau]
  double stopped_mixture = 0.0;  // sum_j w_j E[S_{sigma_j}] - E[M_0]
  double identity_gap = 0.0;     // |mean_at_tau - stopped_mixture|
  double reference_mean = 0.0;   // E[A_tau] for the master-depth A
  double reference_gap = 0.0;    // |mean_at_tau - reference_mean|
};

// Optional-stopping table: per start level, E[mixed_A_tau] against the
// mixture of E[S_{sigma_j}] - E[M_0] and against the reference E[A_tau].
// Asserts the per-atom step-extension identity exactly.
std::vector<CompensatorMeanRow> compensator_mean_at_tau(const FiniteFilteredSpace& space,
                                                        const CombinedProcesses& cp,
                                                        const StoppingTime& tau);

struct PredictabilityGridRow {
  Dyadic t;
  int eligible_levels = 0;
  double max_surplus = 0.0;  // max over atoms of (max_n mixed_A_t - A_t)
  double max_abs_gap = 0.0;
  double jump = 0.0;  // reference A's jump at t, max over atoms
  bool continuity = false;
  bool upper_ok = false;     // surplus <= tol
  bool equality_ok = false;  // |gap| <= tol when continuous at t
};

struct PredictabilityTauRow {
  std::size_t tau_index = 0;
  std::size_t asserted_atoms = 0;
  std::size_t skipped_atoms = 0;  // tau value finer than every computed level
  double max_abs_gap = 0.0;
  bool ok = false;
};

struct PredictabilityReport {
  double tol = 0.0;
  double jump_threshold = 0.0;
  std::vector<PredictabilityGridRow> grid;
  std::vector<PredictabilityTauRow> taus;
  bool upper_ok = false;     // every grid row
  bool equality_ok = false;  // every continuity row
  bool taus_ok = false;      // every stopping-time row
};

// Finite-level surrogate of the limsup predictability criterion: the
// running max over levels of the mixed compensators against the reference
// A, evaluated at round-up-free (time, level) pairs — the step extension
// anticipates jumps within 1/2^n below them, so only those evaluations
// carry the limit statement at finite depth. Checks the upper inequality
// at all eligible master-grid times, equality where the reference A has no
// jump, and equality per atom at the supplied stopping times.
PredictabilityReport predictability_check(const FiniteFilteredSpace& space,
                                          const CombinedProcesses& cp,
                                          const std::vector<StoppingTime>& taus,
                                          double tol = 1e-9,
                                          double jump_threshold = 1e-9);

struct ConvergenceCurveRow {
  int depth = 0;
  std::string target;            // "t=j/2^n" or a hitting-time label
  double l1_gap_a = 0.0;         // || mixed_A_tau - A_tau ||_1
  double l1_gap_m1 = 0.0;        // || mixed_M_1 - M_1 ||_1
  double mean_gap_at_tau = 0.0;  // | E[mixed_A_tau] - E[A_tau] |
  double per_atom_bound = 0.0;   // l1_gap_a / min atom probability
};

struct ConvergenceCurve {
  std::vector<ConvergenceCurveRow> rows;  // ordered by (depth, target)
};

// Full pipeline per depth: decompose, extract weights from (M^n_1), mix,
// measure against the master-depth reference at the named stopping times.
ConvergenceCurve convergence_curve(
    const FiniteFilteredSpace& space, const AdaptedProcess& s, int level_from,
    int level_to, const std::vector<std::pair<std::string, StoppingTime>>& targets,
    int threads = 1);

}  // namespace dmlab
