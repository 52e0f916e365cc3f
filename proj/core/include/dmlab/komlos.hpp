#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmlab/filtered_space.hpp"

namespace dmlab {

// Finitely supported simplex point over sequence indices start, start+1, ...
struct ConvexWeights {
  int start = 0;
  std::vector<double> weights;  // weight for index start + k

  int support_end() const { return start + static_cast<int>(weights.size()); }
  bool in_simplex(double tol = 1e-12) const;
};

struct MinNormResult {
  ConvexWeights weights;  // over the input list, start = 0
  RandomVariable point;   // g = sum_j w_j f_j
  double norm = 0.0;
  // max_j (<g,g> - <g,f_j>) / max(1, ||f_j||); <= tol at termination.
  double certificate_gap = 0.0;
  // Certified lower bound on the true minimum norm, from the same
  // first-order inequality.
  double lower_bound = 0.0;
  int iterations = 0;
  bool used_fallback = false;
};

// Raised when neither the active-set iteration nor the fallback reaches the
// certificate within the iteration cap; carries the best iterate found.
class MinNormFailure : public std::runtime_error {
 public:
  MinNormFailure(std::string message, MinNormResult best);
  const MinNormResult& best() const { return best_; }

 private:
  MinNormResult best_;
};

// Minimum-norm point of conv{f_0, ..., f_{m-1}} in the probability-weighted
// L^2. Wolfe-style active-set iteration (deterministic first-index start,
// affine subproblems solved via the Gram matrix) with a projected-gradient
// fallback; iteration cap 10 * m * atom_count per phase.
MinNormResult min_norm_convex_hull(const FiniteFilteredSpace& space,
                                   std::span<const RandomVariable> vectors,
                                   double tol = 1e-10);

// One Hilbertian extraction step on a tail f_n, f_{n+1}, ...: the min-norm
// solve at tolerance min(slack, tol), where slack is the 1/n allowance of
// the extraction scheme.
MinNormResult hilbert_komlos_step(const FiniteFilteredSpace& space,
                                  std::span<const RandomVariable> tail, double slack,
                                  double tol = 1e-10);

// f * 1{|f| <= level} per atom.
RandomVariable truncate(const RandomVariable& f, int level);

struct KomlosEntry {
  int n = 0;                     // 1-based sequence position
  double norm = 0.0;             // ||g_n||_2
  double tail_inf = 0.0;         // min-norm value over the tail hull at n
  double certificate_gap = 0.0;  // tail_inf minus its certified lower bound
};

struct KomlosReport {
  std::vector<KomlosEntry> entries;
  double sup_tail_inf = 0.0;
  // ||g_k - g_m||_1 for all pairs; tail maxima are nonexpanding in the
  // start index by construction.
  std::vector<std::vector<double>> pairwise_l1;
  int stages_run = 0;
  int stages_skipped = 0;  // requested truncation stages beyond inactivity
};

struct KomlosExtraction {
  std::vector<ConvexWeights> weights;        // per n, start = n (0-based)
  std::vector<RandomVariable> combinations;  // g_n = sum_j w_j f_j, originals
  KomlosReport report;
};

// Staged extraction: stage i runs the Hilbertian step on the previous
// stage's combinations of the level-i truncations, composing the weight
// matrices; forward supports (weights for position n live on n..N-1) are
// preserved throughout. truncation_levels <= 0 picks
// max(1, ceil(max_n ||f_n||_inf)) so the final stage is truncation-free.
KomlosExtraction komlos_extract(const FiniteFilteredSpace& space,
                                const std::vector<RandomVariable>& sequence,
                                int truncation_levels = 0, double tol = 1e-10);

struct ExtractionCheck {
  bool ok = true;
  std::string first_failure;
  double max_membership_gap = 0.0;   // reconstruction sum vs reported g_n
  double max_norm_excess = 0.0;      // ||g_n|| - (A + 1/n)
  double min_tail_inf_step = 0.0;    // min over n of tail_inf_{n+1} - tail_inf_n
  double max_pair_bound_excess = 0.0;  // pairwise bound residual
};

// The quantitative guarantees of the extraction scheme, re-derived from the
// output: simplex membership and reconstruction, the norm bound
// ||g_n|| <= A + 1/n + 1e-8, monotone tail infima, and the
// parallelogram-derived pairwise bound
// ||g_k - g_m||^2 <= 4 (A + 1/n)^2 - 4 (tail_inf_n - gap_n)^2 + 1e-8
// for all m, k >= n.
ExtractionCheck verify_extraction(const FiniteFilteredSpace& space,
                                  const std::vector<RandomVariable>& sequence,
                                  const KomlosExtraction& extraction);

}  // namespace dmlab
