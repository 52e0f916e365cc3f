#include "dmlab/komlos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dmlab/numeric.hpp"

namespace dmlab {

bool ConvexWeights::in_simplex(double tol) const {
  KahanSum sum;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) return false;
    sum.add(w);
  }
  return std::abs(sum.total() - 1.0) <= tol;
}

MinNormFailure::MinNormFailure(std::string message, MinNormResult best)
    : std::runtime_error(std::move(message)), best_(std::move(best)) {}

namespace {

using Matrix = std::vector<std::vector<double>>;

Matrix gram_matrix(const FiniteFilteredSpace& space,
                   std::span<const RandomVariable> vectors) {
  const std::size_t m = vectors.size();
  Matrix g(m, std::vector<double>(m, 0.0));
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a; b < m; ++b) {
      g[a][b] = g[b][a] = inner_product(space, vectors[a], vectors[b]);
    }
  }
  return g;
}

// Solve the (k+1)x(k+1) KKT system of the affine min-norm subproblem over
// the corral: [2G 1; 1^T 0] [alpha; nu] = [0; 1]. Returns false when the
// pivoting degenerates (affinely dependent corral).
bool solve_affine(const Matrix& gram, const std::vector<int>& corral,
                  std::vector<double>& alpha) {
  const std::size_t k = corral.size();
  std::vector<std::vector<double>> a(k + 1, std::vector<double>(k + 2, 0.0));
  double scale = 1.0;
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      a[r][c] = 2.0 * gram[static_cast<std::size_t>(corral[r])]
                        [static_cast<std::size_t>(corral[c])];
      scale = std::max(scale, std::abs(a[r][c]));
    }
    a[r][k] = 1.0;
    a[r][k + 1] = 0.0;
  }
  for (std::size_t c = 0; c < k; ++c) a[k][c] = 1.0;
  a[k][k] = 0.0;
  a[k][k + 1] = 1.0;

  const std::size_t dim = k + 1;
  for (std::size_t col = 0; col < dim; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < dim; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) < 1e-13 * scale) return false;
    std::swap(a[col], a[pivot]);
    for (std::size_t r = 0; r < dim; ++r) {
      if (r == col) continue;
      const double factor = a[r][col] / a[col][col];
      if (factor == 0.0) continue;
      for (std::size_t c = col; c <= dim; ++c) a[r][c] -= factor * a[col][c];
    }
  }
  alpha.assign(k, 0.0);
  for (std::size_t r = 0; r < k; ++r) alpha[r] = a[r][dim] / a[r][r];
  return true;
}

// Euclidean projection onto the probability simplex (sort-based).
void project_simplex(std::vector<double>& v) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumulative += u[k];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (u[k] - candidate > 0.0) theta = candidate;  // k = 0 always qualifies
  }
  for (auto& x : v) x = std::max(0.0, x - theta);
}

struct GramStats {
  double xx = 0.0;                // <x, x>
  std::vector<double> q;          // q_j = <x, f_j>
  double gap = 0.0;               // max_j (xx - q_j) / scale_j
  double min_q = 0.0;
  std::size_t argmin_q = 0;
};

GramStats evaluate(const Matrix& gram, const std::vector<double>& scales,
                   const std::vector<double>& lambda) {
  const std::size_t m = gram.size();
  GramStats st;
  st.q.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    KahanSum s;
    for (std::size_t i = 0; i < m; ++i) {
      if (lambda[i] != 0.0) s.add(lambda[i] * gram[i][j]);
    }
    st.q[j] = s.total();
  }
  KahanSum xs;
  for (std::size_t i = 0; i < m; ++i) {
    if (lambda[i] != 0.0) xs.add(lambda[i] * st.q[i]);
  }
  st.xx = xs.total();
  st.gap = -std::numeric_limits<double>::infinity();
  st.min_q = std::numeric_limits<double>::infinity();
  st.argmin_q = 0;
  for (std::size_t j = 0; j < m; ++j) {
    st.gap = std::max(st.gap, (st.xx - st.q[j]) / scales[j]);
    if (st.q[j] < st.min_q) {
      st.min_q = st.q[j];
      st.argmin_q = j;
    }
  }
  return st;
}

MinNormResult finish(const FiniteFilteredSpace& space,
                     std::span<const RandomVariable> vectors,
                     const std::vector<double>& lambda,
                     const std::vector<double>& scales, int iterations,
                     bool used_fallback) {
  const std::size_t m = vectors.size();
  MinNormResult res;
  res.iterations = iterations;
  res.used_fallback = used_fallback;

  // Clamp active-set roundoff and renormalize; the sum differs from 1 by at
  // most a few ulps.
  std::vector<double> w = lambda;
  KahanSum sum;
  for (auto& x : w) {
    if (x < 0.0) x = 0.0;
    sum.add(x);
  }
  const double total = sum.total();
  require(total > 0.0, "min_norm_convex_hull: degenerate weights");
  for (auto& x : w) x /= total;

  res.weights.start = 0;
  res.weights.weights = w;

  RandomVariable g(space.atom_count());
  for (std::size_t i = 0; i < g.size(); ++i) {
    KahanSum s;
    for (std::size_t j = 0; j < m; ++j) {
      if (w[j] != 0.0) s.add(w[j] * vectors[j][i]);
    }
    g[i] = s.total();
  }
  res.norm = lp_norm(space, g, 2);

  // Final certificate from the materialized point.
  const double gg = inner_product(space, g, g);
  double gap = -std::numeric_limits<double>::infinity();
  double min_q = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m; ++j) {
    const double qj = inner_product(space, g, vectors[j]);
    gap = std::max(gap, (gg - qj) / scales[j]);
    min_q = std::min(min_q, qj);
  }
  res.certificate_gap = std::max(0.0, gap);
  // ||x||^2 >= ||g||^2 + 2 min_j <g, f_j - g> for every x in the hull.
  res.lower_bound = std::sqrt(std::max(0.0, 2.0 * min_q - gg));
  res.point = std::move(g);
  return res;
}

}  // namespace

MinNormResult min_norm_convex_hull(const FiniteFilteredSpace& space,
                                   std::span<const RandomVariable> vectors,
                                   double tol) {
  require(!vectors.empty(), "min_norm_convex_hull: empty vector list");
  require(tol > 0.0 && std::isfinite(tol), "min_norm_convex_hull: tol must be positive");
  const std::size_t m = vectors.size();
  for (const auto& f : vectors) {
    require(f.size() == space.atom_count(), "min_norm_convex_hull: dimension mismatch");
  }
  const Matrix gram = gram_matrix(space, vectors);
  std::vector<double> scales(m, 1.0);
  for (std::size_t j = 0; j < m; ++j) {
    scales[j] = std::max(1.0, std::sqrt(std::max(0.0, gram[j][j])));
  }
  const int cap =
      10 * static_cast<int>(m) * static_cast<int>(std::max<std::size_t>(space.atom_count(), 1));

  // --- Wolfe active-set phase ---
  std::vector<int> corral{0};
  std::vector<double> mu{1.0};
  std::vector<double> lambda(m, 0.0);
  lambda[0] = 1.0;
  int iterations = 0;
  bool wolfe_ok = true;

  while (true) {
    const GramStats st = evaluate(gram, scales, lambda);
    if (st.gap <= tol) {
      return finish(space, vectors, lambda, scales, iterations, false);
    }
    if (++iterations > cap) {
      wolfe_ok = false;
      break;
    }
    const auto j_new = static_cast<int>(st.argmin_q);
    if (std::find(corral.begin(), corral.end(), j_new) != corral.end()) {
      wolfe_ok = false;  // stalled: best vertex already in the corral
      break;
    }
    corral.push_back(j_new);
    mu.push_back(0.0);

    // Minor cycle: affine minimum over the corral, walking back onto the
    // simplex face and dropping vertices that hit zero.
    while (true) {
      std::vector<double> alpha;
      if (!solve_affine(gram, corral, alpha)) {
        wolfe_ok = false;  // affinely dependent corral
        break;
      }
      const bool inside =
          std::all_of(alpha.begin(), alpha.end(), [](double a) { return a >= -1e-12; });
      if (inside) {
        mu = alpha;
        for (auto& x : mu) x = std::max(x, 0.0);
        break;
      }
      double theta = 1.0;
      for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (alpha[i] < 0.0 && mu[i] > alpha[i]) {
          theta = std::min(theta, mu[i] / (mu[i] - alpha[i]));
        }
      }
      std::vector<int> next_corral;
      std::vector<double> next_mu;
      for (std::size_t i = 0; i < corral.size(); ++i) {
        const double z = mu[i] + theta * (alpha[i] - mu[i]);
        if (z > 1e-14) {
          next_corral.push_back(corral[i]);
          next_mu.push_back(z);
        }
      }
      if (next_corral.empty() || next_corral.size() == corral.size()) {
        wolfe_ok = false;  // no progress
        break;
      }
      corral = std::move(next_corral);
      mu = std::move(next_mu);
      if (++iterations > cap) {
        wolfe_ok = false;
        break;
      }
    }
    if (!wolfe_ok) break;
    std::fill(lambda.begin(), lambda.end(), 0.0);
    for (std::size_t i = 0; i < corral.size(); ++i) {
      lambda[static_cast<std::size_t>(corral[i])] = mu[i];
    }
  }

  // --- Projected-gradient fallback ---
  std::vector<double> best = lambda;
  double best_gap = evaluate(gram, scales, best).gap;
  std::vector<double> x(m, 1.0 / static_cast<double>(m));
  double row_norm = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double row = 0.0;
    for (std::size_t k = 0; k < m; ++k) row += std::abs(gram[j][k]);
    row_norm = std::max(row_norm, row);
  }
  const double step = row_norm > 0.0 ? 1.0 / (2.0 * row_norm) : 1.0;
  for (int it = 0; it < cap; ++it) {
    const GramStats st = evaluate(gram, scales, x);
    if (st.gap < best_gap) {
      best_gap = st.gap;
      best = x;
    }
    if (st.gap <= tol) {
      return finish(space, vectors, x, scales, iterations + it, true);
    }
    for (std::size_t j = 0; j < m; ++j) x[j] -= 2.0 * step * st.q[j];
    project_simplex(x);
  }

  MinNormResult best_result = finish(space, vectors, best, scales, iterations + cap, true);
  throw MinNormFailure(
      "min_norm_convex_hull: no convergence within the iteration cap (certificate gap " +
          std::to_string(best_result.certificate_gap) + ")",
      std::move(best_result));
}

MinNormResult hilbert_komlos_step(const FiniteFilteredSpace& space,
                                  std::span<const RandomVariable> tail, double slack,
                                  double tol) {
  require(!tail.empty(), "hilbert_komlos_step: empty tail");
  require(slack > 0.0, "hilbert_komlos_step: slack must be positive");
  return min_norm_convex_hull(space, tail, std::min(slack, tol));
}

RandomVariable truncate(const RandomVariable& f, int level) {
  require(level >= 1, "truncate: level must be >= 1");
  RandomVariable out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    out[i] = std::abs(f[i]) <= static_cast<double>(level) ? f[i] : 0.0;
  }
  return out;
}

KomlosExtraction komlos_extract(const FiniteFilteredSpace& space,
                                const std::vector<RandomVariable>& sequence,
                                int truncation_levels, double tol) {
  require(!sequence.empty(), "komlos_extract: empty sequence");
  const std::size_t n_seq = sequence.size();
  for (const auto& f : sequence) {
    require(f.size() == space.atom_count(), "komlos_extract: dimension mismatch");
    require(all_finite(f.values), "komlos_extract: non-finite input");
  }

  double max_abs = 0.0;
  for (const auto& f : sequence) {
    for (double v : f.values) max_abs = std::max(max_abs, std::abs(v));
  }
  const int auto_stages = std::max(1, static_cast<int>(std::ceil(max_abs)));
  const int stages = truncation_levels <= 0 ? auto_stages
                                            : std::min(truncation_levels, auto_stages);
  const int skipped = truncation_levels <= 0 ? 0
                                             : std::max(0, truncation_levels - auto_stages);

  // Weight matrix rows: weights[n][j] over original indices, support [n, N).
  Matrix weight(n_seq, std::vector<double>(n_seq, 0.0));
  for (std::size_t n = 0; n < n_seq; ++n) weight[n][n] = 1.0;

  KomlosExtraction out;
  out.report.stages_run = stages;
  out.report.stages_skipped = skipped;
  std::vector<MinNormResult> last_solves(n_seq);

  for (int stage = 1; stage <= stages; ++stage) {
    std::vector<RandomVariable> truncated(n_seq);
    for (std::size_t j = 0; j < n_seq; ++j) truncated[j] = truncate(sequence[j], stage);

    std::vector<RandomVariable> combined(n_seq);
    for (std::size_t n = 0; n < n_seq; ++n) {
      RandomVariable v(space.atom_count());
      for (std::size_t i = 0; i < v.size(); ++i) {
        KahanSum s;
        for (std::size_t j = n; j < n_seq; ++j) {
          if (weight[n][j] != 0.0) s.add(weight[n][j] * truncated[j][i]);
        }
        v[i] = s.total();
      }
      combined[n] = std::move(v);
    }

    Matrix next(n_seq, std::vector<double>(n_seq, 0.0));
    for (std::size_t n = 0; n < n_seq; ++n) {
      MinNormResult res;
      try {
        res = hilbert_komlos_step(
            space, std::span<const RandomVariable>(combined.data() + n, n_seq - n),
            1.0 / static_cast<double>(n + 1), tol);
      } catch (const MinNormFailure& failure) {
        throw std::runtime_error("komlos_extract: solver failed at stage " +
                                 std::to_string(stage) + ", index " + std::to_string(n + 1) +
                                 ": " + failure.what());
      }
      for (std::size_t k = 0; k < res.weights.weights.size(); ++k) {
        const double w = res.weights.weights[k];
        if (w == 0.0) continue;
        const std::size_t source = n + k;
        for (std::size_t j = source; j < n_seq; ++j) {
          next[n][j] += w * weight[source][j];
        }
      }
      last_solves[n] = std::move(res);
    }
    weight = std::move(next);
  }

  out.weights.resize(n_seq);
  out.combinations.resize(n_seq);
  for (std::size_t n = 0; n < n_seq; ++n) {
    ConvexWeights cw;
    cw.start = static_cast<int>(n);
    cw.weights.assign(weight[n].begin() + static_cast<std::ptrdiff_t>(n), weight[n].end());
    out.weights[n] = std::move(cw);

    RandomVariable g(space.atom_count());
    for (std::size_t i = 0; i < g.size(); ++i) {
      KahanSum s;
      for (std::size_t j = n; j < n_seq; ++j) {
        if (weight[n][j] != 0.0) s.add(weight[n][j] * sequence[j][i]);
      }
      g[i] = s.total();
    }
    out.combinations[n] = std::move(g);
  }

  out.report.entries.resize(n_seq);
  out.report.sup_tail_inf = 0.0;
  for (std::size_t n = 0; n < n_seq; ++n) {
    KomlosEntry e;
    e.n = static_cast<int>(n) + 1;
    e.norm = lp_norm(space, out.combinations[n], 2);
    e.tail_inf = last_solves[n].norm;
    e.certificate_gap = std::max(0.0, last_solves[n].norm - last_solves[n].lower_bound);
    out.report.sup_tail_inf = std::max(out.report.sup_tail_inf, e.tail_inf);
    out.report.entries[n] = e;
  }

  out.report.pairwise_l1.assign(n_seq, std::vector<double>(n_seq, 0.0));
  for (std::size_t k = 0; k < n_seq; ++k) {
    for (std::size_t m2 = k + 1; m2 < n_seq; ++m2) {
      RandomVariable diff(space.atom_count());
      for (std::size_t i = 0; i < diff.size(); ++i) {
        diff[i] = out.combinations[k][i] - out.combinations[m2][i];
      }
      const double d = lp_norm(space, diff, 1);
      out.report.pairwise_l1[k][m2] = d;
      out.report.pairwise_l1[m2][k] = d;
    }
  }
  return out;
}

ExtractionCheck verify_extraction(const FiniteFilteredSpace& space,
                                  const std::vector<RandomVariable>& sequence,
                                  const KomlosExtraction& extraction) {
  ExtractionCheck check;
  const std::size_t n_seq = sequence.size();
  const auto fail = [&check](const std::string& what) {
    if (check.ok) {
      check.ok = false;
      check.first_failure = what;
    }
  };
  if (extraction.weights.size() != n_seq || extraction.combinations.size() != n_seq ||
      extraction.report.entries.size() != n_seq) {
    fail("extraction size mismatch");
    return check;
  }

  const double a_sup = extraction.report.sup_tail_inf;
  check.min_tail_inf_step = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < n_seq; ++n) {
    const ConvexWeights& w = extraction.weights[n];
    if (w.start != static_cast<int>(n) || w.support_end() > static_cast<int>(n_seq)) {
      fail("weights for n=" + std::to_string(n + 1) + " have a bad support window");
    }
    if (!w.in_simplex(1e-12)) {
      fail("weights for n=" + std::to_string(n + 1) + " are not in the simplex");
    }
    RandomVariable rebuilt(space.atom_count());
    for (std::size_t i = 0; i < rebuilt.size(); ++i) {
      KahanSum s;
      for (std::size_t k = 0; k < w.weights.size(); ++k) {
        if (w.weights[k] != 0.0) s.add(w.weights[k] * sequence[n + k][i]);
      }
      rebuilt[i] = s.total();
    }
    for (std::size_t i = 0; i < rebuilt.size(); ++i) {
      check.max_membership_gap = std::max(
          check.max_membership_gap, std::abs(rebuilt[i] - extraction.combinations[n][i]));
    }
    const double slack = 1.0 / static_cast<double>(n + 1);
    const double excess = extraction.report.entries[n].norm - (a_sup + slack);
    check.max_norm_excess = std::max(check.max_norm_excess, excess);
    if (excess > 1e-8) {
      fail("norm bound violated at n=" + std::to_string(n + 1));
    }
    if (n + 1 < n_seq) {
      check.min_tail_inf_step =
          std::min(check.min_tail_inf_step, extraction.report.entries[n + 1].tail_inf -
                                                extraction.report.entries[n].tail_inf);
    }
  }
  if (check.max_membership_gap > 1e-12) fail("membership reconstruction gap > 1e-12");
  if (n_seq > 1 && check.min_tail_inf_step < -1e-9) {
    fail("tail infima are not nondecreasing");
  }

  Matrix dist2(n_seq, std::vector<double>(n_seq, 0.0));
  for (std::size_t k = 0; k < n_seq; ++k) {
    for (std::size_t m2 = k + 1; m2 < n_seq; ++m2) {
      RandomVariable diff(space.atom_count());
      for (std::size_t i = 0; i < diff.size(); ++i) {
        diff[i] = extraction.combinations[k][i] - extraction.combinations[m2][i];
      }
      const double d = lp_norm(space, diff, 2);
      dist2[k][m2] = dist2[m2][k] = d * d;
    }
  }
  for (std::size_t n = 0; n < n_seq; ++n) {
    const auto& entry = extraction.report.entries[n];
    const double certified = std::max(0.0, entry.tail_inf - entry.certificate_gap);
    const double slack = 1.0 / static_cast<double>(n + 1);
    const double bound =
        4.0 * (a_sup + slack) * (a_sup + slack) - 4.0 * certified * certified;
    for (std::size_t k = n; k < n_seq; ++k) {
      for (std::size_t m2 = k; m2 < n_seq; ++m2) {
        check.max_pair_bound_excess =
            std::max(check.max_pair_bound_excess, dist2[k][m2] - bound);
        if (dist2[k][m2] > bound + 1e-8) {
          fail("pairwise bound violated for n=" + std::to_string(n + 1) +
               ", pair (" + std::to_string(k + 1) + ", " + std::to_string(m2 + 1) + ")");
        }
      }
    }
  }
  return check;
}

}  // namespace dmlab
