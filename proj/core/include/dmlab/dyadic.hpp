#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dmlab {

// Exact dyadic time j/2^n in [0, 1], canonicalized to lowest terms
// (num odd or level == 0). Grid-time equality must be exact, so these are
// integer pairs, never doubles.
struct Dyadic {
  std::int64_t num = 0;
  int level = 0;

  static Dyadic of(std::int64_t j, int n);
  static Dyadic zero() { return Dyadic{}; }
  static Dyadic one() { return Dyadic{1, 0}; }

  double value() const;
  bool operator==(const Dyadic&) const = default;
  // Formats as "j/2^n", e.g. "3/2^2" for 3/4.
  std::string str() const;
  static std::optional<Dyadic> parse(std::string_view s);
};

bool operator<(const Dyadic& a, const Dyadic& b);
inline bool operator>(const Dyadic& a, const Dyadic& b) { return b < a; }
inline bool operator<=(const Dyadic& a, const Dyadic& b) { return !(b < a); }
inline bool operator>=(const Dyadic& a, const Dyadic& b) { return !(a < b); }

// True iff t lies on the level-n grid (t = j/2^n for some integer j).
bool on_grid(const Dyadic& t, int n);
// Index j with t = j/2^n; throws if t is not a level-n grid point.
std::int64_t index_at_level(const Dyadic& t, int n);
// Smallest level-n grid point >= t (the sigma_n round-up of the limiting
// procedure); t must lie in [0, 1].
Dyadic round_up_to_level(const Dyadic& t, int n);

// The grid D_n: times j/2^n for j = 0..2^n, horizon fixed at 1.
struct DyadicGrid {
  int level = 0;

  explicit DyadicGrid(int n);
  std::int64_t point_count() const { return (std::int64_t{1} << level) + 1; }
  Dyadic at(std::int64_t j) const;
  std::vector<Dyadic> times() const;
};

}  // namespace dmlab
