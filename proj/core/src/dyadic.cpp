#include "dmlab/dyadic.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

#include "dmlab/numeric.hpp"

namespace dmlab {

namespace {
constexpr int kMaxLevel = 62;
}

Dyadic Dyadic::of(std::int64_t j, int n) {
  require(n >= 0 && n <= kMaxLevel, "dyadic level out of range");
  require(j >= 0 && j <= (std::int64_t{1} << n), "dyadic time outside [0, 1]");
  while (n > 0 && j % 2 == 0) {
    j /= 2;
    --n;
  }
  return Dyadic{j, n};
}

double Dyadic::value() const {
  return static_cast<double>(num) * std::ldexp(1.0, -level);
}

std::string Dyadic::str() const {
  return std::to_string(num) + "/2^" + std::to_string(level);
}

std::optional<Dyadic> Dyadic::parse(std::string_view s) {
  const auto slash = s.find("/2^");
  if (slash == std::string_view::npos) return std::nullopt;
  std::int64_t j = 0;
  int n = 0;
  const char* num_begin = s.data();
  const char* num_end = s.data() + slash;
  auto r1 = std::from_chars(num_begin, num_end, j);
  if (r1.ec != std::errc{} || r1.ptr != num_end) return std::nullopt;
  const char* lvl_begin = s.data() + slash + 3;
  const char* lvl_end = s.data() + s.size();
  auto r2 = std::from_chars(lvl_begin, lvl_end, n);
  if (r2.ec != std::errc{} || r2.ptr != lvl_end) return std::nullopt;
  if (n < 0 || n > kMaxLevel || j < 0 || j > (std::int64_t{1} << n)) return std::nullopt;
  return Dyadic::of(j, n);
}

bool operator<(const Dyadic& a, const Dyadic& b) {
  const int c = std::max(a.level, b.level);
  return (a.num << (c - a.level)) < (b.num << (c - b.level));
}

bool on_grid(const Dyadic& t, int n) { return t.level <= n; }

std::int64_t index_at_level(const Dyadic& t, int n) {
  require(on_grid(t, n), "time " + t.str() + " is not on the level-" + std::to_string(n) + " grid");
  return t.num << (n - t.level);
}

Dyadic round_up_to_level(const Dyadic& t, int n) {
  require(n >= 0 && n <= kMaxLevel, "dyadic level out of range");
  if (t.level <= n) return t;
  // ceil(num / 2^(t.level - n))
  const std::int64_t shift = std::int64_t{1} << (t.level - n);
  return Dyadic::of((t.num + shift - 1) / shift, n);
}

DyadicGrid::DyadicGrid(int n) : level(n) {
  require(n >= 0 && n <= kMaxLevel, "dyadic level out of range");
}

Dyadic DyadicGrid::at(std::int64_t j) const { return Dyadic::of(j, level); }

std::vector<Dyadic> DyadicGrid::times() const {
  std::vector<Dyadic> out;
  out.reserve(static_cast<std::size_t>(point_count()));
  for (std::int64_t j = 0; j < point_count(); ++j) out.push_back(at(j));
  return out;
}

}  // namespace dmlab
