#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmlab {

// Neumaier-compensated accumulator. Expectations, norms and inner products
// run through this; the identities the library checks at 1e-12 need the
// summation error well below that on 2^12-atom spaces.
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double total() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Prefer the const char* overload in hot paths: the std::string one builds
// its message even when the condition holds.
inline void require(bool cond, const char* message) {
  if (!cond) throw std::invalid_argument(message);
}
inline void require(bool cond, const std::string& message) {
  if (!cond) throw std::invalid_argument(message);
}

inline bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace dmlab
