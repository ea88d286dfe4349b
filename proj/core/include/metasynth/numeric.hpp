#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "metasynth/error.hpp"

namespace metasynth {

/// Uniform integer in [0, n) by rejection; identical on every platform,
/// unlike std::uniform_int_distribution.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw PreconditionError("uniform_below requires n > 0");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Fisher-Yates with uniform_below.
template <typename T>
void portable_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_below(rng, i)]);
  }
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// 1 - cos(a, b), clamped to [0, 2]. A zero vector is at distance 1 from
/// everything, including itself, except that identical inputs give 0.
inline double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw PreconditionError("cosine_distance: dimension mismatch");
  if (&a == &b || a == b) {
    bool zero = true;
    for (double x : a) zero = zero && x == 0.0;
    if (!zero) return 0.0;
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  const double d = 1.0 - dot / std::sqrt(na * nb);
  return d < 0.0 ? 0.0 : (d > 2.0 ? 2.0 : d);
}

}  // namespace metasynth
