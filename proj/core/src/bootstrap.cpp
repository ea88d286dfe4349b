#include <algorithm>
#include <cmath>
#include <random>

#include "metasynth/diversity.hpp"
#include "metasynth/error.hpp"
#include "metasynth/numeric.hpp"

namespace metasynth::diversity {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw PreconditionError("quantile of empty data");
  if (q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(h));
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + (h - static_cast<double>(i)) * (sorted[i + 1] - sorted[i]);
}

BootstrapResult bootstrap_ci(std::size_t n_items, const Statistic& statistic, std::size_t n_resamples, double level,
                             std::uint64_t rng_seed) {
  if (n_items < 2) throw PreconditionError("bootstrap needs at least 2 values");
  if (n_resamples < 100) throw PreconditionError("bootstrap needs at least 100 resamples");
  if (!(level > 0.0 && level < 1.0)) throw PreconditionError("bootstrap level must lie in (0, 1)");

  std::mt19937_64 rng(rng_seed);
  std::vector<std::size_t> idx(n_items);
  std::vector<double> stats;
  stats.reserve(n_resamples);
  double sum = 0.0;
  for (std::size_t r = 0; r < n_resamples; ++r) {
    for (auto& i : idx) i = uniform_below(rng, n_items);
    const double s = statistic(idx);
    if (!std::isfinite(s)) throw Error("bootstrap statistic is not finite");
    stats.push_back(s);
    sum += s;
  }
  BootstrapResult out;
  out.mean = sum / static_cast<double>(n_resamples);
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - level) / 2.0;
  out.lo = std::min(quantile_sorted(stats, alpha), out.mean);
  out.hi = std::max(quantile_sorted(stats, 1.0 - alpha), out.mean);
  out.n_resamples = n_resamples;
  out.level = level;
  return out;
}

BootstrapResult bootstrap_ci(const std::vector<double>& values, std::size_t n_resamples, double level,
                             std::uint64_t rng_seed) {
  return bootstrap_ci(
      values.size(),
      [&values](const std::vector<std::size_t>& idx) {
        double s = 0.0;
        for (auto i : idx) s += values[i];
        return s / static_cast<double>(idx.size());
      },
      n_resamples, level, rng_seed);
}

}  // namespace metasynth::diversity
