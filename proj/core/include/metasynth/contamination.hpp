#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

namespace metasynth::contamination {

inline constexpr const char* kNormalization =
    "lowercase, punctuation stripped, whitespace collapsed, token n-grams";

struct ContaminationReport {
  std::vector<std::size_t> n_values;
  /// Fraction of reference examples contaminated, per entry of n_values.
  std::vector<double> fractions;
  std::vector<std::size_t> contaminated;
  std::size_t n_reference = 0;
  std::string normalization = kNormalization;
  std::vector<std::string> warnings;

  /// {"n_reference", "normalization", "EM-1": 0.12, ...}
  nlohmann::json to_json() const;
};

/// EM-n: a reference counts as contaminated at n if any of its token n-grams
/// occurs contiguously in any target. Target n-grams are hash-indexed, so the
/// cost is linear in total tokens. References shorter than n are skipped
/// (uncontaminated) with a warning.
ContaminationReport em_overlap(const std::vector<std::string>& references, const std::vector<std::string>& targets,
                               const std::vector<std::size_t>& n_values);

/// Per-reference flags at one n, for callers that need the detail.
std::vector<bool> contaminated_flags(const std::vector<std::string>& references,
                                     const std::vector<std::string>& targets, std::size_t n);

}  // namespace metasynth::contamination
