#include "metasynth/error.hpp"

namespace metasynth {
namespace {

std::string summarize(const std::vector<std::string>& problems) {
  std::string out = "invalid configuration:";
  for (const auto& p : problems) out += "\n  - " + p;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : Error(summarize(problems)), problems_(std::move(problems)) {}

}  // namespace metasynth
