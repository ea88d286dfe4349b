#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "metasynth/contamination.hpp"
#include "metasynth/error.hpp"
#include "test_support.hpp"

using namespace metasynth;
using namespace metasynth::contamination;

namespace {

std::string vocab_text(std::mt19937_64& rng, std::size_t n, const std::string& prefix, std::size_t vocab) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + prefix + std::to_string(rng() % vocab);
  return s;
}

}  // namespace

TEST(EmOverlap, PlantedVerbatimOverlap) {
  const std::string ref = "the cat sat on the mat today ok fine yes";
  const auto r = em_overlap({ref}, {"prefix words. The CAT sat, on the mat today ok fine yes! trailing"}, {10});
  EXPECT_EQ(r.fractions, (std::vector<double>{1.0}));
  EXPECT_EQ(r.contaminated, (std::vector<std::size_t>{1}));
  EXPECT_EQ(r.to_json().at("EM-10"), 1.0);
}

TEST(EmOverlap, DisjointVocabulariesScoreZero) {
  std::mt19937_64 rng(1);
  std::vector<std::string> refs, targets;
  for (int i = 0; i < 50; ++i) refs.push_back(vocab_text(rng, 30, "r", 100));
  for (int i = 0; i < 50; ++i) targets.push_back(vocab_text(rng, 200, "t", 100));
  const auto r = em_overlap(refs, targets, {1, 2, 3, 5, 10});
  for (double f : r.fractions) EXPECT_EQ(f, 0.0);
  EXPECT_EQ(r.n_reference, 50u);
}

TEST(EmOverlap, SeventeenPlantedFiveGrams) {
  std::mt19937_64 rng(17);
  std::vector<std::string> refs, targets;
  for (int i = 0; i < 200; ++i) refs.push_back(vocab_text(rng, 20, "r" + std::to_string(i) + "x", 1000));
  for (int i = 0; i < 40; ++i) targets.push_back(vocab_text(rng, 100, "t", 1000));
  std::vector<std::size_t> planted(200);
  std::iota(planted.begin(), planted.end(), 0);
  std::shuffle(planted.begin(), planted.end(), rng);
  for (int k = 0; k < 17; ++k) {
    const auto toks = testsupport::oracle_tokens(refs[planted[k]]);
    const auto start = rng() % (toks.size() - 5);
    std::string gram;
    for (std::size_t j = 0; j < 5; ++j) gram += " " + toks[start + j];
    targets[rng() % targets.size()] += gram + " t";
  }
  const auto r = em_overlap(refs, targets, {5});
  EXPECT_EQ(r.contaminated[0], 17u);
  EXPECT_DOUBLE_EQ(r.fractions[0], 17.0 / 200.0);
  std::size_t oracle = 0;
  for (const auto& ref : refs) oracle += testsupport::oracle_contaminated(ref, targets, 5);
  EXPECT_EQ(oracle, 17u);
}

TEST(EmOverlap, HashIndexMatchesQuadraticScanAndIsMonotone) {
  std::mt19937_64 rng(200);
  for (int t = 0; t < 200; ++t) {
    const auto vocab = 3 + rng() % 12;
    std::vector<std::string> refs, targets;
    for (std::size_t i = 0, n = 1 + rng() % 8; i < n; ++i) refs.push_back(testsupport::random_toy_text(rng, rng() % 15, vocab));
    for (std::size_t i = 0, n = 1 + rng() % 5; i < n; ++i) targets.push_back(testsupport::random_toy_text(rng, rng() % 30, vocab));
    const std::vector<std::size_t> ns = {1, 2, 3, 4, 5, 6, 8, 10};
    const auto r = em_overlap(refs, targets, ns);
    for (std::size_t k = 0; k < ns.size(); ++k) {
      const auto flags = contaminated_flags(refs, targets, ns[k]);
      std::size_t count = 0;
      for (std::size_t i = 0; i < refs.size(); ++i) {
        ASSERT_EQ(flags[i], testsupport::oracle_contaminated(refs[i], targets, ns[k]));
        count += flags[i];
      }
      ASSERT_EQ(r.contaminated[k], count);
      if (k) ASSERT_LE(r.fractions[k], r.fractions[k - 1]);
    }
  }
}

TEST(EmOverlap, SelfCheckAndShortReferences) {
  const std::vector<std::string> c = {"one two three four five", "six seven eight nine ten eleven"};
  const auto r = em_overlap(c, c, {1, 3, 5});
  for (double f : r.fractions) EXPECT_EQ(f, 1.0);
  const auto skip = em_overlap(c, c, {6});
  EXPECT_EQ(skip.fractions[0], 0.5);
  EXPECT_FALSE(skip.warnings.empty());
}

TEST(EmOverlap, Preconditions) {
  EXPECT_THROW(em_overlap({}, {"a"}, {1}), PreconditionError);
  EXPECT_THROW(em_overlap({"a"}, {}, {1}), PreconditionError);
  EXPECT_THROW(em_overlap({"a"}, {"a"}, {0}), PreconditionError);
  EXPECT_THROW(em_overlap({"a"}, {"a"}, {51}), PreconditionError);
}
