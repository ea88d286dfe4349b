#include <gtest/gtest.h>

#include <random>

#include "metasynth/text.hpp"

using namespace metasynth;

TEST(Text, SplitWhitespaceHandlesUnicodeSpaces) {
  // U+00A0 no-break space and U+3000 ideographic space both separate words.
  const std::string s = "alpha\xC2\xA0" "beta\xE3\x80\x80gamma \t\n delta";
  const auto parts = text::split_whitespace(s);
  ASSERT_EQ(parts.size(), 4u);
  EXPECT_EQ(parts[0], "alpha");
  EXPECT_EQ(parts[3], "delta");
  EXPECT_EQ(text::count_words(s), 4u);
}

TEST(Text, SplitWhitespaceIsTotalOnRandomBytes) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    std::string s(rng() % 64, '\0');
    for (auto& c : s) c = static_cast<char>(rng() & 0xFF);
    std::size_t total = 0;
    for (auto part : text::split_whitespace(s)) {
      EXPECT_FALSE(part.empty());
      total += part.size();
    }
    EXPECT_LE(total, s.size());
  }
}

TEST(Text, LexicalTokensKeepPunctuation) {
  const auto t = text::lexical_tokens("The cat, THE dog.");
  EXPECT_EQ(t, (std::vector<std::string>{"the", "cat,", "the", "dog."}));
}

TEST(Text, NormalizedTokensDropPunctuation) {
  const auto t = text::normalized_tokens("Don't  STOP -- now!");
  EXPECT_EQ(t, (std::vector<std::string>{"dont", "stop", "now"}));
}

TEST(Text, ExtractTaggedReturnsEveryPayloadInOrder) {
  const auto t = text::extract_tagged("x <a>one</a> y <a> two </a> <a>open", "a");
  EXPECT_EQ(t, (std::vector<std::string>{"one", " two "}));
}

TEST(Text, ParseListAcceptsBracketsQuotesAndBullets) {
  EXPECT_EQ(text::parse_list("[\"alpha\", 'beta' , gamma]"), (std::vector<std::string>{"alpha", "beta", "gamma"}));
  EXPECT_EQ(text::parse_list("- one\n- two"), (std::vector<std::string>{"one", "two"}));
  EXPECT_TRUE(text::parse_list("[]").empty());
}

TEST(Text, CaseInsensitiveHelpers) {
  EXPECT_TRUE(text::icontains("Hello World", "WORLD"));
  EXPECT_FALSE(text::icontains("Hello", "help"));
  EXPECT_TRUE(text::iequals("Expert", "eXPERT"));
  EXPECT_EQ(text::trim("  x y \n"), "x y");
}

TEST(Text, Fnv1aMatchesPublishedVectors) {
  EXPECT_EQ(text::fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(text::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(text::fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(text::hex64(0xabcULL), "0000000000000abc");
}
