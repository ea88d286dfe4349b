#include <gtest/gtest.h>

#include <thread>

#include "metasynth/corpus.hpp"
#include "metasynth/error.hpp"
#include "test_support.hpp"

using namespace metasynth;
using testsupport::TempDir;

namespace {

Document doc(const std::string& id, std::size_t words) {
  return make_document(id, testsupport::words(words, "w"), DocumentSource::metasynth, "finance");
}

}  // namespace

TEST(Corpus, DocumentRoundTripsThroughJsonl) {
  TempDir dir;
  auto d = doc("a-1", 300);
  d.summary = "l1\nl2\nl3";
  d.category = "markets";
  d.seed_snapshot = {"bonds"};
  {
    CorpusSink sink(dir / "c.jsonl");
    sink.append(d);
  }
  const auto loaded = load_corpus<Document>(dir / "c.jsonl");
  ASSERT_TRUE(loaded.errors.empty());
  ASSERT_EQ(loaded.corpus.records.size(), 1u);
  EXPECT_EQ(loaded.corpus.records[0], d);
}

TEST(Corpus, WordCountMustMatchText) {
  auto d = doc("a", 300);
  d.word_count = 10;
  EXPECT_THROW(validate(d), ValidationError);
}

TEST(Corpus, GeneratedDocumentsMustFitTheLengthWindow) {
  EXPECT_THROW(validate(doc("short", 150)), ValidationError);
  EXPECT_THROW(validate(doc("long", 521)), ValidationError);
  EXPECT_NO_THROW(validate(doc("ok", 400)));
  auto real = make_document("r", "just five words right here", DocumentSource::real, "finance");
  EXPECT_NO_THROW(validate(real));
}

TEST(Corpus, LengthCheckReportsCount) {
  const auto c = validate_length(testsupport::words(400, "x"), 400, {});
  EXPECT_EQ(c.count, 400u);
  EXPECT_TRUE(c.pass);
  EXPECT_FALSE(validate_length("a b", 400, {}).pass);
  EXPECT_THROW(validate_length("a", 100, {200, 520}), PreconditionError);
}

TEST(Corpus, InstructionLimitAndParentLinks) {
  Instruction ok{"i1", "What now?", "d1", std::nullopt, {}, 2};
  EXPECT_NO_THROW(validate(ok));
  Instruction long_one{"i2", testsupport::words(121, "q"), "d1", std::nullopt, {}, 121};
  EXPECT_THROW(validate(long_one), ValidationError);
  EXPECT_THROW(validate_parent_links({ok}, {}), ValidationError);
  EXPECT_NO_THROW(validate_parent_links({ok}, {doc("d1", 300)}));
}

TEST(Corpus, ResponseWordLimitOnlyForConstrainedCot) {
  ResponseRecord r{"i1", PromptFormat::constrained_cot, 150, "x"};
  EXPECT_NO_THROW(validate(r));
  r.word_limit = 120;
  EXPECT_THROW(validate(r), ValidationError);
  r.word_limit.reset();
  EXPECT_THROW(validate(r), ValidationError);
  ResponseRecord free{"i1", PromptFormat::free_form, 100, "x"};
  EXPECT_THROW(validate(free), ValidationError);
}

TEST(Corpus, MalformedLinesAreCollectedOrThrownInStrictMode) {
  TempDir dir;
  const auto good = nlohmann::json(doc("g", 300)).dump();
  testsupport::write_file(dir / "c.jsonl", good + "\n{not json\n" + good.substr(0, 10) + "\n");
  const auto lenient = load_corpus<Document>(dir / "c.jsonl");
  EXPECT_EQ(lenient.corpus.records.size(), 1u);
  ASSERT_EQ(lenient.errors.size(), 2u);
  EXPECT_EQ(lenient.errors[0].line, 2u);
  LoadOptions strict;
  strict.strict = true;
  EXPECT_THROW(load_corpus<Document>(dir / "c.jsonl", strict), ParseError);
}

TEST(Corpus, SinkRejectsDuplicateIds) {
  TempDir dir;
  CorpusSink sink(dir / "c.jsonl");
  sink.append(doc("x", 300));
  EXPECT_THROW(sink.append(doc("x", 300)), ValidationError);
  EXPECT_EQ(sink.size(), 1u);
}

TEST(Corpus, ConcurrentAppendsProduceWholeLines) {
  TempDir dir;
  {
    CorpusSink sink(dir / "c.jsonl");
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        for (int i = 0; i < 50; ++i) sink.append(doc("t" + std::to_string(t) + "-" + std::to_string(i), 250));
      });
    }
    for (auto& th : threads) th.join();
  }
  const auto loaded = load_corpus<Document>(dir / "c.jsonl");
  EXPECT_TRUE(loaded.errors.empty());
  EXPECT_EQ(loaded.corpus.records.size(), 400u);
}

TEST(Corpus, SinkAppendsToExistingFileUnlessTruncating) {
  TempDir dir;
  { CorpusSink(dir / "c.jsonl").append(doc("a", 300)); }
  { CorpusSink(dir / "c.jsonl").append(doc("b", 300)); }
  EXPECT_EQ(load_corpus<Document>(dir / "c.jsonl").corpus.records.size(), 2u);
  CorpusSink::Options o;
  o.truncate = true;
  { CorpusSink(dir / "c.jsonl", o).append(doc("c", 300)); }
  EXPECT_EQ(load_corpus<Document>(dir / "c.jsonl").corpus.records.size(), 1u);
}

TEST(Corpus, MetaSidecarRoundTrips) {
  TempDir dir;
  write_corpus_meta(dir / "c.jsonl", {"finance", "abc", "2026-01-01T00:00:00Z"});
  EXPECT_TRUE(std::filesystem::exists(dir / "c.jsonl.meta.json") || std::filesystem::exists(dir / "c.meta.json"));
  const auto m = read_corpus_meta(dir / "c.jsonl");
  EXPECT_EQ(m.domain, "finance");
  EXPECT_EQ(m.generator_config_hash, "abc");
}

TEST(Corpus, LoadTextsReadsAnyField) {
  TempDir dir;
  testsupport::write_file(dir / "t.jsonl", "{\"text\":\"a\",\"q\":\"x\"}\n\n{\"text\":\"b\",\"q\":\"y\"}\n");
  EXPECT_EQ(load_texts(dir / "t.jsonl"), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(load_texts(dir / "t.jsonl", "q"), (std::vector<std::string>{"x", "y"}));
}
