#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <unordered_set>

#include "distilkit/corpus.hpp"
#include "distilkit/hash.hpp"
#include "testutil.hpp"

using namespace distilkit;

TEST(CleanLine, DiacriticNoiseDropped) {
  auto rules = CleaningRules::defaults();
  CleanDecision d = clean_line("c?nd plec acasă", rules);
  EXPECT_FALSE(d.keep);
  EXPECT_EQ(d.reason, "diacritic-noise");
}

TEST(CleanLine, SentenceFinalQuestionMarkKept) {
  auto rules = CleaningRules::defaults();
  rules.language_threshold = 0.0;  // isolate the diacritic rule
  CleanDecision d = clean_line("Unde este casa ta?", rules);
  EXPECT_TRUE(d.keep);
}

TEST(CleanLine, NoQuestionMarkNeverDiacriticDrop) {
  auto rules = CleaningRules::defaults();
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> ch(int('a'), int('z'));
  for (int trial = 0; trial < 200; ++trial) {
    std::string line;
    for (int i = 0; i < 30; ++i) line.push_back(i % 6 == 5 ? ' ' : char(ch(rng)));
    CleanDecision d = clean_line(line, rules);
    if (!d.keep) EXPECT_NE(d.reason, "diacritic-noise");
  }
}

TEST(CleanLine, UncapitalizedEntityDropped) {
  auto rules = CleaningRules::defaults();
  CleanDecision d = clean_line("am fost în bucurești ieri", rules);
  EXPECT_FALSE(d.keep);
  EXPECT_EQ(d.reason, "uncapitalized-named-entity");

  rules.language_threshold = 0.0;
  CleanDecision ok = clean_line("Am fost în București ieri", rules);
  EXPECT_TRUE(ok.keep);  // properly capitalized form passes
}

TEST(CleanLine, ArtifactPrefixStripped) {
  auto rules = CleaningRules::defaults();
  rules.language_threshold = 0.0;
  CleanDecision d =
      clean_line("Articolul Anterior Guvernul a decis alocarea fondurilor", rules);
  ASSERT_TRUE(d.keep);
  EXPECT_EQ(d.line, "Guvernul a decis alocarea fondurilor");
}

TEST(CleanLine, ArtifactSuffixStripped) {
  auto rules = CleaningRules::defaults();
  rules.language_threshold = 0.0;
  CleanDecision d = clean_line("Guvernul a decis Articolul Următor", rules);
  ASSERT_TRUE(d.keep);
  EXPECT_EQ(d.line, "Guvernul a decis");
}

TEST(CleanLine, IdempotentOnFuzzCorpus) {
  auto rules = CleaningRules::defaults();
  std::mt19937_64 rng(17);
  std::vector<std::string> pieces = {
      "Guvernul a decis",      "c?nd",        "bucurești", "Articolul Anterior",
      "școli și spitale din țară", "the quick fox", "",       "până mâine",
      "Articolul Următor",     "apă", "?", "a b c"};
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::uniform_int_distribution<int> parts(1, 4);
  for (int i = 0; i < 100000; ++i) {
    std::string line;
    for (int p = 0, n = parts(rng); p < n; ++p) {
      if (p) line += ' ';
      line += pieces[pick(rng)];
    }
    CleanDecision first = clean_line(line, rules);
    if (first.keep) {
      CleanDecision second = clean_line(first.line, rules);
      ASSERT_TRUE(second.keep) << "line dropped on second pass: " << first.line;
      ASSERT_EQ(second.line, first.line);
    }
  }
}

TEST(LanguageGate, FixtureSentences) {
  double ro = language_gate(
      "Guvernul a decis că vor fi alocate fonduri pentru școli și spitale din țară.");
  double en = language_gate("The quick brown fox jumps over the lazy dog near the river.");
  auto rules = CleaningRules::defaults();
  EXPECT_GT(ro, rules.language_threshold);
  EXPECT_LT(en, rules.language_threshold);
}

TEST(LanguageGate, EmptyLineScoresZero) {
  EXPECT_DOUBLE_EQ(language_gate(""), 0.0);
  EXPECT_DOUBLE_EQ(language_gate("   "), 0.0);
}

TEST(CleaningRules, FromFileRoundTrip) {
  testutil::TempDir dir;
  testutil::write_file(dir.file("rules.txt"),
                       "# custom rules\n"
                       "[named_entities]\nBucurești\nIași\n"
                       "[artifact_prefixes]\nReclamă\n"
                       "[artifact_suffixes]\nCitește mai mult\n"
                       "[language_threshold]\n0.25\n");
  CleaningRules r = CleaningRules::from_file(dir.file("rules.txt"));
  EXPECT_EQ(r.named_entities.size(), 2u);
  EXPECT_EQ(r.artifact_prefixes.size(), 1u);
  EXPECT_DOUBLE_EQ(r.language_threshold, 0.25);
  EXPECT_EQ(r.lowercased_entities()[0], "bucurești");
}

TEST(CleaningRules, MalformedFileRejected) {
  testutil::TempDir dir;
  testutil::write_file(dir.file("bad.txt"), "entry before any section\n");
  EXPECT_THROW(CleaningRules::from_file(dir.file("bad.txt")), FormatError);
  testutil::write_file(dir.file("bad2.txt"), "[language_threshold]\nnot-a-number\n");
  EXPECT_THROW(CleaningRules::from_file(dir.file("bad2.txt")), FormatError);
}

TEST(DedupMerge, IdenticalFilesCollapse) {
  testutil::TempDir dir;
  std::string contents = "unu doi\ntrei\npatru cinci șase\n";
  testutil::write_file(dir.file("a.txt"), contents);
  testutil::write_file(dir.file("b.txt"), contents);
  CorpusStats stats = dedup_merge({dir.file("a.txt"), dir.file("b.txt")}, dir.file("out.txt"));
  EXPECT_EQ(stats.lines, 3u);
  EXPECT_EQ(testutil::read_file(dir.file("out.txt")), contents);
}

TEST(DedupMerge, DisjointFilesSum) {
  testutil::TempDir dir;
  testutil::write_file(dir.file("a.txt"), "unu\ndoi\n");
  testutil::write_file(dir.file("b.txt"), "trei\npatru\n");
  CorpusStats stats = dedup_merge({dir.file("a.txt"), dir.file("b.txt")}, dir.file("out.txt"));
  EXPECT_EQ(stats.lines, 4u);
}

TEST(DedupMerge, FirstOccurrenceWins) {
  testutil::TempDir dir;
  testutil::write_file(dir.file("a.txt"), "x\nL\ny\nL\n");
  CorpusStats stats = dedup_merge({dir.file("a.txt")}, dir.file("out.txt"));
  EXPECT_EQ(stats.lines, 3u);
  EXPECT_EQ(testutil::read_file(dir.file("out.txt")), "x\nL\ny\n");
}

TEST(DedupMerge, OutputHasNoDuplicateHashes) {
  testutil::TempDir dir;
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> word(0, 20);
  std::string contents;
  for (int i = 0; i < 2000; ++i)
    contents += "w" + std::to_string(word(rng)) + " w" + std::to_string(word(rng)) + "\n";
  testutil::write_file(dir.file("a.txt"), contents);
  dedup_merge({dir.file("a.txt")}, dir.file("out.txt"));
  std::ifstream is(dir.file("out.txt"));
  std::unordered_set<Hash128, Hash128Hasher> seen;
  std::string line;
  while (std::getline(is, line)) EXPECT_TRUE(seen.insert(murmur3_128(line)).second);
  EXPECT_GT(seen.size(), 0u);
}

TEST(DedupMerge, MissingInputNamesFile) {
  testutil::TempDir dir;
  try {
    dedup_merge({dir.file("missing.txt")}, dir.file("out.txt"));
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.txt"), std::string::npos);
  }
}

TEST(CorpusStats, HandCount) {
  testutil::TempDir dir;
  testutil::write_file(dir.file("f.txt"), "a b\nc\n");
  CorpusStats s = corpus_stats(dir.file("f.txt"));
  EXPECT_EQ(s.lines, 2u);
  EXPECT_EQ(s.words, 3u);
  EXPECT_EQ(s.bytes, 6u);  // a, space, b, newline, c, newline
}

TEST(CorpusStats, EmptyFile) {
  testutil::TempDir dir;
  testutil::write_file(dir.file("f.txt"), "");
  CorpusStats s = corpus_stats(dir.file("f.txt"));
  EXPECT_EQ(s.lines, 0u);
  EXPECT_EQ(s.words, 0u);
  EXPECT_EQ(s.bytes, 0u);
}

TEST(CorpusStats, MatchesIndependentCountingOracle) {
  testutil::TempDir dir;
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<int> nwords(0, 8);
  std::uniform_int_distribution<int> wordlen(1, 10);
  std::uniform_int_distribution<int> ch(int('a'), int('z'));
  std::string contents;
  std::uint64_t expect_lines = 0, expect_words = 0;
  for (int i = 0; i < 1000; ++i) {
    int n = nwords(rng);
    for (int w = 0; w < n; ++w) {
      if (w) contents += ' ';
      int len = wordlen(rng);
      for (int k = 0; k < len; ++k) contents.push_back(char(ch(rng)));
      ++expect_words;  // oracle counts during generation
    }
    contents += '\n';
    ++expect_lines;
  }
  testutil::write_file(dir.file("f.txt"), contents);
  CorpusStats s = corpus_stats(dir.file("f.txt"));
  EXPECT_EQ(s.lines, expect_lines);
  EXPECT_EQ(s.words, expect_words);
  EXPECT_EQ(s.bytes, contents.size());
}

TEST(CleanStream, ReportsPerReasonCounts) {
  auto rules = CleaningRules::defaults();
  std::stringstream in(
      "Guvernul a decis că vor fi alocate fonduri pentru școli și spitale\n"
      "c?nd plec acasă\n"
      "am fost în bucurești ieri cu trenul\n"
      "The quick brown fox jumps over the lazy dog\n");
  std::stringstream out;
  CleanReport report = clean_stream(in, out, rules);
  EXPECT_EQ(report.kept.lines, 1u);
  EXPECT_EQ(report.dropped_diacritic, 1u);
  EXPECT_EQ(report.dropped_entity, 1u);
  EXPECT_EQ(report.dropped_language, 1u);
}
