#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "topiceq/corpus.hpp"
#include "topiceq/error.hpp"
#include "topiceq/mathtok.hpp"

using namespace topiceq;
using namespace topiceq::corpus;

namespace {

std::string fixture_tex() {
  std::ifstream f(fixtures::data_dir() / "one_equation.tex");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string sentences(int n, const std::string& stem) {
  std::string s;
  for (int i = 0; i < n; ++i) s += "The " + stem + " number " + std::string(1, static_cast<char>('a' + i)) + " holds. ";
  return s;
}

ContextEqPair pair_with_equation(std::vector<std::string> eq) {
  ContextEqPair p;
  p.before = {"one"};
  p.after = {"two"};
  p.equation = std::move(eq);
  return p;
}

}  // namespace

TEST(SplitSentences, BoundaryRule) {
  EXPECT_EQ(split_sentences("First one. Second one! Third? \\Fourth"),
            (std::vector<std::string>{"First one.", "Second one!", "Third?", "\\Fourth"}));
  EXPECT_EQ(split_sentences("e.g. lower case continues.").size(), 1u);
  EXPECT_TRUE(split_sentences("   ").empty());
}

TEST(ExtractPairs, SixSentencesEachSideGivesFivePlusFive) {
  const auto pairs = extract_pairs(fixture_tex());
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].before.size(), 5u);
  EXPECT_EQ(pairs[0].after.size(), 5u);
  EXPECT_EQ(pairs[0].before.back(), "Convergence follows from convexity.");
  EXPECT_EQ(pairs[0].after.front(), "Momentum improves the constant factors.");
  EXPECT_FALSE(pairs[0].topic.has_value());
}

TEST(ExtractPairs, NoDisplayMath) { EXPECT_TRUE(extract_pairs(sentences(12, "plain")).empty()); }

TEST(ExtractPairs, ShortEquationDropped) {
  const std::string doc = sentences(6, "left") + "\\[ a + b = c + d \\]" + sentences(6, "right");
  ASSERT_EQ(mathtok::tokenize("a + b = c + d").size(), 7u);
  EXPECT_TRUE(extract_pairs(doc).empty());
}

TEST(ExtractPairs, NeedsFiveSentencesOnEachSide) {
  const std::string eq = "$$ x _ { 1 } + x _ { 2 } + x _ { 3 } + x _ { 4 } = y $$";
  ASSERT_GE(mathtok::tokenize(eq.substr(2, eq.size() - 4)).size(), 20u);
  EXPECT_EQ(extract_pairs(sentences(5, "left") + eq + sentences(5, "right")).size(), 1u);
  EXPECT_TRUE(extract_pairs(sentences(4, "left") + eq + sentences(5, "right")).empty());
}

TEST(PreprocessContext, Examples) {
  const Vocab vocab({"couples", "spin"});
  const auto bow = preprocess_context(std::vector<std::string>{"The spin couples."}, vocab);
  EXPECT_EQ(bow, (SparseBow{{*vocab.find("couples"), 1}, {*vocab.find("spin"), 1}}));
  EXPECT_TRUE(preprocess_context(std::vector<std::string>{"the of and"}, vocab).empty());
  const Vocab spin({"spin"});
  EXPECT_EQ(preprocess_context(std::vector<std::string>{"Spin spin SPIN"}, spin), (SparseBow{{0, 3}}));
}

TEST(PreprocessContext, IdsIncreasingCountsPositive) {
  const auto pairs = fixtures::small_corpus(40);
  const auto vocabs = build_vocabs(pairs, VocabOptions{});
  for (const auto& p : pairs) {
    const auto bow = preprocess_context(p, vocabs.words);
    for (std::size_t i = 0; i < bow.size(); ++i) {
      EXPECT_GT(bow[i].second, 0u);
      if (i) EXPECT_LT(bow[i - 1].first, bow[i].first);
    }
  }
}

TEST(BuildWordVocab, DocumentFrequencyThreshold) {
  const std::vector<std::vector<std::string>> docs{{"spin", "field"}, {"spin"}, {"lattice"}};
  EXPECT_TRUE(build_word_vocab(docs, 2, 100).contains("spin"));
  EXPECT_FALSE(build_word_vocab(docs, 2, 100).contains("field"));
  try {
    build_word_vocab(docs, 3, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyVocab);
  }
}

TEST(BuildWordVocab, RankedByDocumentFrequencyThenName) {
  const std::vector<std::vector<std::string>> docs{{"b", "c", "c", "c"}, {"a", "b"}, {"a", "c"}};
  EXPECT_EQ(build_word_vocab(docs, 1, 2).entries(), (std::vector<std::string>{"a", "b"}));
}

TEST(SplitCorpus, Sizes) {
  auto make = [](std::size_t n) {
    std::vector<ContextEqPair> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(pair_with_equation({std::to_string(i)}));
    return v;
  };
  auto s = split_corpus(make(10), {0.8, 0.1, 0.1}, 1);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.valid.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
  s = split_corpus(make(100), {0.5, 0.25, 0.25}, 1);
  EXPECT_EQ(s.train.size(), 50u);
  EXPECT_EQ(s.valid.size(), 25u);
  EXPECT_EQ(s.test.size(), 25u);

  const auto a = split_corpus(make(30), {0.8, 0.1, 0.1}, 9);
  const auto b = split_corpus(make(30), {0.8, 0.1, 0.1}, 9);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);

  try {
    split_corpus(make(2), {0.8, 0.1, 0.1}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooSmall);
  }
}

TEST(SplitCorpus, PartitionProperty) {
  for (std::size_t n : {3u, 7u, 19u, 64u}) {
    std::vector<ContextEqPair> all;
    for (std::size_t i = 0; i < n; ++i) all.push_back(pair_with_equation({std::to_string(i)}));
    const auto s = split_corpus(all, {0.8, 0.1, 0.1}, n);
    std::multiset<std::string> seen;
    for (const auto* part : {&s.train, &s.valid, &s.test})
      for (const auto& p : *part) seen.insert(p.equation[0]);
    EXPECT_EQ(seen.size(), n);
    EXPECT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), n);
  }
}

TEST(ShuffleEquationTokens, PermutationOnly) {
  EXPECT_EQ(shuffle_equation_tokens(pair_with_equation({"x"}), 3).equation, (std::vector<std::string>{"x"}));
  const auto p = pair_with_equation(mathtok::tokenize("\\frac{a}{b} + c_{1} = d"));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto q = shuffle_equation_tokens(p, seed);
    EXPECT_EQ(q.before, p.before);
    auto x = q.equation, y = p.equation;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    EXPECT_EQ(x, y);
  }
}

TEST(GenerateSynthetic, SingleTopicMatchesWordDistribution) {
  SyntheticSpec spec;
  SyntheticTopic t;
  t.words = {{"alpha", 0.5}, {"beta", 0.3}, {"gamma", 0.2}};
  t.grammar.clauses = {{"$v", "=", "$v"}};
  t.grammar.variables = {"x", "y"};
  t.grammar.joiners = {"+"};
  spec.topics = {t};
  spec.num_docs = 400;
  spec.context_length = 25;
  spec.min_equation_length = 3;
  spec.max_equation_length = 10;
  spec.seed = 5;
  std::map<std::string, double> counts;
  double total = 0;
  for (const auto& p : generate_synthetic(spec)) {
    for (const auto& w : context_words(p)) {
      counts[w] += 1;
      total += 1;
    }
    EXPECT_TRUE(t.grammar.accepts(p.equation)) << mathtok::detokenize(p.equation);
  }
  ASSERT_EQ(total, 10000);
  double chi2 = 0;
  for (const auto& [w, prob] : t.words) chi2 += std::pow(counts[w] - total * prob, 2) / (total * prob);
  EXPECT_EQ(counts.size(), 3u);
  // chi-square, 2 degrees of freedom: p > 0.001 iff statistic < 13.816
  EXPECT_LT(chi2, 13.816);
}

TEST(GenerateSynthetic, Deterministic) {
  const auto spec = equation_preset(50, 8);
  EXPECT_EQ(generate_synthetic(spec), generate_synthetic(spec));
  auto other = spec;
  other.seed = 9;
  EXPECT_NE(generate_synthetic(spec), generate_synthetic(other));
}

TEST(GenerateSynthetic, DisjointSupports) {
  const auto spec = equation_preset(200, 3);
  std::vector<std::set<std::string>> supports;
  for (const auto& t : spec.topics) {
    std::set<std::string> s;
    for (const auto& [w, p] : t.words)
      if (p > 0) s.insert(w);
    supports.push_back(s);
  }
  for (const auto& p : generate_synthetic(spec)) {
    ASSERT_TRUE(p.topic.has_value());
    const auto words = context_words(p);
    int owners = 0;
    for (const auto& s : supports)
      owners += std::all_of(words.begin(), words.end(), [&](const std::string& w) { return s.count(w) > 0; });
    EXPECT_EQ(owners, 1);
    EXPECT_TRUE(spec.topics[*p.topic].grammar.accepts(p.equation));
    EXPECT_TRUE(mathtok::check_syntax(p.equation).valid);
  }
}

TEST(TokenGrammar, Accepts) {
  TokenGrammar g;
  g.clauses = {{"$v", "^", "{", "2", "}"}, {"\\sqrt", "{", "$v", "}"}};
  g.variables = {"a", "b"};
  g.joiners = {"+", "="};
  EXPECT_TRUE(g.accepts(mathtok::tokenize("a^{2}")));
  EXPECT_TRUE(g.accepts(mathtok::tokenize("a^{2} + \\sqrt{b} = b^{2}")));
  EXPECT_FALSE(g.accepts(mathtok::tokenize("c^{2}")));
  EXPECT_FALSE(g.accepts(mathtok::tokenize("a^{2} +")));
  EXPECT_FALSE(g.accepts({}));
}

TEST(RenameVariables, KeepsStructure) {
  const auto spec = equation_preset(30, 4);
  for (const auto& p : generate_synthetic(spec)) {
    const auto& g = spec.topics[*p.topic].grammar;
    const auto renamed = rename_variables(p.equation, g, 17);
    ASSERT_EQ(renamed.size(), p.equation.size());
    EXPECT_TRUE(g.accepts(renamed));
    const std::set<std::string> vars(g.variables.begin(), g.variables.end());
    for (std::size_t i = 0; i < renamed.size(); ++i)
      if (!vars.count(p.equation[i])) EXPECT_EQ(renamed[i], p.equation[i]);
  }
}

TEST(PairFiles, JsonLinesRoundTrip) {
  auto pairs = fixtures::small_corpus(12);
  pairs[0].topic.reset();
  const auto dir = fixtures::temp_dir("pairs");
  write_pairs(dir / "p.jsonl", pairs);
  EXPECT_EQ(read_pairs(dir / "p.jsonl"), pairs);
  EXPECT_EQ(pair_from_json_line(pair_to_json_line(pairs[1])), pairs[1]);
}

TEST(SyntheticSpecFiles, RoundTrip) {
  const auto spec = alignment_preset(10, 3);
  const auto dir = fixtures::temp_dir("spec");
  write_synthetic_spec(dir / "s.json", spec);
  EXPECT_EQ(generate_synthetic(read_synthetic_spec(dir / "s.json")), generate_synthetic(spec));
}
