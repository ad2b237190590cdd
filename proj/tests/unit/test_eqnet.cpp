#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "fixtures.hpp"
#include "topiceq/apps.hpp"
#include "topiceq/eqnet.hpp"
#include "topiceq/error.hpp"
#include "topiceq/params.hpp"
#include "topiceq/tape.hpp"

using namespace topiceq;
using namespace topiceq::eqnet;

namespace {

const EqVariant kLstmVariants[] = {EqVariant::TE, EqVariant::TD, EqVariant::Plain, EqVariant::FixedTopicConcat};

std::vector<std::size_t> some_tokens(const Model& m, std::size_t n, std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<std::size_t> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(3 + rng.uniform_int(m.vocabs.math.size() - 3));
  return t;
}

Array theta_of(std::initializer_list<double> v) { return Array::vector(v); }

bool same_bits(const Array& a, const Array& b) {
  return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(LstmStep, ZeroWeightsZeroState) {
  Model m = fixtures::tiny_model(EqVariant::TE);
  for (auto& p : m.params)
    if (p.name.rfind("eq.", 0) == 0) p.value.fill(0.0);
  Tape t(m.params);
  Rng rng(0);
  auto s0 = initial_state(t, m.config.eq);
  auto r = lstm_step(t, m.config.eq, s0, t.constant(Array(Shape{m.config.eq.embed_dim})),
                     t.constant(theta_of({0.2, 0.3, 0.5})), rng, false);
  for (std::size_t l = 0; l < m.config.eq.layers; ++l) {
    for (double x : t.value(r.state.h[l]).data()) EXPECT_EQ(x, 0.0);
    for (double x : t.value(r.state.c[l]).data()) EXPECT_EQ(x, 0.0);
  }
}

TEST(LstmStep, PlainIgnoresTheta) {
  const Model m = fixtures::tiny_model(EqVariant::Plain);
  const auto toks = some_tokens(m, 6);
  const auto a = score(m.params, m.config.eq, toks, theta_of({1, 0, 0}));
  const auto b = score(m.params, m.config.eq, toks, theta_of({0.1, 0.1, 0.8}));
  EXPECT_EQ(std::memcmp(&a.total_logprob, &b.total_logprob, sizeof(double)), 0);
}

TEST(LstmStep, TopicVariantsDependOnTheta) {
  for (EqVariant v : {EqVariant::TE, EqVariant::TD, EqVariant::Bow}) {
    const Model m = fixtures::tiny_model(v);
    const auto toks = some_tokens(m, 6);
    EXPECT_NE(score(m.params, m.config.eq, toks, theta_of({1, 0, 0})).total_logprob,
              score(m.params, m.config.eq, toks, theta_of({0, 1, 0})).total_logprob)
        << to_string(v);
  }
}

TEST(EqLogLikelihood, GradientMatchesFiniteDifferences) {
  for (EqVariant v : {EqVariant::TE, EqVariant::TD, EqVariant::Plain, EqVariant::Bow}) {
    Model m = fixtures::tiny_model(v);
    m.config.eq.width = 4;
    m.params = Model::create(m.config, m.vocabs, 3).params;
    const auto toks = some_tokens(m, 3);
    const Array theta = theta_of({0.2, 0.5, 0.3});
    auto build = [&](Tape& t) {
      Rng dropout(42);
      return eq_log_likelihood(t, m.config.eq, toks, t.constant(theta), dropout, true).total;
    };
    m.params.zero_grad();
    {
      Tape t(m.params);
      Var l = build(t);
      t.backward(l);
      t.accumulate_param_grads(m.params);
    }
    std::vector<std::string> only;
    for (const auto& p : m.params)
      if (p.name.rfind("eq.", 0) == 0) only.push_back(p.name);
    const auto report = finite_diff_check([&] { Tape t(m.params); return t.scalar(build(t)); }, m.params, 1e-4, 6, 1,
                                          1e-7, only, FdStencil::Central4);
    EXPECT_LT(report.max_rel_err, 1e-4) << to_string(v) << " " << report.worst_param;
  }
}

TEST(EqLogLikelihood, UniformHead) {
  for (EqVariant v : kLstmVariants) {
    Model m = fixtures::tiny_model(v);
    m.params["eq.out.W"].value.fill(0.0);
    m.params["eq.out.b"].value.fill(0.0);
    if (m.params.contains("eq.td.W")) m.params["eq.td.W"].value.fill(0.0);
    const auto toks = some_tokens(m, 9);
    const auto s = score(m.params, m.config.eq, toks, theta_of({0.3, 0.3, 0.4}));
    EXPECT_EQ(s.token_count, 10u);
    EXPECT_NEAR(s.total_logprob, -10.0 * std::log(static_cast<double>(m.vocabs.math.size())), 1e-9);
  }
}

TEST(EqLogLikelihood, OutOfVocabularyTokenThrows) {
  const Model m = fixtures::tiny_model(EqVariant::TE);
  const std::vector<std::size_t> toks{3, m.vocabs.math.size()};
  EXPECT_THROW(score(m.params, m.config.eq, toks, theta_of({1, 0, 0})), Error);
}

TEST(BowEquation, BagContract) {
  Model m = fixtures::tiny_model(EqVariant::Bow);
  auto toks = some_tokens(m, 8);
  const Array theta = theta_of({0.5, 0.2, 0.3});
  const double base = score(m.params, m.config.eq, toks, theta).total_logprob;
  std::reverse(toks.begin(), toks.end());
  EXPECT_EQ(score(m.params, m.config.eq, toks, theta).total_logprob, base);
  std::rotate(toks.begin(), toks.begin() + 3, toks.end());
  EXPECT_EQ(score(m.params, m.config.eq, toks, theta).total_logprob, base);

  // One-hot theta selects row k.
  Model other = m;
  for (std::size_t j = 0; j < m.vocabs.math.size(); ++j) other.params["eq.bow.beta"].value.at(2, j) = 0.37 * j;
  EXPECT_EQ(score(m.params, m.config.eq, toks, theta_of({0, 1, 0})).total_logprob,
            score(other.params, other.config.eq, toks, theta_of({0, 1, 0})).total_logprob);

  m.params["eq.bow.beta"].value.fill(0.0);
  const auto s = score(m.params, m.config.eq, toks, theta);
  EXPECT_EQ(s.token_count, toks.size());
  EXPECT_NEAR(s.total_logprob, -8.0 * std::log(static_cast<double>(m.vocabs.math.size())), 1e-9);
}

TEST(SampleEquation, GreedyIsDeterministicAndMasked) {
  for (EqVariant v : kLstmVariants) {
    const Model m = fixtures::tiny_model(v);
    SampleOptions greedy;
    greedy.greedy = true;
    greedy.max_len = 30;
    Rng r1(1), r2(2);
    EXPECT_EQ(sample_equation(m.params, m.config.eq, theta_of({0, 0, 1}), greedy, r1),
              sample_equation(m.params, m.config.eq, theta_of({0, 0, 1}), greedy, r2));

    SampleOptions sampled;
    sampled.max_len = 40;
    sampled.temperature = 1.5;
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
      const auto out = sample_equation(m.params, m.config.eq, theta_of({0.2, 0.3, 0.5}), sampled, rng);
      EXPECT_LE(out.size(), 40u);
      for (std::size_t id : out) {
        EXPECT_NE(id, kUnkId);
        EXPECT_NE(id, kStartId);
        EXPECT_NE(id, kEndId);
      }
    }
  }
}

TEST(SampleEquation, PrefixIsForceFed) {
  const Model m = fixtures::tiny_model(EqVariant::TE);
  SampleOptions o;
  o.greedy = true;
  o.prefix = some_tokens(m, 3, 5);
  Rng rng(0);
  const auto out = sample_equation(m.params, m.config.eq, theta_of({1, 0, 0}), o, rng);
  ASSERT_GE(out.size(), 3u);
  EXPECT_TRUE(std::equal(o.prefix.begin(), o.prefix.end(), out.begin()));
}

TEST(SampleEquation, NonPositiveTemperatureRejected) {
  const Model m = fixtures::tiny_model(EqVariant::TE);
  SampleOptions o;
  o.temperature = 0.0;
  Rng rng(0);
  EXPECT_THROW(sample_equation(m.params, m.config.eq, theta_of({1, 0, 0}), o, rng), Error);
}

TEST(EqProperties, NextTokenDistributionsAreProbabilities) {
  for (EqVariant v : kLstmVariants) {
    const Model m = fixtures::tiny_model(v);
    for (const Array& p : stepwise_distributions(m.params, m.config.eq, some_tokens(m, 7), theta_of({0.1, 0.6, 0.3}))) {
      EXPECT_NEAR(std::accumulate(p.data().begin(), p.data().end(), 0.0), 1.0, 1e-9);
      for (double x : p.data()) EXPECT_GE(x, 0.0);
    }
  }
}

TEST(EqProperties, ScoringMatchesStepwiseReplay) {
  for (EqVariant v : kLstmVariants) {
    const Model m = fixtures::tiny_model(v);
    SampleOptions o;
    o.max_len = 25;
    Rng rng(17);
    const Array theta = theta_of({0.25, 0.25, 0.5});
    for (int trial = 0; trial < 5; ++trial) {
      const auto toks = sample_equation(m.params, m.config.eq, theta, o, rng);
      const auto dists = stepwise_distributions(m.params, m.config.eq, toks, theta);
      double replay = 0;
      for (std::size_t t = 0; t < toks.size(); ++t) replay += std::log(dists[t][toks[t]]);
      replay += std::log(dists.back()[kEndId]);
      const auto s = score(m.params, m.config.eq, toks, theta);
      EXPECT_NEAR(s.total_logprob, replay, 1e-9 * std::max(1.0, std::abs(replay)));
      EXPECT_EQ(s.token_count, toks.size() + 1);
    }
  }
}

TEST(EqProperties, EvaluationIsBitwiseReproducible) {
  for (EqVariant v : kLstmVariants) {
    const Model m = fixtures::tiny_model(v);
    const auto toks = some_tokens(m, 10);
    const auto a = stepwise_distributions(m.params, m.config.eq, toks, theta_of({0.3, 0.3, 0.4}));
    const auto b = stepwise_distributions(m.params, m.config.eq, toks, theta_of({0.3, 0.3, 0.4}));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(same_bits(a[i], b[i]));
  }
}
