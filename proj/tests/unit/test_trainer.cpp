#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "topiceq/error.hpp"
#include "topiceq/evalsuite.hpp"
#include "topiceq/model.hpp"
#include "topiceq/rng.hpp"
#include "topiceq/trainer.hpp"

using namespace topiceq;

namespace {

TrainConfig quick_config(const Model& m, std::size_t epochs = 2) {
  TrainConfig tc;
  tc.model = m.config;
  tc.lr = 0.01;
  tc.batch_size = 10;
  tc.epochs = epochs;
  tc.seed = 4;
  tc.threads = 1;
  return tc;
}

void expect_same_params(const ParamStore& a, const ParamStore& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.at(i).name, b.at(i).name);
    EXPECT_EQ(a.at(i).value, b.at(i).value) << a.at(i).name;
  }
}

void expect_kind(ErrorKind kind, const std::function<void()>& f) {
  try {
    f();
    ADD_FAILURE() << "no error thrown";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  const Model m = fixtures::tiny_model(EqVariant::TE);
  const auto dir = fixtures::temp_dir("ckpt");
  m.save(dir / "m.bin");
  const Model back = Model::load(dir / "m.bin");
  expect_same_params(m.params, back.params);
  EXPECT_EQ(m.config_json(), back.config_json());
  EXPECT_EQ(m.vocabs.words, back.vocabs.words);
  EXPECT_EQ(m.vocabs.math, back.vocabs.math);
}

TEST(Checkpoint, EncodeDecodeKeepsShapes) {
  ParamStore s;
  s.add("a", Array(Shape{2, 3}, {1, 2, 3, 4, 5, 6}));
  s.add("b", Array::scalar(-0.5));
  const Checkpoint c = decode_checkpoint(encode_checkpoint(s, "{}"));
  EXPECT_EQ(c.config_json, "{}");
  expect_same_params(s, c.params);
  EXPECT_EQ(c.params["a"].value.shape(), (Shape{2, 3}));
  EXPECT_EQ(c.params["b"].value.rank(), 0u);
}

TEST(Checkpoint, CorruptHeadersAreRejected) {
  ParamStore s;
  s.add("a", Array::vector({1.0, 2.0}));
  std::string bytes = encode_checkpoint(s, "{}");

  std::string magic = bytes;
  magic[0] = 'X';
  expect_kind(ErrorKind::BadMagic, [&] { decode_checkpoint(magic); });

  std::string version = bytes;
  version[4] = 2;
  expect_kind(ErrorKind::VersionMismatch, [&] { decode_checkpoint(version); });

  expect_kind(ErrorKind::TruncatedFile, [&] { decode_checkpoint(bytes.substr(0, bytes.size() - 3)); });
  expect_kind(ErrorKind::TruncatedFile, [&] { decode_checkpoint("TE"); });
}

TEST(Checkpoint, MissingFileIsIoError) {
  expect_kind(ErrorKind::IoError, [] { load_checkpoint("/nonexistent/dir/model.bin"); });
}

TEST(Elbo, BreakdownSumsToTotal) {
  const auto pairs = fixtures::small_corpus();
  for (EqVariant v : {EqVariant::TE, EqVariant::TD, EqVariant::Plain, EqVariant::Bow, EqVariant::None}) {
    const Model m = fixtures::tiny_model(v, 7, pairs);
    Rng rng(3);
    for (std::size_t i = 0; i < 5; ++i) {
      const PreparedPair p = prepare_pair(pairs[i], m);
      const Array eps = sample_standard_normal(rng, Shape{3});
      const LossBreakdown b = elbo_loss(m, p, eps);
      EXPECT_NEAR(b.total, -b.bow_ll + b.kl - b.eq_ll + m.config.diversity_weight * b.diversity, 1e-9);
      EXPECT_LE(b.bow_ll, 0.0);
      EXPECT_GE(b.kl, 0.0);
      EXPECT_LE(b.eq_ll, 0.0);
      if (v == EqVariant::None) {
        EXPECT_EQ(b.eq_ll, 0.0);
      }
    }
  }
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  const auto pairs = fixtures::small_corpus();
  Model m = fixtures::tiny_model(EqVariant::TE, 7, pairs);
  const ParamStore before = m.params;
  TrainConfig tc = quick_config(m);
  tc.lr = 0.0;
  train(tc, m, prepare_pairs(pairs, m), {});
  expect_same_params(before, m.params);
}

TEST(Train, SameSeedSameCheckpoint) {
  const auto pairs = fixtures::small_corpus();
  auto run = [&] {
    Model m = fixtures::tiny_model(EqVariant::TD, 7, pairs);
    train(quick_config(m), m, prepare_pairs(pairs, m), {});
    return encode_checkpoint(m.params, m.config_json());
  };
  EXPECT_EQ(run(), run());
}

TEST(Train, ThreadCountDoesNotChangeResult) {
  const auto pairs = fixtures::small_corpus();
  auto run = [&](std::size_t threads) {
    Model m = fixtures::tiny_model(EqVariant::TE, 7, pairs);
    TrainConfig tc = quick_config(m);
    tc.threads = threads;
    train(tc, m, prepare_pairs(pairs, m), {});
    return m.params;
  };
  const ParamStore one = run(1);
  const ParamStore four = run(4);
  for (std::size_t i = 0; i < one.size(); ++i) {
    for (std::size_t j = 0; j < one.at(i).value.size(); ++j) {
      EXPECT_NEAR(one.at(i).value[j], four.at(i).value[j], 1e-9);
    }
  }
}

TEST(Train, ValidationPerplexityFallsEarly) {
  const auto pairs = fixtures::small_corpus(200, 9);
  const auto split = corpus::split_corpus(pairs, {0.8, 0.1, 0.1}, 1);
  Model m = fixtures::tiny_model(EqVariant::TE, 7, split.train);
  const auto valid = prepare_pairs(split.valid, m);
  const double start = validation_perplexity(m, valid);
  TrainConfig tc = quick_config(m, 3);
  tc.lr = 0.02;
  const TrainResult r = train(tc, m, prepare_pairs(split.train, m), valid);
  ASSERT_EQ(r.epochs.size(), 3u);
  EXPECT_LT(r.epochs[0].valid_ppl, start);
  EXPECT_LT(r.epochs[2].valid_ppl, r.epochs[0].valid_ppl);
  EXPECT_LE(r.best_valid_ppl, r.epochs[2].valid_ppl);
}

TEST(Train, BestParamsMatchBestEpoch) {
  const auto pairs = fixtures::small_corpus(120, 4);
  const auto split = corpus::split_corpus(pairs, {0.8, 0.1, 0.1}, 1);
  Model m = fixtures::tiny_model(EqVariant::Plain, 7, split.train);
  const auto valid = prepare_pairs(split.valid, m);
  const TrainResult r = train(quick_config(m, 3), m, prepare_pairs(split.train, m), valid);
  Model best = m;
  best.params = r.best_params;
  EXPECT_NEAR(validation_perplexity(best, valid), r.best_valid_ppl, 1e-9);
  EXPECT_EQ(r.epochs[r.best_epoch - 1].valid_ppl, r.best_valid_ppl);
}

TEST(Train, ClippedNormNeverExceedsThreshold) {
  const auto pairs = fixtures::small_corpus();
  Model m = fixtures::tiny_model(EqVariant::TE, 7, pairs);
  TrainConfig tc = quick_config(m);
  tc.clip = 0.05;
  double worst = 0.0;
  TrainHooks hooks;
  hooks.on_step = [&](double n) { worst = std::max(worst, n); };
  train(tc, m, prepare_pairs(pairs, m), {}, hooks);
  EXPECT_LE(worst, 0.05 + 1e-12);
}

TEST(Train, MetricsJsonlHasOneLinePerEpoch) {
  const auto pairs = fixtures::small_corpus();
  Model m = fixtures::tiny_model(EqVariant::None, 7, pairs);
  std::ostringstream log;
  TrainHooks hooks;
  hooks.metrics_jsonl = &log;
  train(quick_config(m, 3), m, prepare_pairs(pairs, m), {}, hooks);
  std::istringstream in(log.str());
  std::string line;
  std::size_t epoch = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["epoch"], ++epoch);
    EXPECT_TRUE(j["valid_ppl"].is_null());
    EXPECT_TRUE(j.contains("train_loss"));
    EXPECT_TRUE(j.contains("kl_mean"));
  }
  EXPECT_EQ(epoch, 3u);
}

TEST(Train, NothingTrainableIsEmptyBatch) {
  const auto pairs = fixtures::small_corpus();
  Model m = fixtures::tiny_model(EqVariant::TE, 7, pairs);
  std::vector<PreparedPair> prepared = prepare_pairs(pairs, m);
  for (auto& p : prepared) p.bow.clear();
  expect_kind(ErrorKind::EmptyBatch, [&] { train(quick_config(m), m, prepared, {}); });
}

TEST(Train, SkipsPairsWithoutContext) {
  const auto pairs = fixtures::small_corpus();
  Model m = fixtures::tiny_model(EqVariant::TE, 7, pairs);
  std::vector<PreparedPair> prepared = prepare_pairs(pairs, m);
  prepared[0].bow.clear();
  prepared[1].equation.clear();
  EXPECT_EQ(train(quick_config(m, 1), m, prepared, {}).skipped_pairs, 2u);
}

TEST(Train, RestartsKeepTheLowestScore) {
  const auto pairs = fixtures::small_corpus(120, 4);
  const auto split = corpus::split_corpus(pairs, {0.8, 0.1, 0.1}, 1);
  Model base = fixtures::tiny_model(EqVariant::TE, 7, split.train);
  const auto train_pairs = prepare_pairs(split.train, base);
  const auto valid = prepare_pairs(split.valid, base);

  TrainConfig tc = quick_config(base, 2);
  tc.restarts = 3;
  Model m = base;
  const TrainResult kept = train(tc, m, train_pairs, valid);

  TrainConfig single = tc;
  single.restarts = 1;
  Model first = base;
  const TrainResult r0 = train(single, first, train_pairs, valid);
  EXPECT_LE(kept.best_valid_ppl, r0.best_valid_ppl);
  if (kept.restart == 0) expect_same_params(first.params, m.params);
}

TEST(Train, ShuffledEquationsChangeTheFit) {
  const auto pairs = fixtures::small_corpus();
  Model a = fixtures::tiny_model(EqVariant::TE, 7, pairs);
  Model b = a;
  TrainConfig tc = quick_config(a, 1);
  train(tc, a, prepare_pairs(pairs, a), {});
  tc.shuffle_equations = true;
  train(tc, b, prepare_pairs(pairs, b), {});
  bool differs = false;
  for (std::size_t i = 0; i < a.params.size(); ++i) differs |= !(a.params.at(i).value == b.params.at(i).value);
  EXPECT_TRUE(differs);
}

TEST(Train, FixedVariantNeedsCheckpoint) {
  const auto pairs = fixtures::small_corpus();
  Model m = fixtures::tiny_model(EqVariant::FixedTopicConcat, 7, pairs);
  expect_kind(ErrorKind::InputError, [&] { train(quick_config(m), m, prepare_pairs(pairs, m), {}); });
}

TEST(Train, FrozenTopicModelStaysFixed) {
  const auto pairs = fixtures::small_corpus();
  Model ctx = fixtures::tiny_model(EqVariant::None, 7, pairs);
  train(quick_config(ctx), ctx, prepare_pairs(pairs, ctx), {});

  Model m = fixtures::tiny_model(EqVariant::FixedTopicConcat, 8, pairs);
  adopt_frozen_topic_model(m, ctx);
  TrainConfig tc = quick_config(m);
  tc.fixed_topic_checkpoint = "in-memory";
  tc.restarts = 2;
  train(tc, m, prepare_pairs(pairs, m), {});
  for (const Parameter& p : ctx.params) {
    EXPECT_EQ(m.params[p.name].value, p.value) << p.name;
  }
}

TEST(Config, JsonRoundTrip) {
  TrainConfig tc;
  tc.model.topic.num_topics = 7;
  tc.model.eq.variant = EqVariant::Bow;
  tc.model.align.factors = 12;
  tc.lr = 0.123;
  tc.restarts = 4;
  tc.kl_annealing = true;
  nlohmann::json j = tc;
  const TrainConfig back = j.get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(back.model.eq.variant, EqVariant::Bow);
  EXPECT_EQ(back.restarts, 4u);
}

TEST(Config, RejectsBadValues) {
  TrainConfig tc;
  tc.batch_size = 0;
  expect_kind(ErrorKind::InputError, [&] { tc.validate(); });
  tc = TrainConfig{};
  tc.lr = -1.0;
  expect_kind(ErrorKind::InputError, [&] { tc.validate(); });
  tc = TrainConfig{};
  tc.model.eq.dropout = 1.0;
  expect_kind(ErrorKind::InputError, [&] { tc.validate(); });
  EXPECT_THROW(parse_variant("LSTM"), Error);
}
