// Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "topiceq/align.hpp"
#include "topiceq/apps.hpp"
#include "topiceq/corpus.hpp"
#include "topiceq/evalsuite.hpp"
#include "topiceq/mathtok.hpp"
#include "topiceq/model.hpp"
#include "topiceq/params.hpp"
#include "topiceq/topicnet.hpp"
#include "topiceq/trainer.hpp"

namespace fs = std::filesystem;
using namespace topiceq;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

// ---------------------------------------------------------------------------
// Desk-scale settings shared by the trained-model criteria.

constexpr std::size_t kPairs = 3000;
constexpr std::uint64_t kEqCorpusSeed = 12;
constexpr std::uint64_t kAlignCorpusSeed = 21;
constexpr std::uint64_t kSplitSeed = 5;
constexpr std::uint64_t kTrainSeed = 3;
constexpr std::size_t kAlignFactors = 16;

ModelConfig desk_model(EqVariant variant) {
  ModelConfig mc;
  mc.topic.num_topics = 3;
  mc.topic.hidden = 64;
  mc.eq.variant = variant;
  mc.eq.layers = 2;
  mc.eq.width = 16;
  mc.eq.embed_dim = 16;
  mc.eq.dropout = 0.1;
  mc.diversity_weight = 0.1;
  return mc;
}

TrainConfig desk_train(const ModelConfig& mc) {
  TrainConfig tc;
  tc.model = mc;
  tc.lr = 0.01;
  tc.batch_size = 20;
  tc.epochs = 20;
  tc.restarts = 3;
  tc.seed = kTrainSeed;
  return tc;
}

bool same_bits(const Array& a, const Array& b) {
  return a.size() == b.size() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double secs() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
};

// Equation corpus and the models trained on it, built on first use.
class EqLab {
 public:
  EqLab() {
    spec_ = corpus::equation_preset(kPairs, kEqCorpusSeed);
    split_ = corpus::split_corpus(corpus::generate_synthetic(spec_), {0.8, 0.1, 0.1}, kSplitSeed);
    vocabs_ = build_vocabs(split_.train, VocabOptions{});
  }

  const corpus::SyntheticSpec& spec() const { return spec_; }
  const corpus::CorpusSplit& split() const { return split_; }

  const Model& model(EqVariant v, bool shuffled = false) {
    const std::string key = std::string(to_string(v)) + (shuffled ? "+shuffled" : "");
    auto it = models_.find(key);
    if (it != models_.end()) return it->second;
    Timer t;
    Model m = Model::create(desk_model(v), vocabs_, kTrainSeed);
    TrainConfig tc = desk_train(m.config);
    tc.shuffle_equations = shuffled;
    const auto tr = prepare_pairs(split_.train, m);
    const auto va = prepare_pairs(split_.valid, m);
    TrainResult res = train(tc, m, tr, va);
    m.params = res.best_params;
    std::cerr << "  trained " << key << " in " << fmt(t.secs(), 3) << "s (restart " << res.restart << ", epoch "
              << res.best_epoch << ", valid ppl " << fmt(res.best_valid_ppl) << ")\n";
    return models_.emplace(key, std::move(m)).first->second;
  }

  std::vector<PreparedPair> test_pairs(const Model& m) const { return prepare_pairs(split_.test, m); }

  // learned topic -> generating topic, by best agreement of posterior argmax on training pairs.
  std::vector<std::size_t> topic_map(const Model& m) const {
    const std::size_t k = m.config.topic.num_topics;
    std::vector<std::vector<std::size_t>> conf(k, std::vector<std::size_t>(k, 0));
    for (const auto& p : split_.train) {
      const auto bow = corpus::preprocess_context(p, m.vocabs.words);
      const Array th = topicnet::posterior_mean(m.params, m.config.topic, bow).theta;
      std::size_t a = 0;
      for (std::size_t j = 1; j < k; ++j)
        if (th[j] > th[a]) a = j;
      ++conf[a][static_cast<std::size_t>(*p.topic)];
    }
    std::vector<std::size_t> perm(k), best;
    for (std::size_t i = 0; i < k; ++i) perm[i] = i;
    std::size_t best_hits = 0;
    do {
      std::size_t hits = 0;
      for (std::size_t j = 0; j < k; ++j) hits += conf[j][perm[j]];
      if (best.empty() || hits > best_hits) best_hits = hits, best = perm;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }

 private:
  corpus::SyntheticSpec spec_;
  corpus::CorpusSplit split_;
  Vocabs vocabs_;
  std::map<std::string, Model> models_;
};

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
  constexpr double kStep = 1e-3, kFloor = 1e-6, kTol = 1e-4;
  std::ostringstream detail;
  double worst = 0.0;
  std::string worst_where;

  auto record = [&](const std::string& name, Model& m, const PreparedPair& pair) {
    Rng noise(4);
    const Array eps = sample_standard_normal(noise, Shape{m.config.topic.num_topics});
    auto loss = [&]() {
      Tape t(m.params);
      Rng r(9);
      return elbo_loss(t, m, pair, eps, r, true).values.total;
    };
    m.params.zero_grad();
    {
      Tape t(m.params);
      Rng r(9);
      auto g = elbo_loss(t, m, pair, eps, r, true);
      t.backward(g.total);
      t.accumulate_param_grads(m.params);
    }
    // A fixed-topic model trains with its topic half frozen; only the equation half is checked.
    std::vector<std::string> only;
    if (m.config.eq.variant == EqVariant::FixedTopicConcat)
      for (const Parameter& p : m.params)
        if (p.name.rfind("eq.", 0) == 0) only.push_back(p.name);
    const auto rep = finite_diff_check(loss, m.params, kStep, static_cast<std::size_t>(-1), 1, kFloor, only, FdStencil::Central4);
    detail << name << '=' << fmt(rep.max_rel_err, 3) << ' ';
    if (rep.max_rel_err > worst) worst = rep.max_rel_err, worst_where = name + ":" + rep.worst_param + "[" + std::to_string(rep.worst_index) +
                                                   "] analytic " + fmt(rep.analytic, 10) + " numeric " +
                                                   fmt(rep.numeric, 10);
  };

  {
    const auto pairs = corpus::generate_synthetic(corpus::equation_preset(40, 2));
    VocabOptions vo;
    vo.min_doc_freq = 1;
    vo.max_words = 30;
    vo.max_math = 30;
    const Vocabs v = build_vocabs(pairs, vo);
    const auto shortest = std::min_element(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
      return a.equation.size() < b.equation.size();
    });
    for (EqVariant var : {EqVariant::TE, EqVariant::TD, EqVariant::Plain, EqVariant::FixedTopicConcat, EqVariant::Bow,
                          EqVariant::None}) {
      ModelConfig mc;
      mc.topic.num_topics = 3;
      mc.topic.hidden = 6;
      mc.eq.variant = var;
      mc.eq.layers = 2;
      mc.eq.width = 8;
      mc.eq.embed_dim = 5;
      mc.eq.dropout = 0.3;
      Model m = Model::create(mc, v, 1);
      record(std::string(to_string(var)), m, prepare_pair(*shortest, m));
    }
  }
  {
    const auto spec = corpus::alignment_preset(40, 2);
    const auto pairs = corpus::generate_synthetic(spec);
    std::vector<std::string> planted;
    for (const auto& t : spec.topics)
      for (const auto& [sym, phrase] : t.phrases)
        if (planted.size() < 6) planted.push_back(phrase);
    VocabOptions vo;
    vo.min_doc_freq = 1;
    vo.max_words = 30;
    vo.math = false;
    vo.symbols = true;
    vo.max_symbols = 4;
    const Vocabs v = build_vocabs(pairs, vo, align::make_phrase_vocab(planted));
    for (bool aware : {true, false}) {
      ModelConfig mc;
      mc.topic.num_topics = 3;
      mc.topic.hidden = 6;
      mc.eq.variant = EqVariant::None;
      mc.align.enabled = true;
      mc.align.topic_aware = aware;
      Model m = Model::create(mc, v, 1);
      for (const auto& p : pairs) {
        PreparedPair pp = prepare_pair(p, m);
        if (pp.phrases.empty()) continue;
        record(aware ? "ALIGN" : "ALIGN_BASE", m, pp);
        break;
      }
    }
  }
  detail << "worst " << worst_where << " (step " << kStep << ", floor " << kFloor << ", tol " << kTol << ')';
  return {worst < kTol, detail.str()};
}

Outcome kl_correctness() {
  constexpr std::size_t kDraws = 1000000, kDim = 3, kCases = 20;
  constexpr double kTol = 0.01;
  Rng rng(2024);
  double worst = 0.0;
  for (std::size_t c = 0; c < kCases; ++c) {
    Array mu(Shape{kDim}), lv(Shape{kDim});
    for (std::size_t d = 0; d < kDim; ++d) {
      mu[d] = rng.uniform(-2.0, 2.0);
      lv[d] = rng.uniform(-2.0, 2.0);
    }
    const double closed = topicnet::kl_to_standard_normal(mu, lv);
    Rng mc = Rng::derive(77, c);
    double sum = 0.0;
    for (std::size_t s = 0; s < kDraws; ++s) {
      double v = 0.0;
      for (std::size_t d = 0; d < kDim; ++d) {
        const double e = mc.normal();
        const double eta = mu[d] + std::exp(0.5 * lv[d]) * e;
        v += -0.5 * lv[d] - 0.5 * e * e + 0.5 * eta * eta;
      }
      sum += v;
    }
    const double estimate = sum / static_cast<double>(kDraws);
    worst = std::max(worst, std::abs(estimate - closed) / std::abs(closed));
  }
  const double zero = topicnet::kl_to_standard_normal(Array(Shape{kDim}), Array(Shape{kDim}));
  return {worst < kTol && zero == 0.0,
          "max MC rel diff " + fmt(worst, 3) + " over " + std::to_string(kCases) + " cases (tol 1%), KL(0,0)=" +
              fmt(zero)};
}

Outcome synthetic_recovery(EqLab& lab) {
  const auto docs = eval::reference_docs(lab.split().test, lab.model(EqVariant::TE).vocabs.words);
  const double te = eval::topic_coherence(lab.model(EqVariant::TE), docs).mean;
  const double ctx = eval::topic_coherence(lab.model(EqVariant::None), docs).mean;
  const double shuf = eval::topic_coherence(lab.model(EqVariant::TE, true), docs).mean;
  return {te >= ctx && shuf <= te,
          "NPMI TE " + fmt(te) + " >= context-only " + fmt(ctx) + "; shuffled " + fmt(shuf) + " <= TE"};
}

Outcome equation_ordering(EqLab& lab) {
  std::map<EqVariant, double> ppl, ser;
  for (EqVariant v : {EqVariant::TE, EqVariant::TD, EqVariant::Plain}) {
    const Model& m = lab.model(v);
    ppl[v] = eval::equation_loglik(m, lab.test_pairs(m)).perplexity();
    eval::SyntaxEvalOptions so;
    so.num_samples = 500;
    so.seed = 9;
    ser[v] = eval::syntax_error_rate(m, so);
  }
  const bool ok = ppl[EqVariant::TE] < ppl[EqVariant::TD] && ppl[EqVariant::TD] < ppl[EqVariant::Plain] &&
                  ser[EqVariant::TE] <= ser[EqVariant::Plain];
  return {ok, "ppl TE " + fmt(ppl[EqVariant::TE]) + " < TD " + fmt(ppl[EqVariant::TD]) + " < PLAIN " +
                  fmt(ppl[EqVariant::Plain]) + "; syntax error TE " + fmt(ser[EqVariant::TE], 3) + " <= PLAIN " +
                  fmt(ser[EqVariant::Plain], 3) + " (TD " + fmt(ser[EqVariant::TD], 3) + ", 500 samples)"};
}

Outcome topic_inference(EqLab& lab) {
  const Model& m = lab.model(EqVariant::TE);
  const auto map = lab.topic_map(m);
  std::size_t hits = 0, stable = 0, n = 0;
  for (std::size_t i = 0; i < lab.split().test.size(); ++i) {
    const auto& p = lab.split().test[i];
    const auto truth = static_cast<std::size_t>(*p.topic);
    const std::size_t top = apps::infer_equation_topic(m, p.equation, 1).front().topic;
    const auto renamed = corpus::rename_variables(p.equation, lab.spec().topics[truth].grammar, 1000 + i);
    const std::size_t top_renamed = apps::infer_equation_topic(m, renamed, 1).front().topic;
    hits += map[top] == truth;
    stable += top == top_renamed;
    ++n;
  }
  const double acc = static_cast<double>(hits) / static_cast<double>(n);
  return {acc >= 0.9 && stable == n, "top-1 accuracy " + fmt(acc, 4) + " (>= 0.9) on " + std::to_string(n) +
                                         " held-out equations; renamed keep top-1 " + std::to_string(stable) + "/" +
                                         std::to_string(n)};
}

Outcome generation_fidelity(EqLab& lab) {
  const Model& m = lab.model(EqVariant::TE);
  const auto map = lab.topic_map(m);
  const std::size_t k = m.config.topic.num_topics;
  std::ostringstream detail;
  bool ok = true;
  double worst = 1.0;
  for (std::size_t learned = 0; learned < k; ++learned) {
    const auto& grammar = lab.spec().topics[map[learned]].grammar;
    const auto samples = apps::generate_from_topic(m, apps::one_hot(learned, k), 100, {}, 31 + learned);
    const auto good = std::count_if(samples.begin(), samples.end(), [&](const auto& s) { return grammar.accepts(s); });
    worst = std::min(worst, static_cast<double>(good) / 100.0);
  }
  ok = worst >= 0.9;
  detail << "worst in-grammar fraction " << fmt(worst, 3) << " over 100 samples per topic (>= 0.9)";

  bool endpoints = true;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      const auto steps = apps::interpolate_topics(m, a, b, 5, {});
      apps::GenerateOptions greedy;
      greedy.greedy = true;
      const auto ga = apps::generate_from_topic(m, apps::one_hot(a, k), 1, greedy, 0).front();
      const auto gb = apps::generate_from_topic(m, apps::one_hot(b, k), 1, greedy, 0).front();
      endpoints = endpoints && steps.front().tokens == ga && steps.back().tokens == gb &&
                  same_bits(steps.front().theta, apps::one_hot(a, k)) &&
                  same_bits(steps.back().theta, apps::one_hot(b, k));
    }
  detail << "; interpolation endpoints " << (endpoints ? "identical" : "DIFFER") << " to one-hot greedy";
  return {ok && endpoints, detail.str()};
}

Outcome alignment_direction(const fs::path& phrases_file) {
  const auto spec = corpus::alignment_preset(kPairs, kAlignCorpusSeed);
  const auto split = corpus::split_corpus(corpus::generate_synthetic(spec), {0.8, 0.1, 0.1}, kSplitSeed);
  VocabOptions vo;
  vo.math = false;
  vo.symbols = true;
  vo.max_symbols = 50;
  const Vocabs v = build_vocabs(split.train, vo, align::load_phrase_vocab(phrases_file));
  const auto docs = eval::reference_docs(split.test, v.words);

  auto fit = [&](bool align_on, bool aware) {
    ModelConfig mc = desk_model(EqVariant::None);
    mc.align.enabled = align_on;
    mc.align.topic_aware = aware;
    mc.align.factors = kAlignFactors;
    Model m = Model::create(mc, v, kTrainSeed);
    const TrainConfig tc = desk_train(m.config);
    m.params = train(tc, m, prepare_pairs(split.train, m), prepare_pairs(split.valid, m)).best_params;
    return m;
  };
  const Model ctx = fit(false, false);
  const Model base = fit(true, false);
  const Model aware = fit(true, true);
  const double ppl_base = eval::alignment_loglik(base, prepare_pairs(split.test, base)).perplexity();
  const double ppl_aware = eval::alignment_loglik(aware, prepare_pairs(split.test, aware)).perplexity();
  const double coh_aware = eval::topic_coherence(aware, docs).mean;
  const double coh_ctx = eval::topic_coherence(ctx, docs).mean;
  return {ppl_aware < ppl_base && coh_aware >= coh_ctx,
          "alignment ppl topic-aware " + fmt(ppl_aware) + " < baseline " + fmt(ppl_base) + "; NPMI joint " +
              fmt(coh_aware) + " >= context-only " + fmt(coh_ctx)};
}

Outcome parser_suite(const fs::path& data) {
  std::size_t round_ok = 0, round_n = 0;
  for (const auto& line : read_lines(data / "equations.txt")) {
    const auto toks = mathtok::tokenize(line);
    round_ok += mathtok::tokenize(mathtok::detokenize(toks)) == toks;
    ++round_n;
  }
  std::size_t valid_ok = 0, valid_n = 0, invalid_ok = 0, invalid_n = 0;
  for (const auto& line : read_lines(data / "syntax_valid.txt")) {
    valid_ok += mathtok::check_syntax(mathtok::tokenize(line)).valid;
    ++valid_n;
  }
  for (const auto& line : read_lines(data / "syntax_invalid.txt")) {
    const auto tab = line.find('\t');
    const auto rep = mathtok::check_syntax(mathtok::tokenize(line.substr(tab + 1)));
    invalid_ok += !rep.valid && rep.first_error && mathtok::to_string(rep.first_error->kind) == line.substr(0, tab);
    ++invalid_n;
  }

  const auto pairs = corpus::generate_synthetic(corpus::equation_preset(60, 3));
  VocabOptions vo;
  vo.min_doc_freq = 1;
  ModelConfig mc;
  mc.topic.num_topics = 3;
  mc.topic.hidden = 8;
  mc.eq.variant = EqVariant::Plain;
  mc.eq.width = 8;
  mc.eq.embed_dim = 4;
  Model m = Model::create(mc, build_vocabs(pairs, vo), 1);
  for (const char* name : {"eq.out.W", "eq.out.b"}) {
    for (double& x : m.params[name].value.data()) x = 0.0;
  }
  const double ppl = eval::equation_loglik(m, prepare_pairs(pairs, m)).perplexity();
  const double vsize = static_cast<double>(m.vocabs.math.size());
  const bool ok = round_ok == round_n && round_n == 50 && valid_ok == valid_n && invalid_ok == invalid_n &&
                  std::abs(ppl - vsize) < 1e-9;
  return {ok, "round-trip " + std::to_string(round_ok) + "/" + std::to_string(round_n) + "; valid " +
                  std::to_string(valid_ok) + "/" + std::to_string(valid_n) + "; invalid " + std::to_string(invalid_ok) +
                  "/" + std::to_string(invalid_n) + "; uniform ppl " + fmt(ppl, 15) + " vs |V| " + fmt(vsize)};
}

Outcome determinism() {
  auto run = [] {
    const auto split = corpus::split_corpus(corpus::generate_synthetic(corpus::equation_preset(300, 4)),
                                            {0.8, 0.1, 0.1}, 1);
    ModelConfig mc = desk_model(EqVariant::TE);
    mc.topic.hidden = 16;
    mc.eq.width = 8;
    mc.eq.embed_dim = 8;
    Model m = Model::create(mc, build_vocabs(split.train, VocabOptions{}), 7);
    TrainConfig tc = desk_train(m.config);
    tc.epochs = 2;
    tc.restarts = 2;
    tc.seed = 7;
    m.params = train(tc, m, prepare_pairs(split.train, m), prepare_pairs(split.valid, m)).best_params;
    eval::SyntaxEvalOptions so;
    so.num_samples = 50;
    so.seed = 7;
    return std::make_pair(encode_checkpoint(m.params, m.config_json()), eval::eval_report(m, split.test, so).dump());
  };
  const auto a = run();
  const auto b = run();
  return {a == b, std::string("checkpoint ") + (a.first == b.first ? "identical" : "DIFFERENT") + " (" +
                      std::to_string(a.first.size()) + " bytes), eval report " +
                      (a.second == b.second ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale acceptance run"};
  fs::path data_dir = TOPICEQ_TEST_DATA;
  fs::path phrases = TOPICEQ_PHRASES;
  std::vector<int> only;
  app.add_option("--data", data_dir, "fixture directory")->capture_default_str();
  app.add_option("--phrases", phrases, "phrase list")->capture_default_str();
  app.add_option("--only", only, "run only these criteria (1-9)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  EqLab* lab = nullptr;
  std::unique_ptr<EqLab> lab_owner;
  auto need_lab = [&]() -> EqLab& {
    if (!lab) lab_owner = std::make_unique<EqLab>(), lab = lab_owner.get();
    return *lab;
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"KL correctness", kl_correctness},
      {"synthetic recovery", [&] { return synthetic_recovery(need_lab()); }},
      {"equation-model ordering", [&] { return equation_ordering(need_lab()); }},
      {"topic inference", [&] { return topic_inference(need_lab()); }},
      {"generation fidelity", [&] { return generation_fidelity(need_lab()); }},
      {"alignment direction", [&] { return alignment_direction(phrases); }},
      {"parser suite", [&] { return parser_suite(data_dir); }},
      {"determinism", determinism},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Timer t;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << id << ' ' << criteria[i].first << ": " << o.detail << " ["
              << fmt(t.secs(), 3) << "s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
