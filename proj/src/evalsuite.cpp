#include "topiceq/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "topiceq/align.hpp"
#include "topiceq/eqnet.hpp"
#include "topiceq/error.hpp"
#include "topiceq/mathtok.hpp"
#include "topiceq/parallel.hpp"
#include "topiceq/topicnet.hpp"
#include "topiceq/trainer.hpp"

namespace topiceq::eval {

double pair_npmi(std::size_t n_i, std::size_t n_j, std::size_t n_ij, std::size_t n_docs) {
  if (n_docs == 0) throw Error(ErrorKind::InputError, "NPMI needs at least one reference document");
  if (n_i == 0 || n_j == 0) return 0.0;
  const double n = static_cast<double>(n_docs);
  const double p_i = static_cast<double>(n_i) / n;
  const double p_j = static_cast<double>(n_j) / n;
  const double p_ij = static_cast<double>(n_ij + 1) / n;
  if (p_ij >= 1.0) return 1.0;
  const double v = std::log(p_ij / (p_i * p_j)) / -std::log(p_ij);
  return std::clamp(v, -1.0, 1.0);
}

CoherenceReport npmi(const std::vector<std::vector<std::string>>& topics, const std::vector<WordSet>& docs) {
  if (docs.empty()) throw Error(ErrorKind::InputError, "NPMI needs at least one reference document");
  std::unordered_map<std::string, std::vector<std::uint32_t>> postings;
  for (const auto& t : topics)
    for (const auto& w : t) postings.emplace(w, std::vector<std::uint32_t>{});
  for (std::uint32_t d = 0; d < docs.size(); ++d) {
    for (auto& [w, list] : postings)
      if (docs[d].count(w)) list.push_back(d);
  }
  auto joint = [](const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
    std::size_t i = 0, j = 0, n = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] < b[j]) {
        ++i;
      } else if (b[j] < a[i]) {
        ++j;
      } else {
        ++n, ++i, ++j;
      }
    }
    return n;
  };
  CoherenceReport r;
  for (const auto& t : topics) {
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
      for (std::size_t j = i + 1; j < t.size(); ++j) {
        const auto& a = postings.at(t[i]);
        const auto& b = postings.at(t[j]);
        sum += pair_npmi(a.size(), b.size(), joint(a, b), docs.size());
        ++pairs;
      }
    r.per_topic.push_back(pairs ? sum / static_cast<double>(pairs) : 0.0);
  }
  if (!r.per_topic.empty()) {
    double s = 0.0;
    for (double v : r.per_topic) s += v;
    r.mean = s / static_cast<double>(r.per_topic.size());
  }
  return r;
}

std::vector<WordSet> reference_docs(const std::vector<corpus::ContextEqPair>& pairs, const Vocab& words) {
  std::vector<WordSet> docs;
  docs.reserve(pairs.size());
  for (const auto& p : pairs) {
    WordSet s;
    for (auto& w : corpus::context_words(p))
      if (words.contains(w)) s.insert(std::move(w));
    docs.push_back(std::move(s));
  }
  return docs;
}

CoherenceReport topic_coherence(const Model& model, const std::vector<WordSet>& docs, std::size_t top_n) {
  const Array beta = topicnet::beta_values(model.params);
  std::vector<std::vector<std::string>> topics;
  top_n = std::min(top_n, model.vocabs.words.size());
  for (std::size_t k = 0; k < model.config.topic.num_topics; ++k) {
    topics.push_back(topicnet::top_words(beta, k, top_n, model.vocabs.words));
  }
  return npmi(topics, docs);
}

double LogLikTotal::perplexity() const {
  if (count == 0) throw Error(ErrorKind::InputError, "perplexity over zero predicted tokens");
  return std::exp(-total_logprob / static_cast<double>(count));
}

namespace {

template <typename F>
LogLikTotal reduce_pairs(const std::vector<PreparedPair>& pairs, std::size_t threads, F per_pair) {
  std::vector<LogLikTotal> parts(pairs.size());
  parallel_for(pairs.size(), resolve_threads(threads), [&](std::size_t i) { parts[i] = per_pair(pairs[i]); });
  LogLikTotal t;
  for (const auto& p : parts) {
    t.total_logprob += p.total_logprob;
    t.count += p.count;
  }
  return t;
}

}  // namespace

LogLikTotal equation_loglik(const Model& model, const std::vector<PreparedPair>& pairs, std::size_t threads) {
  if (model.config.eq.variant == EqVariant::None) throw Error(ErrorKind::InputError, "model has no equation component");
  return reduce_pairs(pairs, threads, [&](const PreparedPair& p) {
    if (p.equation.empty()) return LogLikTotal{};
    const auto state = topicnet::posterior_mean(model.params, model.config.topic, p.bow);
    const auto s = eqnet::score(model.params, model.config.eq, p.equation, state.theta);
    return LogLikTotal{s.total_logprob, s.token_count};
  });
}

LogLikTotal alignment_loglik(const Model& model, const std::vector<PreparedPair>& pairs, std::size_t threads) {
  if (!model.config.align.enabled) throw Error(ErrorKind::InputError, "model has no alignment component");
  return reduce_pairs(pairs, threads, [&](const PreparedPair& p) {
    if (p.phrases.empty()) return LogLikTotal{};
    const auto state = topicnet::posterior_mean(model.params, model.config.topic, p.bow);
    const Array probs = align::phrase_distribution(model.params, model.config.align, p.symbols, state.theta);
    LogLikTotal t;
    for (std::size_t w : p.phrases) t.total_logprob += std::log(probs[w]);
    t.count = p.phrases.size();
    return t;
  });
}

LogLikTotal context_loglik(const Model& model, const std::vector<PreparedPair>& pairs, std::size_t threads) {
  const Array beta = topicnet::beta_values(model.params);
  return reduce_pairs(pairs, threads, [&](const PreparedPair& p) {
    if (p.bow.empty()) return LogLikTotal{};
    const auto state = topicnet::posterior_mean(model.params, model.config.topic, p.bow);
    LogLikTotal t;
    for (auto [w, c] : p.bow) {
      double mix = 0.0;
      for (std::size_t k = 0; k < state.theta.size(); ++k) mix += state.theta[k] * beta.at(k, w);
      t.total_logprob += static_cast<double>(c) * std::log(mix + topicnet::kProbFloor);
      t.count += c;
    }
    return t;
  });
}

double syntax_error_rate(const EquationSampler& sampler, std::size_t n, const SyntaxOracle& valid,
                         std::size_t threads) {
  if (n < 1) throw Error(ErrorKind::InputError, "syntax error rate needs at least one sample");
  std::vector<char> failed(n, 0);
  parallel_for(n, resolve_threads(threads), [&](std::size_t i) {
    const auto tokens = sampler(i);
    const bool ok = valid ? valid(tokens) : mathtok::check_syntax(tokens).valid;
    failed[i] = ok ? 0 : 1;
  });
  const auto bad = static_cast<double>(std::count(failed.begin(), failed.end(), 1));
  return bad / static_cast<double>(n);
}

EquationSampler model_sampler(const Model& model, const SyntaxEvalOptions& opts,
                              const std::vector<PreparedPair>* posterior_pairs) {
  if (opts.use_posterior && (!posterior_pairs || posterior_pairs->empty())) {
    throw Error(ErrorKind::InputError, "posterior sampling needs test pairs");
  }
  return [&model, opts, posterior_pairs](std::size_t i) {
    Rng rng = Rng::derive(opts.seed, 0x5e, i);
    const std::size_t k = model.config.topic.num_topics;
    Array theta;
    if (opts.use_posterior) {
      const auto& p = (*posterior_pairs)[i % posterior_pairs->size()];
      theta = topicnet::posterior_mean(model.params, model.config.topic, p.bow).theta;
    } else {
      theta = topicnet::theta_for_eta(model.params, sample_standard_normal(rng, Shape{k}));
    }
    eqnet::SampleOptions so;
    so.temperature = opts.temperature;
    so.max_len = opts.max_len;
    return model.vocabs.math.decode(eqnet::sample_equation(model.params, model.config.eq, theta, so, rng));
  };
}

double syntax_error_rate(const Model& model, const SyntaxEvalOptions& opts,
                         const std::vector<PreparedPair>* posterior_pairs) {
  return syntax_error_rate(model_sampler(model, opts, posterior_pairs), opts.num_samples, opts.oracle, opts.threads);
}

nlohmann::json eval_report(const Model& model, const std::vector<corpus::ContextEqPair>& test_pairs,
                           const SyntaxEvalOptions& syntax, std::size_t top_n) {
  if (test_pairs.empty()) throw Error(ErrorKind::InputError, "evaluation needs at least one test pair");
  const auto prepared = prepare_pairs(test_pairs, model);
  const auto coherence = topic_coherence(model, reference_docs(test_pairs, model.vocabs.words), top_n);
  nlohmann::json j;
  j["coherence"] = {{"per_topic", coherence.per_topic}, {"mean", coherence.mean}, {"top_n", top_n}};
  j["perplexity"] = nullptr;
  j["syntax_error_rate"] = nullptr;
  if (model.config.align.enabled) {
    j["perplexity"] = alignment_loglik(model, prepared, syntax.threads).perplexity();
  } else if (model.config.eq.variant != EqVariant::None) {
    j["perplexity"] = equation_loglik(model, prepared, syntax.threads).perplexity();
    if (model.config.eq.has_lstm()) j["syntax_error_rate"] = syntax_error_rate(model, syntax, &prepared);
  }
  j["config"] = nlohmann::json::parse(model.config_json()).at("model");
  j["config"]["family"] = model.family();
  j["syntax"] = {{"samples", syntax.num_samples},
                 {"temperature", syntax.temperature},
                 {"seed", syntax.seed},
                 {"theta_source", syntax.use_posterior ? "posterior" : "prior"}};
  return j;
}

}  // namespace topiceq::eval
