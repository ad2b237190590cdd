#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "topiceq/corpus.hpp"
#include "topiceq/model.hpp"

namespace topiceq {
struct PreparedPair;
}

namespace topiceq::eval {

using WordSet = std::unordered_set<std::string>;

struct CoherenceReport {
  std::vector<double> per_topic;
  double mean = 0.0;
};

/// Document co-occurrence NPMI over every word pair of each topic list, with
/// the joint count smoothed by +1. Pairs involving a word that occurs in no
/// document score 0; a joint probability of 1 or more scores 1.
double pair_npmi(std::size_t n_i, std::size_t n_j, std::size_t n_ij, std::size_t n_docs);
CoherenceReport npmi(const std::vector<std::vector<std::string>>& topics, const std::vector<WordSet>& docs);

/// In-vocabulary context words of each pair.
std::vector<WordSet> reference_docs(const std::vector<corpus::ContextEqPair>& pairs, const Vocab& words);
/// NPMI of each learned topic's top-n words.
CoherenceReport topic_coherence(const Model& model, const std::vector<WordSet>& docs, std::size_t top_n = 10);

struct LogLikTotal {
  double total_logprob = 0.0;
  std::size_t count = 0;
  double perplexity() const;
};

/// exp(-sum logprob / sum count) over the pairs' equations, theta from the posterior mean.
LogLikTotal equation_loglik(const Model& model, const std::vector<PreparedPair>& pairs, std::size_t threads = 1);
/// Same over phrase occurrences (alignment models).
LogLikTotal alignment_loglik(const Model& model, const std::vector<PreparedPair>& pairs, std::size_t threads = 1);
/// Same over context words.
LogLikTotal context_loglik(const Model& model, const std::vector<PreparedPair>& pairs, std::size_t threads = 1);

/// Fraction of n sampled token sequences that fail the checker.
using EquationSampler = std::function<std::vector<std::string>(std::size_t index)>;
using SyntaxOracle = std::function<bool(const std::vector<std::string>& tokens)>;
double syntax_error_rate(const EquationSampler& sampler, std::size_t n, const SyntaxOracle& valid = {},
                         std::size_t threads = 1);

struct SyntaxEvalOptions {
  std::size_t num_samples = 500;
  double temperature = 1.0;
  std::size_t max_len = 200;
  std::uint64_t seed = 1;
  /// Draw theta from test posteriors (cycled) instead of the prior.
  bool use_posterior = false;
  std::size_t threads = 0;
  SyntaxOracle oracle;  // defaults to check_syntax
};

/// Sampler over a trained equation model; sample i uses its own derived stream.
EquationSampler model_sampler(const Model& model, const SyntaxEvalOptions& opts,
                              const std::vector<PreparedPair>* posterior_pairs = nullptr);
double syntax_error_rate(const Model& model, const SyntaxEvalOptions& opts,
                         const std::vector<PreparedPair>* posterior_pairs = nullptr);

/// {coherence, perplexity, syntax_error_rate, config}. Fields that do not
/// apply to the model family are null.
nlohmann::json eval_report(const Model& model, const std::vector<corpus::ContextEqPair>& test_pairs,
                           const SyntaxEvalOptions& syntax, std::size_t top_n = 10);

}  // namespace topiceq::eval
