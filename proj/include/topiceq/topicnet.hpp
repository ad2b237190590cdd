#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "topiceq/array.hpp"
#include "topiceq/config.hpp"
#include "topiceq/corpus.hpp"
#include "topiceq/params.hpp"
#include "topiceq/tape.hpp"
#include "topiceq/vocab.hpp"

/// Topic-model half: inference network q(eta | context), logistic-normal map
/// theta = softmax(W_g eta + b_g), bag-of-words likelihood under theta^T beta,
/// closed-form KL to N(0, I) and the topic diversity penalty.
namespace topiceq::topicnet {

inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;
inline constexpr double kProbFloor = 1e-12;

/// Registers inf.*, topic.g.* and topic.beta parameters.
void init_params(ParamStore& store, const TopicModelConfig& cfg, Rng& rng);

struct PosteriorVars {
  Var mu;
  Var logvar;  // clamped to [kLogvarMin, kLogvarMax]
};

struct TopicVars {
  Var mu;
  Var logvar;
  Var eta;
  Var theta;
};

/// L1-normalized dense count vector (all zeros for an empty bow).
Array normalized_bow(const corpus::SparseBow& bow, std::size_t vocab_size);

/// Two tanh layers of width cfg.hidden, then affine heads for mu and logvar.
PosteriorVars infer_posterior(Tape& tape, const TopicModelConfig& cfg, const corpus::SparseBow& bow);

/// eta = mu + exp(logvar / 2) * eps; theta = softmax(W_g eta + b_g).
TopicVars sample_theta(Tape& tape, const PosteriorVars& post, const Array& eps);
/// theta = softmax(W_g eta + b_g) for a given eta node.
Var theta_from_eta(Tape& tape, Var eta);

/// Row softmax of topic.beta.
Var topic_matrix(Tape& tape);

/// sum_w count(w) * log((theta^T beta)_w + 1e-12).
Var bow_log_likelihood(Tape& tape, const corpus::SparseBow& bow, Var theta, Var beta);

/// 0.5 * sum_k (exp(logvar_k) + mu_k^2 - 1 - logvar_k).
Var kl_to_standard_normal(Tape& tape, Var mu, Var logvar);
double kl_to_standard_normal(const Array& mu, const Array& logvar);

/// Mean pairwise cosine similarity between the rows of beta.
Var diversity_penalty(Tape& tape, Var beta);

// --- Value-level helpers (evaluation and inspection) -------------------

struct TopicState {
  Array mu;
  Array logvar;
  Array eta;
  Array theta;
};

/// Deterministic posterior-mean path (eps = 0).
TopicState posterior_mean(const ParamStore& store, const TopicModelConfig& cfg, const corpus::SparseBow& bow);
/// theta for an explicit eta (used for prior samples).
Array theta_for_eta(const ParamStore& store, const Array& eta);
Array beta_values(const ParamStore& store);

/// The n most probable words of row k, descending, ties lexicographic.
std::vector<std::string> top_words(const Array& beta, std::size_t k, std::size_t n, const Vocab& vocab);
std::vector<std::pair<std::string, double>> top_words_with_probs(const Array& beta, std::size_t k, std::size_t n,
                                                                 const Vocab& vocab);

}  // namespace topiceq::topicnet
