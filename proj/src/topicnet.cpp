#include "topiceq/topicnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "topiceq/error.hpp"

namespace topiceq::topicnet {

void init_params(ParamStore& store, const TopicModelConfig& cfg, Rng& rng) {
  const std::size_t k = cfg.num_topics, v = cfg.vocab_size, h = cfg.hidden;
  store.add_glorot("inf.l1.W", h, v, rng);
  store.add_zeros("inf.l1.b", {h});
  store.add_glorot("inf.l2.W", h, h, rng);
  store.add_zeros("inf.l2.b", {h});
  store.add_glorot("inf.mu.W", k, h, rng);
  store.add_zeros("inf.mu.b", {k});
  store.add_glorot("inf.logvar.W", k, h, rng);
  store.add_zeros("inf.logvar.b", {k});
  store.add_glorot("topic.g.W", k, k, rng);
  store.add_zeros("topic.g.b", {k});
  store.add_glorot("topic.beta", k, v, rng);
}

Array normalized_bow(const corpus::SparseBow& bow, std::size_t vocab_size) {
  Array x(Shape{vocab_size});
  double total = 0.0;
  for (auto [id, count] : bow) total += static_cast<double>(count);
  if (total <= 0.0) return x;
  for (auto [id, count] : bow) {
    if (id >= vocab_size) throw Error(ErrorKind::InputError, "word id out of vocabulary range");
    x[id] = static_cast<double>(count) / total;
  }
  return x;
}

PosteriorVars infer_posterior(Tape& tape, const TopicModelConfig& cfg, const corpus::SparseBow& bow) {
  Var x = tape.constant(normalized_bow(bow, cfg.vocab_size));
  Var h1 = tape.tanh(tape.affine(tape.param("inf.l1.W"), x, tape.param("inf.l1.b")));
  Var h2 = tape.tanh(tape.affine(tape.param("inf.l2.W"), h1, tape.param("inf.l2.b")));
  Var mu = tape.affine(tape.param("inf.mu.W"), h2, tape.param("inf.mu.b"));
  Var logvar = tape.affine(tape.param("inf.logvar.W"), h2, tape.param("inf.logvar.b"));
  return {mu, tape.clamp(logvar, kLogvarMin, kLogvarMax)};
}

Var theta_from_eta(Tape& tape, Var eta) {
  return tape.softmax(tape.affine(tape.param("topic.g.W"), eta, tape.param("topic.g.b")));
}

TopicVars sample_theta(Tape& tape, const PosteriorVars& post, const Array& eps) {
  if (eps.shape() != tape.value(post.mu).shape()) {
    throw Error(ErrorKind::ShapeError, "noise shape " + shape_string(eps.shape()) + " does not match mu");
  }
  Var sigma = tape.exp(tape.scale(post.logvar, 0.5));
  Var eta = tape.add(post.mu, tape.mul(sigma, tape.constant(eps)));
  return {post.mu, post.logvar, eta, theta_from_eta(tape, eta)};
}

Var topic_matrix(Tape& tape) { return tape.softmax(tape.param("topic.beta")); }

Var bow_log_likelihood(Tape& tape, const corpus::SparseBow& bow, Var theta, Var beta) {
  if (bow.empty()) return tape.constant(Array::scalar(0.0));
  std::vector<std::size_t> ids;
  Array counts(Shape{bow.size()});
  for (std::size_t i = 0; i < bow.size(); ++i) {
    ids.push_back(bow[i].first);
    counts[i] = static_cast<double>(bow[i].second);
  }
  Var mixture = tape.matmul(theta, beta);
  Var logp = tape.log(tape.add_scalar(tape.gather(mixture, ids), kProbFloor));
  return tape.reduce_sum(tape.mul(logp, tape.constant(std::move(counts))));
}

Var kl_to_standard_normal(Tape& tape, Var mu, Var logvar) {
  Var terms = tape.sub(tape.add(tape.exp(logvar), tape.mul(mu, mu)), tape.add_scalar(logvar, 1.0));
  return tape.scale(tape.reduce_sum(terms), 0.5);
}

double kl_to_standard_normal(const Array& mu, const Array& logvar) {
  if (mu.shape() != logvar.shape()) throw Error(ErrorKind::ShapeError, "mu and logvar shapes differ");
  double s = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) s += std::exp(logvar[k]) + mu[k] * mu[k] - 1.0 - logvar[k];
  return 0.5 * s;
}

Var diversity_penalty(Tape& tape, Var beta) { return tape.mean_pairwise_cosine(beta); }

TopicState posterior_mean(const ParamStore& store, const TopicModelConfig& cfg, const corpus::SparseBow& bow) {
  Tape tape(store);
  auto post = infer_posterior(tape, cfg, bow);
  auto tv = sample_theta(tape, post, Array(Shape{cfg.num_topics}));
  return {tape.value(tv.mu), tape.value(tv.logvar), tape.value(tv.eta), tape.value(tv.theta)};
}

Array theta_for_eta(const ParamStore& store, const Array& eta) {
  Tape tape(store);
  return tape.value(theta_from_eta(tape, tape.constant(eta)));
}

Array beta_values(const ParamStore& store) {
  Tape tape(store);
  return tape.value(topic_matrix(tape));
}

std::vector<std::pair<std::string, double>> top_words_with_probs(const Array& beta, std::size_t k, std::size_t n,
                                                                 const Vocab& vocab) {
  if (beta.rank() != 2 || k >= beta.dim(0)) throw Error(ErrorKind::InputError, "topic index out of range");
  const std::size_t v = beta.dim(1);
  if (n > v) throw Error(ErrorKind::InputError, "requested more top words than the vocabulary holds");
  if (vocab.size() != v) throw Error(ErrorKind::ShapeError, "vocabulary size does not match topic matrix");
  std::vector<std::size_t> order(v);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double pa = beta.at(k, a), pb = beta.at(k, b);
    if (pa != pb) return pa > pb;
    return vocab.lookup(a) < vocab.lookup(b);
  });
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(vocab.lookup(order[i]), beta.at(k, order[i]));
  return out;
}

std::vector<std::string> top_words(const Array& beta, std::size_t k, std::size_t n, const Vocab& vocab) {
  std::vector<std::string> out;
  for (auto& [w, p] : top_words_with_probs(beta, k, n, vocab)) out.push_back(w);
  return out;
}

}  // namespace topiceq::topicnet
