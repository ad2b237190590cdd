#include "topiceq/eqnet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "topiceq/error.hpp"
#include "topiceq/vocab.hpp"

namespace topiceq::eqnet {

namespace {

std::string layer_name(std::size_t l, const char* what) { return "eq.l" + std::to_string(l) + "." + what; }

std::size_t layer_input_dim(const EqModelConfig& cfg, std::size_t l) {
  std::size_t d = (l == 0 ? cfg.embed_dim : cfg.width) + cfg.width;
  if (cfg.topic_in_gates()) d += cfg.num_topics;
  return d;
}

void check_tokens(const EqModelConfig& cfg, std::span<const std::size_t> tokens) {
  for (std::size_t t : tokens) {
    if (t >= cfg.vocab_size) {
      throw Error(ErrorKind::InputError, "token id " + std::to_string(t) + " outside math vocabulary");
    }
  }
}

void check_theta(const EqModelConfig& cfg, const Array& theta) {
  if (theta.rank() != 1 || theta.size() != cfg.num_topics) {
    throw Error(ErrorKind::ShapeError, "theta has shape " + shape_string(theta.shape()) + ", expected [" +
                                           std::to_string(cfg.num_topics) + "]");
  }
}

}  // namespace

void init_params(ParamStore& store, const EqModelConfig& cfg, Rng& rng) {
  const std::size_t v = cfg.vocab_size, h = cfg.width, k = cfg.num_topics;
  if (cfg.variant == EqVariant::None) return;
  if (cfg.variant == EqVariant::Bow) {
    store.add_glorot("eq.bow.beta", k, v, rng);
    return;
  }
  store.add_glorot("eq.embed", v, cfg.embed_dim, rng);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::size_t d = layer_input_dim(cfg, l);
    for (const char* g : {"i", "f", "c", "o"}) {
      store.add_glorot(layer_name(l, (std::string("W_") + g).c_str()), h, d, rng);
      store.add(layer_name(l, (std::string("b_") + g).c_str()), Array(Shape{h}, g[0] == 'f' ? 1.0 : 0.0));
    }
  }
  const std::size_t out_in = h + (cfg.variant == EqVariant::FixedTopicConcat ? k : 0);
  store.add_glorot("eq.out.W", v, out_in, rng);
  store.add_zeros("eq.out.b", {v});
  if (cfg.variant == EqVariant::TD) store.add_glorot("eq.td.W", v, k, rng);
}

LstmState initial_state(Tape& tape, const EqModelConfig& cfg) {
  LstmState s;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    s.h.push_back(tape.constant(Array(Shape{cfg.width})));
    s.c.push_back(tape.constant(Array(Shape{cfg.width})));
  }
  return s;
}

StepResult lstm_step(Tape& tape, const EqModelConfig& cfg, const LstmState& prev, Var x, Var theta, Rng& rng,
                     bool train) {
  if (!cfg.has_lstm()) throw Error(ErrorKind::InputError, "variant has no recurrent cell");
  StepResult out;
  Var input = x;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    Var z = cfg.topic_in_gates() ? tape.concat({input, prev.h[l], theta}) : tape.concat({input, prev.h[l]});
    auto gate = [&](const char* w, const char* b) {
      return tape.affine(tape.param(layer_name(l, w)), z, tape.param(layer_name(l, b)));
    };
    Var i = tape.sigmoid(gate("W_i", "b_i"));
    Var f = tape.sigmoid(gate("W_f", "b_f"));
    Var o = tape.sigmoid(gate("W_o", "b_o"));
    Var cand = tape.tanh(gate("W_c", "b_c"));
    Var c = tape.add(tape.mul(f, prev.c[l]), tape.mul(i, cand));
    Var h = tape.mul(o, tape.tanh(c));
    out.state.h.push_back(h);
    out.state.c.push_back(c);
    input = tape.dropout(h, cfg.dropout, rng, train);
  }
  if (cfg.variant == EqVariant::FixedTopicConcat) input = tape.concat({input, theta});
  out.logits = tape.affine(tape.param("eq.out.W"), input, tape.param("eq.out.b"));
  if (cfg.variant == EqVariant::TD) out.logits = tape.add(out.logits, tape.affine(tape.param("eq.td.W"), theta));
  return out;
}

StepResult lstm_step_token(Tape& tape, const EqModelConfig& cfg, const LstmState& prev, std::size_t token, Var theta,
                           Rng& rng, bool train) {
  Var x = tape.embed_lookup(tape.param("eq.embed"), token);
  return lstm_step(tape, cfg, prev, x, theta, rng, train);
}

Var bow_eq_log_likelihood(Tape& tape, const EqModelConfig& cfg, std::span<const std::size_t> tokens, Var theta) {
  check_tokens(cfg, tokens);
  if (tokens.empty()) return tape.constant(Array::scalar(0.0));
  Var beta = tape.softmax(tape.param("eq.bow.beta"));
  Var mixture = tape.matmul(theta, beta);
  return tape.reduce_sum(tape.log(tape.gather(mixture, tokens)));
}

SeqLogLik eq_log_likelihood(Tape& tape, const EqModelConfig& cfg, std::span<const std::size_t> tokens, Var theta,
                            Rng& rng, bool train) {
  if (tokens.empty()) throw Error(ErrorKind::InputError, "equation has no tokens");
  check_tokens(cfg, tokens);
  if (cfg.variant == EqVariant::None) throw Error(ErrorKind::InputError, "model has no equation component");
  if (cfg.variant == EqVariant::Bow) return {bow_eq_log_likelihood(tape, cfg, tokens, theta), tokens.size()};

  LstmState state = initial_state(tape, cfg);
  Var total = tape.constant(Array::scalar(0.0));
  std::size_t input = kStartId;
  for (std::size_t t = 0; t <= tokens.size(); ++t) {
    const std::size_t target = t < tokens.size() ? tokens[t] : kEndId;
    StepResult step = lstm_step_token(tape, cfg, state, input, theta, rng, train);
    total = tape.sub(total, tape.categorical_nll(step.logits, target));
    state = std::move(step.state);
    input = target;
  }
  return {total, tokens.size() + 1};
}

Score score(const ParamStore& store, const EqModelConfig& cfg, std::span<const std::size_t> tokens,
            const Array& theta) {
  check_theta(cfg, theta);
  Tape tape(store);
  Rng unused(0);
  SeqLogLik ll = eq_log_likelihood(tape, cfg, tokens, tape.constant(theta), unused, false);
  return {tape.scalar(ll.total), ll.token_count};
}

std::vector<Array> stepwise_distributions(const ParamStore& store, const EqModelConfig& cfg,
                                          std::span<const std::size_t> tokens, const Array& theta) {
  check_theta(cfg, theta);
  check_tokens(cfg, tokens);
  if (!cfg.has_lstm()) throw Error(ErrorKind::InputError, "variant has no recurrent cell");
  Tape tape(store);
  Rng unused(0);
  Var th = tape.constant(theta);
  LstmState state = initial_state(tape, cfg);
  std::vector<Array> out;
  std::size_t input = kStartId;
  for (std::size_t t = 0; t <= tokens.size(); ++t) {
    StepResult step = lstm_step_token(tape, cfg, state, input, th, unused, false);
    out.push_back(tape.value(tape.softmax(step.logits)));
    state = std::move(step.state);
    if (t < tokens.size()) input = tokens[t];
  }
  return out;
}

std::vector<std::size_t> sample_equation(const ParamStore& store, const EqModelConfig& cfg, const Array& theta,
                                         const SampleOptions& opts, Rng& rng) {
  check_theta(cfg, theta);
  check_tokens(cfg, opts.prefix);
  if (opts.max_len < 1) throw Error(ErrorKind::InputError, "max_len must be at least 1");
  if (!opts.greedy && !(opts.temperature > 0.0)) throw Error(ErrorKind::InputError, "temperature must be positive");
  if (!cfg.has_lstm()) throw Error(ErrorKind::InputError, "variant " + std::string(to_string(cfg.variant)) +
                                                               " has no sequential decoder");
  Tape tape(store);
  Rng unused(0);
  Var th = tape.constant(theta);
  LstmState state = initial_state(tape, cfg);
  std::vector<std::size_t> out;
  std::size_t input = kStartId;
  std::vector<double> weights(cfg.vocab_size);
  while (out.size() < opts.max_len) {
    StepResult step = lstm_step_token(tape, cfg, state, input, th, unused, false);
    state = std::move(step.state);
    if (out.size() < opts.prefix.size()) {
      input = opts.prefix[out.size()];
      out.push_back(input);
      continue;
    }
    const Array& logits = tape.value(step.logits);
    std::size_t next = kEndId;
    if (opts.greedy) {
      double best = -INFINITY;
      for (std::size_t w = 0; w < cfg.vocab_size; ++w) {
        if (w == kUnkId || w == kStartId) continue;
        if (logits[w] > best) {
          best = logits[w];
          next = w;
        }
      }
    } else {
      double mx = -INFINITY;
      for (std::size_t w = 0; w < cfg.vocab_size; ++w) {
        if (w != kUnkId && w != kStartId) mx = std::max(mx, logits[w] / opts.temperature);
      }
      for (std::size_t w = 0; w < cfg.vocab_size; ++w) {
        weights[w] = (w == kUnkId || w == kStartId) ? 0.0 : std::exp(logits[w] / opts.temperature - mx);
      }
      next = rng.categorical(weights);
    }
    if (next == kEndId) break;
    out.push_back(next);
    input = next;
  }
  return out;
}

}  // namespace topiceq::eqnet
