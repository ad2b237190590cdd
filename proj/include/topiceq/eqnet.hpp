#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "topiceq/array.hpp"
#include "topiceq/config.hpp"
#include "topiceq/params.hpp"
#include "topiceq/rng.hpp"
#include "topiceq/tape.hpp"

namespace topiceq::eqnet {

/// Registers eq.* parameters for the configured variant. Gate weights are
/// eq.l{n}.W_{i,f,c,o} with biases eq.l{n}.b_*; the forget bias starts at 1.
void init_params(ParamStore& store, const EqModelConfig& cfg, Rng& rng);

struct LstmState {
  std::vector<Var> h;
  std::vector<Var> c;
};

LstmState initial_state(Tape& tape, const EqModelConfig& cfg);

struct StepResult {
  LstmState state;
  Var logits;
};

/// One recurrent step on an input embedding x. Dropout (when train is true)
/// is applied to each layer's output before it feeds the next layer and the
/// output head; the recurrent state keeps the undropped value.
StepResult lstm_step(Tape& tape, const EqModelConfig& cfg, const LstmState& prev, Var x, Var theta, Rng& rng,
                     bool train);
StepResult lstm_step_token(Tape& tape, const EqModelConfig& cfg, const LstmState& prev, std::size_t token, Var theta,
                           Rng& rng, bool train);

struct SeqLogLik {
  Var total;
  std::size_t token_count = 0;
};

/// Teacher-forced log-likelihood of [y1..yT, <END>] given [<START>, y1..yT].
/// For the bag-of-tokens variant this is bow_eq_log_likelihood with count T.
SeqLogLik eq_log_likelihood(Tape& tape, const EqModelConfig& cfg, std::span<const std::size_t> tokens, Var theta,
                            Rng& rng, bool train);

/// sum_t log((theta^T beta_eq)_{y_t}) with beta_eq = row softmax of eq.bow.beta.
Var bow_eq_log_likelihood(Tape& tape, const EqModelConfig& cfg, std::span<const std::size_t> tokens, Var theta);

struct Score {
  double total_logprob = 0.0;
  std::size_t token_count = 0;
};

/// Evaluation-mode scoring of a token sequence for a fixed theta.
Score score(const ParamStore& store, const EqModelConfig& cfg, std::span<const std::size_t> tokens,
            const Array& theta);

struct SampleOptions {
  bool greedy = false;
  double temperature = 1.0;
  std::size_t max_len = 200;
  std::vector<std::size_t> prefix;
};

/// Autoregressive decode from <START>; prefix tokens are force-fed and
/// included in the output. <UNK> and <START> are masked; <END> terminates and
/// is stripped. Greedy ties resolve to the smallest id.
std::vector<std::size_t> sample_equation(const ParamStore& store, const EqModelConfig& cfg, const Array& theta,
                                         const SampleOptions& opts, Rng& rng);

/// Next-token distributions along a forced sequence: row t is p(. | <START>, y_1..y_t).
std::vector<Array> stepwise_distributions(const ParamStore& store, const EqModelConfig& cfg,
                                          std::span<const std::size_t> tokens, const Array& theta);

}  // namespace topiceq::eqnet
