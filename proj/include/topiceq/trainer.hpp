#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "topiceq/array.hpp"
#include "topiceq/config.hpp"
#include "topiceq/corpus.hpp"
#include "topiceq/model.hpp"
#include "topiceq/rng.hpp"
#include "topiceq/tape.hpp"

namespace topiceq {

/// A pair converted to ids for one model.
struct PreparedPair {
  corpus::SparseBow bow;
  std::vector<std::size_t> equation;  // math ids (empty for non-equation models)
  Array symbols;                      // alignment symbol bag
  std::vector<std::size_t> phrases;   // alignment phrase occurrences
  std::optional<int> topic;
};

PreparedPair prepare_pair(const corpus::ContextEqPair& pair, const Model& model);
std::vector<PreparedPair> prepare_pairs(const std::vector<corpus::ContextEqPair>& pairs, const Model& model);

struct LossBreakdown {
  double bow_ll = 0.0;
  double kl = 0.0;
  double eq_ll = 0.0;  // equation or phrase log-likelihood
  double diversity = 0.0;
  double total = 0.0;
};

struct LossGraph {
  Var total;
  LossBreakdown values;
};

/// One-sample ELBO loss for a pair:
/// total = -bow_ll + kl_weight * kl - eq_ll + diversity_weight * diversity.
/// The equation term is the teacher-forced sequence likelihood, or the sum
/// of phrase log-likelihoods for alignment models, or absent.
LossGraph elbo_loss(Tape& tape, const Model& model, const PreparedPair& pair, const Array& eps, Rng& dropout_rng,
                    bool train, double kl_weight = 1.0);
LossBreakdown elbo_loss(const Model& model, const PreparedPair& pair, const Array& eps);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_ppl = 0.0;
  double kl_mean = 0.0;
  double max_clipped_norm = 0.0;  // largest post-clip norm seen in the epoch
};

void to_json(nlohmann::json& j, const EpochMetrics& m);

struct TrainResult {
  std::vector<EpochMetrics> epochs;
  std::size_t skipped_pairs = 0;
  std::size_t best_epoch = 0;
  double best_valid_ppl = INFINITY;
  std::size_t restart = 0;  // index of the kept initialization
  ParamStore best_params;
};

struct TrainHooks {
  std::ostream* metrics_jsonl = nullptr;
  std::ostream* progress = nullptr;
  /// Called after every optimizer step with the post-clip gradient norm.
  std::function<void(double)> on_step;
};

/// Validation metric: equation perplexity, alignment perplexity for
/// alignment models, context-word perplexity for context-only models.
double validation_perplexity(const Model& model, const std::vector<PreparedPair>& pairs, std::size_t threads = 1);

/// Minibatch Adam with global-norm clipping on the mean per-pair loss.
/// On return `model` holds the final parameters of the kept restart.
/// Pairs with an empty bow (or, for equation models, no equation) are
/// skipped. Throws Error(EmptyBatch) when nothing is trainable.
TrainResult train(const TrainConfig& cfg, Model& model, const std::vector<PreparedPair>& train_pairs,
                  const std::vector<PreparedPair>& valid_pairs, const TrainHooks& hooks = {});

/// Copies inf.* and topic.* from a trained context-only model and freezes them.
void adopt_frozen_topic_model(Model& model, const Model& source);

}  // namespace topiceq
