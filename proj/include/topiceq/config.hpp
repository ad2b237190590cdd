#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace topiceq {

/// Equation-model variants. None means the context-only topic model.
enum class EqVariant {
  TE,                // topic vector inside every LSTM gate
  TD,                // topic vector added to the output logits through a dense layer
  Plain,             // no topic information
  FixedTopicConcat,  // frozen pre-trained topic vector concatenated to the top hidden state
  Bow,               // bag of tokens mixed by the topic vector
  None,              // no equation model
};

std::string_view to_string(EqVariant v);
EqVariant parse_variant(std::string_view s);

struct TopicModelConfig {
  std::size_t num_topics = 50;
  std::size_t vocab_size = 0;
  std::size_t hidden = 300;  // inference network width
};

struct EqModelConfig {
  EqVariant variant = EqVariant::TE;
  std::size_t layers = 2;
  std::size_t width = 500;
  std::size_t embed_dim = 128;
  double dropout = 0.5;
  std::size_t vocab_size = 0;
  std::size_t num_topics = 0;

  bool has_lstm() const {
    return variant == EqVariant::TE || variant == EqVariant::TD || variant == EqVariant::Plain ||
           variant == EqVariant::FixedTopicConcat;
  }
  /// True when the topic vector enters the gate inputs.
  bool topic_in_gates() const { return variant == EqVariant::TE; }
};

struct AlignConfig {
  bool enabled = false;
  bool topic_aware = true;
  std::size_t num_phrases = 0;  // M
  std::size_t num_symbols = 0;  // L
  std::size_t factors = 0;      // F, defaults to the number of topics
};

struct ModelConfig {
  TopicModelConfig topic;
  EqModelConfig eq;
  AlignConfig align;
  double diversity_weight = 0.1;

  /// Throws Error(InputError) on inconsistent sizes or out-of-range rates.
  void validate() const;
};

struct TrainConfig {
  ModelConfig model;
  double lr = 0.002;
  std::size_t batch_size = 200;
  double clip = 1.0;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  std::size_t eval_every = 1;
  std::size_t threads = 0;  // 0: TOPICEQ_THREADS, else 1
  bool kl_annealing = false;
  std::size_t kl_anneal_epochs = 5;
  /// Independent initializations; the one with the best validation
  /// perplexity (final training loss without a validation set) is kept.
  std::size_t restarts = 1;
  /// Shuffle each training equation's tokens (syntax-corruption ablation).
  bool shuffle_equations = false;
  /// Context-only checkpoint whose topic model is frozen and reused by the
  /// FixedTopicConcat variant.
  std::string fixed_topic_checkpoint;

  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace topiceq
