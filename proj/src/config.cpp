#include "topiceq/config.hpp"

#include "topiceq/error.hpp"

namespace topiceq {

using nlohmann::json;

std::string_view to_string(EqVariant v) {
  switch (v) {
    case EqVariant::TE: return "TE";
    case EqVariant::TD: return "TD";
    case EqVariant::Plain: return "PLAIN";
    case EqVariant::FixedTopicConcat: return "FIXED_TOPIC_CONCAT";
    case EqVariant::Bow: return "BOW";
    case EqVariant::None: return "NONE";
  }
  return "?";
}

EqVariant parse_variant(std::string_view s) {
  for (auto v : {EqVariant::TE, EqVariant::TD, EqVariant::Plain, EqVariant::FixedTopicConcat, EqVariant::Bow,
                 EqVariant::None}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorKind::InputError, "unknown equation variant '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::InputError, m); };
  if (topic.num_topics < 1) fail("num_topics must be positive");
  if (topic.vocab_size < 1) fail("word vocabulary is empty");
  if (topic.hidden < 1) fail("inference hidden width must be positive");
  if (diversity_weight < 0) fail("diversity weight must be non-negative");
  if (eq.variant != EqVariant::None) {
    if (eq.vocab_size < 4) fail("math vocabulary too small");
    if (eq.num_topics != topic.num_topics) fail("equation model and topic model disagree on K");
  }
  if (eq.has_lstm()) {
    if (eq.layers < 1 || eq.width < 1 || eq.embed_dim < 1) fail("LSTM layers, width and embed_dim must be positive");
    if (!(eq.dropout >= 0.0 && eq.dropout < 1.0)) fail("dropout must lie in [0,1)");
  }
  if (align.enabled) {
    if (eq.variant != EqVariant::None) fail("alignment models replace the equation model; use variant NONE");
    if (align.num_phrases < 1 || align.num_symbols < 1) fail("alignment vocabularies are empty");
    if (align.topic_aware && align.factors < 1) fail("alignment factor count must be positive");
  }
}

void TrainConfig::validate() const {
  model.validate();
  if (!(lr >= 0.0)) throw Error(ErrorKind::InputError, "lr must be non-negative");
  if (batch_size < 1) throw Error(ErrorKind::InputError, "batch_size must be positive");
  if (!(clip > 0.0)) throw Error(ErrorKind::InputError, "clip must be positive");
  if (eval_every < 1) throw Error(ErrorKind::InputError, "eval_every must be positive");
  if (restarts < 1) throw Error(ErrorKind::InputError, "restarts must be positive");
  if (model.eq.variant == EqVariant::FixedTopicConcat && fixed_topic_checkpoint.empty()) {
    throw Error(ErrorKind::InputError, "FIXED_TOPIC_CONCAT needs a pre-trained topic checkpoint");
  }
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"num_topics", c.topic.num_topics},
           {"word_vocab_size", c.topic.vocab_size},
           {"inference_hidden", c.topic.hidden},
           {"eq_variant", std::string(to_string(c.eq.variant))},
           {"eq_layers", c.eq.layers},
           {"eq_width", c.eq.width},
           {"eq_embed_dim", c.eq.embed_dim},
           {"eq_dropout", c.eq.dropout},
           {"math_vocab_size", c.eq.vocab_size},
           {"align_enabled", c.align.enabled},
           {"align_topic_aware", c.align.topic_aware},
           {"align_phrases", c.align.num_phrases},
           {"align_symbols", c.align.num_symbols},
           {"align_factors", c.align.factors},
           {"diversity_weight", c.diversity_weight}};
}

void from_json(const json& j, ModelConfig& c) {
  c.topic.num_topics = j.value("num_topics", c.topic.num_topics);
  c.topic.vocab_size = j.value("word_vocab_size", c.topic.vocab_size);
  c.topic.hidden = j.value("inference_hidden", c.topic.hidden);
  if (j.contains("eq_variant")) c.eq.variant = parse_variant(j.at("eq_variant").get<std::string>());
  c.eq.layers = j.value("eq_layers", c.eq.layers);
  c.eq.width = j.value("eq_width", c.eq.width);
  c.eq.embed_dim = j.value("eq_embed_dim", c.eq.embed_dim);
  c.eq.dropout = j.value("eq_dropout", c.eq.dropout);
  c.eq.vocab_size = j.value("math_vocab_size", c.eq.vocab_size);
  c.eq.num_topics = c.topic.num_topics;
  c.align.enabled = j.value("align_enabled", c.align.enabled);
  c.align.topic_aware = j.value("align_topic_aware", c.align.topic_aware);
  c.align.num_phrases = j.value("align_phrases", c.align.num_phrases);
  c.align.num_symbols = j.value("align_symbols", c.align.num_symbols);
  c.align.factors = j.value("align_factors", c.align.factors);
  c.diversity_weight = j.value("diversity_weight", c.diversity_weight);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"model", c.model},
           {"lr", c.lr},
           {"batch_size", c.batch_size},
           {"clip", c.clip},
           {"epochs", c.epochs},
           {"seed", c.seed},
           {"eval_every", c.eval_every},
           {"kl_annealing", c.kl_annealing},
           {"kl_anneal_epochs", c.kl_anneal_epochs},
           {"restarts", c.restarts},
           {"shuffle_equations", c.shuffle_equations},
           {"fixed_topic_checkpoint", c.fixed_topic_checkpoint}};
}

void from_json(const json& j, TrainConfig& c) {
  if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.clip = j.value("clip", c.clip);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.kl_annealing = j.value("kl_annealing", c.kl_annealing);
  c.kl_anneal_epochs = j.value("kl_anneal_epochs", c.kl_anneal_epochs);
  c.restarts = j.value("restarts", c.restarts);
  c.shuffle_equations = j.value("shuffle_equations", c.shuffle_equations);
  c.fixed_topic_checkpoint = j.value("fixed_topic_checkpoint", c.fixed_topic_checkpoint);
}

}  // namespace topiceq
