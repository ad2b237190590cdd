#include "topiceq/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "topiceq/align.hpp"
#include "topiceq/eqnet.hpp"
#include "topiceq/error.hpp"
#include "topiceq/evalsuite.hpp"
#include "topiceq/parallel.hpp"
#include "topiceq/topicnet.hpp"

namespace topiceq {

PreparedPair prepare_pair(const corpus::ContextEqPair& pair, const Model& model) {
  PreparedPair p;
  p.bow = corpus::preprocess_context(pair, model.vocabs.words);
  p.topic = pair.topic;
  if (model.config.eq.variant != EqVariant::None) p.equation = model.vocabs.math.encode(pair.equation);
  if (model.config.align.enabled) {
    p.symbols = align::symbol_bag(pair.equation, model.vocabs.symbols);
    p.phrases = align::extract_phrase_occurrences(pair, model.vocabs.phrases);
  }
  return p;
}

std::vector<PreparedPair> prepare_pairs(const std::vector<corpus::ContextEqPair>& pairs, const Model& model) {
  std::vector<PreparedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(prepare_pair(p, model));
  return out;
}

LossGraph elbo_loss(Tape& tape, const Model& model, const PreparedPair& pair, const Array& eps, Rng& dropout_rng,
                    bool train, double kl_weight) {
  const ModelConfig& cfg = model.config;
  LossGraph g;
  auto post = topicnet::infer_posterior(tape, cfg.topic, pair.bow);
  auto tv = topicnet::sample_theta(tape, post, eps);
  Var beta = topicnet::topic_matrix(tape);
  Var bow_ll = topicnet::bow_log_likelihood(tape, pair.bow, tv.theta, beta);
  Var kl = topicnet::kl_to_standard_normal(tape, tv.mu, tv.logvar);
  Var div = cfg.topic.num_topics >= 2 ? topicnet::diversity_penalty(tape, beta) : tape.constant(Array::scalar(0.0));

  Var eq_ll = tape.constant(Array::scalar(0.0));
  if (cfg.align.enabled) {
    Var s = tape.constant(pair.symbols);
    for (std::size_t w : pair.phrases) {
      eq_ll = tape.add(eq_ll, align::phrase_log_likelihood(tape, cfg.align, w, s, tv.theta));
    }
  } else if (cfg.eq.variant != EqVariant::None && !pair.equation.empty()) {
    Var theta = tv.theta;
    if (cfg.eq.variant == EqVariant::FixedTopicConcat) {
      auto mean = topicnet::sample_theta(tape, post, Array(Shape{cfg.topic.num_topics}));
      theta = tape.constant(tape.value(mean.theta));
    }
    eq_ll = eqnet::eq_log_likelihood(tape, cfg.eq, pair.equation, theta, dropout_rng, train).total;
  }

  Var total = tape.sub(tape.scale(kl, kl_weight), bow_ll);
  total = tape.sub(total, eq_ll);
  total = tape.add(total, tape.scale(div, cfg.diversity_weight));
  g.total = total;
  g.values = {tape.scalar(bow_ll), tape.scalar(kl), tape.scalar(eq_ll), tape.scalar(div), tape.scalar(total)};
  return g;
}

LossBreakdown elbo_loss(const Model& model, const PreparedPair& pair, const Array& eps) {
  Tape tape(model.params);
  Rng unused(0);
  return elbo_loss(tape, model, pair, eps, unused, false).values;
}

void to_json(nlohmann::json& j, const EpochMetrics& m) {
  j = nlohmann::json{{"epoch", m.epoch}, {"train_loss", m.train_loss}, {"valid_ppl", m.valid_ppl}, {"kl_mean", m.kl_mean}};
}

double validation_perplexity(const Model& model, const std::vector<PreparedPair>& pairs, std::size_t threads) {
  if (model.config.align.enabled) return eval::alignment_loglik(model, pairs, threads).perplexity();
  if (model.config.eq.variant == EqVariant::None) return eval::context_loglik(model, pairs, threads).perplexity();
  return eval::equation_loglik(model, pairs, threads).perplexity();
}

void adopt_frozen_topic_model(Model& model, const Model& source) {
  if (source.vocabs.words != model.vocabs.words) {
    throw Error(ErrorKind::InputError, "frozen topic model uses a different word vocabulary");
  }
  if (source.config.topic.num_topics != model.config.topic.num_topics ||
      source.config.topic.hidden != model.config.topic.hidden) {
    throw Error(ErrorKind::InputError, "frozen topic model has a different shape");
  }
  for (const Parameter& p : source.params) {
    if (p.name.rfind("inf.", 0) != 0 && p.name.rfind("topic.", 0) != 0) continue;
    Parameter& dst = model.params[p.name];
    dst.value = p.value;
    dst.frozen = true;
  }
}

namespace {

bool trainable(const Model& model, const PreparedPair& p) {
  if (p.bow.empty()) return false;
  if (model.config.eq.variant != EqVariant::None && !model.config.align.enabled && p.equation.empty()) return false;
  return true;
}

}  // namespace

namespace {

constexpr std::uint64_t kRestartStream = 0x7265;
constexpr std::uint64_t kShuffleStream = 0x5368;

struct RunContext {
  const TrainConfig& cfg;
  std::uint64_t seed;
  std::size_t threads;
  std::size_t restart;
  bool tag_restart;
  const TrainHooks& hooks;
};

TrainResult train_once(const RunContext& ctx, Model& model, const std::vector<PreparedPair>& train_pairs,
                       const std::vector<std::size_t>& usable, const std::vector<PreparedPair>& valid_pairs) {
  const TrainConfig& cfg = ctx.cfg;
  const TrainHooks& hooks = ctx.hooks;
  const std::size_t threads = ctx.threads;
  TrainResult result;
  result.restart = ctx.restart;
  result.skipped_pairs = train_pairs.size() - usable.size();

  const std::size_t k = model.config.topic.num_topics;
  AdamConfig adam{cfg.lr};
  long step = 0;
  result.best_params = model.params;
  model.params.zero_grad();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double kl_weight =
        cfg.kl_annealing ? std::min(1.0, static_cast<double>(epoch) / static_cast<double>(cfg.kl_anneal_epochs)) : 1.0;
    std::vector<std::size_t> order = usable;
    Rng shuffle_rng = Rng::derive(ctx.seed, epoch, 0);
    shuffle_rng.shuffle(order);

    EpochMetrics metrics;
    metrics.epoch = epoch;
    double loss_sum = 0.0, kl_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      const std::size_t wave = std::max<std::size_t>(1, threads);
      for (std::size_t w0 = start; w0 < end; w0 += wave) {
        const std::size_t w1 = std::min(end, w0 + wave);
        std::vector<GradBuffer> grads(w1 - w0, GradBuffer(model.params.size()));
        std::vector<LossBreakdown> losses(w1 - w0);
        parallel_for(w1 - w0, threads, [&](std::size_t j) {
          const std::size_t idx = order[w0 + j];
          Rng rng = Rng::derive(ctx.seed, epoch, idx + 1);
          Array eps = sample_standard_normal(rng, Shape{k});
          Tape tape(model.params);
          LossGraph g = elbo_loss(tape, model, train_pairs[idx], eps, rng, true, kl_weight);
          tape.backward(g.total);
          tape.accumulate_param_grads(grads[j], inv);
          losses[j] = g.values;
        });
        for (std::size_t j = 0; j < grads.size(); ++j) {
          grads[j].add_to(model.params);
          loss_sum += losses[j].total;
          kl_sum += losses[j].kl;
        }
      }
      clip_global_norm(model.params, cfg.clip);
      const double clipped = global_grad_norm(model.params);
      metrics.max_clipped_norm = std::max(metrics.max_clipped_norm, clipped);
      if (hooks.on_step) hooks.on_step(clipped);
      adam_step(model.params, adam, ++step);
    }
    metrics.train_loss = loss_sum / static_cast<double>(order.size());
    metrics.kl_mean = kl_sum / static_cast<double>(order.size());

    const bool evaluate = !valid_pairs.empty() && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs);
    metrics.valid_ppl = evaluate ? validation_perplexity(model, valid_pairs, threads) : NAN;
    if (evaluate && metrics.valid_ppl < result.best_valid_ppl) {
      result.best_valid_ppl = metrics.valid_ppl;
      result.best_epoch = epoch;
      result.best_params = model.params;
    }
    result.epochs.push_back(metrics);
    if (hooks.metrics_jsonl) {
      nlohmann::json j = metrics;
      if (!evaluate) j["valid_ppl"] = nullptr;
      if (ctx.tag_restart) j["restart"] = ctx.restart;
      *hooks.metrics_jsonl << j.dump() << '\n';
    }
    if (hooks.progress) {
      if (ctx.tag_restart) *hooks.progress << "restart " << ctx.restart << ' ';
      *hooks.progress << "epoch " << epoch << " train_loss " << metrics.train_loss << " valid_ppl " << metrics.valid_ppl
                      << " kl_mean " << metrics.kl_mean << '\n';
    }
  }
  if (valid_pairs.empty()) {
    result.best_epoch = cfg.epochs;
    result.best_params = model.params;
  }
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, Model& model, const std::vector<PreparedPair>& train_pairs,
                  const std::vector<PreparedPair>& valid_pairs, const TrainHooks& hooks) {
  cfg.validate();
  const std::size_t threads = resolve_threads(cfg.threads);
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train_pairs.size(); ++i) {
    if (trainable(model, train_pairs[i])) usable.push_back(i);
  }
  if (usable.empty()) throw Error(ErrorKind::EmptyBatch, "every training pair was skipped");

  std::vector<PreparedPair> shuffled;
  if (cfg.shuffle_equations) {
    shuffled = train_pairs;
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
      Rng rng = Rng::derive(cfg.seed, kShuffleStream, i);
      rng.shuffle(shuffled[i].equation);
    }
  }
  const auto& pairs = cfg.shuffle_equations ? shuffled : train_pairs;

  TrainResult best;
  ParamStore best_final;
  double best_score = INFINITY;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    Model candidate = model;
    std::uint64_t seed = cfg.seed;
    if (r > 0) {
      seed = Rng::derive(cfg.seed, kRestartStream, r).next_u64();
      ParamStore fresh = Model::create(model.config, model.vocabs, seed).params;
      for (const Parameter& p : model.params) {
        if (!p.frozen) continue;
        fresh[p.name].value = p.value;
        fresh[p.name].frozen = true;
      }
      candidate.params = std::move(fresh);
    }
    RunContext ctx{cfg, seed, threads, r, cfg.restarts > 1, hooks};
    TrainResult res = train_once(ctx, candidate, pairs, usable, valid_pairs);
    const double score = valid_pairs.empty() ? res.epochs.back().train_loss : res.best_valid_ppl;
    if (r == 0 || score < best_score) {
      best_score = score;
      best = std::move(res);
      best_final = std::move(candidate.params);
    }
  }
  model.params = std::move(best_final);
  if (hooks.progress && cfg.restarts > 1) *hooks.progress << "kept restart " << best.restart << '\n';
  if (hooks.progress && best.skipped_pairs > 0) {
    *hooks.progress << "skipped " << best.skipped_pairs << " pairs with empty context or equation\n";
  }
  return best;
}

}  // namespace topiceq
