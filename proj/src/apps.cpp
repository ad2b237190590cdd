#include "topiceq/apps.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "topiceq/corpus.hpp"
#include "topiceq/eqnet.hpp"
#include "topiceq/error.hpp"
#include "topiceq/mathtok.hpp"
#include "topiceq/rng.hpp"
#include "topiceq/topicnet.hpp"

namespace topiceq::apps {

void validate_theta(const Array& theta, std::size_t num_topics) {
  if (theta.rank() != 1 || theta.size() != num_topics) {
    throw Error(ErrorKind::InputError, "theta must have " + std::to_string(num_topics) + " entries");
  }
  double sum = 0.0;
  for (double v : theta.data()) {
    if (!(v >= 0.0)) throw Error(ErrorKind::InputError, "theta entries must be non-negative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::InputError, "theta must sum to 1");
}

Array one_hot(std::size_t k, std::size_t num_topics) {
  if (k >= num_topics) {
    throw Error(ErrorKind::InputError,
                "topic " + std::to_string(k) + " out of range for K=" + std::to_string(num_topics));
  }
  Array a(Shape{num_topics});
  a[k] = 1.0;
  return a;
}

namespace {

eqnet::SampleOptions sample_options(const Model& model, const GenerateOptions& opts) {
  eqnet::SampleOptions so;
  so.greedy = opts.greedy;
  so.temperature = opts.temperature;
  so.max_len = opts.max_len;
  so.prefix = model.vocabs.math.encode(opts.prefix);
  return so;
}

}  // namespace

std::vector<std::vector<std::string>> generate_from_topic(const Model& model, const Array& theta, std::size_t n,
                                                          const GenerateOptions& opts, std::uint64_t seed) {
  validate_theta(theta, model.config.topic.num_topics);
  const auto so = sample_options(model, opts);
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::derive(seed, 0x6e, i);
    out.push_back(model.vocabs.math.decode(eqnet::sample_equation(model.params, model.config.eq, theta, so, rng)));
  }
  return out;
}

std::vector<InterpolationStep> interpolate_topics(const Model& model, std::size_t k1, std::size_t k2,
                                                  std::size_t steps, const std::vector<std::string>& prefix,
                                                  std::size_t max_len) {
  if (steps < 2) throw Error(ErrorKind::InputError, "interpolation needs at least two steps");
  const std::size_t kk = model.config.topic.num_topics;
  const Array a = one_hot(k1, kk), b = one_hot(k2, kk);
  GenerateOptions opts;
  opts.greedy = true;
  opts.max_len = max_len;
  opts.prefix = prefix;
  std::vector<InterpolationStep> out;
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    Array theta(Shape{kk});
    for (std::size_t k = 0; k < kk; ++k) theta[k] = (1.0 - t) * a[k] + t * b[k];
    auto tokens = generate_from_topic(model, theta, 1, opts, 0).front();
    out.push_back({t, std::move(theta), std::move(tokens)});
  }
  return out;
}

std::vector<TopicScore> infer_equation_topic(const Model& model, const std::vector<std::string>& tokens,
                                             std::size_t top_n, std::size_t words_per_topic) {
  if (tokens.empty()) throw Error(ErrorKind::InputError, "equation has no tokens");
  const std::size_t kk = model.config.topic.num_topics;
  const auto ids = model.vocabs.math.encode(tokens);
  std::vector<TopicScore> scores;
  for (std::size_t k = 0; k < kk; ++k) {
    const auto s = eqnet::score(model.params, model.config.eq, ids, one_hot(k, kk));
    scores.push_back({k, s.total_logprob, {}});
  }
  std::stable_sort(scores.begin(), scores.end(),
                   [](const TopicScore& a, const TopicScore& b) { return a.log_likelihood > b.log_likelihood; });
  if (top_n > 0 && top_n < scores.size()) scores.resize(top_n);
  const Array beta = topicnet::beta_values(model.params);
  words_per_topic = std::min(words_per_topic, model.vocabs.words.size());
  for (auto& s : scores) s.top_words = topicnet::top_words(beta, s.topic, words_per_topic, model.vocabs.words);
  return scores;
}

std::vector<TopicScore> infer_equation_topic(const Model& model, const std::string& equation, std::size_t top_n,
                                             std::size_t words_per_topic) {
  return infer_equation_topic(model, mathtok::tokenize(equation), top_n, words_per_topic);
}

ContextGeneration generate_from_context(const Model& model, const std::string& context, std::size_t n,
                                        const GenerateOptions& opts, std::uint64_t seed) {
  ContextGeneration g;
  const auto bow = corpus::preprocess_context(corpus::split_sentences(context), model.vocabs.words);
  g.empty_context = bow.empty();
  g.theta = topicnet::posterior_mean(model.params, model.config.topic, bow).theta;
  g.equations = generate_from_topic(model, g.theta, n, opts, seed);
  return g;
}

nlohmann::json to_json(const std::vector<TopicScore>& ranking) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : ranking) {
    arr.push_back({{"topic", s.topic}, {"log_likelihood", s.log_likelihood}, {"top_words", s.top_words}});
  }
  return nlohmann::json{{"ranking", arr}};
}

}  // namespace topiceq::apps
