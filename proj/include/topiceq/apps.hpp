#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "topiceq/array.hpp"
#include "topiceq/model.hpp"

namespace topiceq::apps {

/// Throws Error(InputError) unless theta has K non-negative entries summing to 1 within 1e-9.
void validate_theta(const Array& theta, std::size_t num_topics);
Array one_hot(std::size_t k, std::size_t num_topics);

struct GenerateOptions {
  bool greedy = false;
  double temperature = 1.0;
  std::size_t max_len = 200;
  std::vector<std::string> prefix;  // math tokens force-fed after <START>
};

/// Sample i draws from its own stream derived from (seed, i).
std::vector<std::vector<std::string>> generate_from_topic(const Model& model, const Array& theta, std::size_t n,
                                                          const GenerateOptions& opts, std::uint64_t seed);

struct InterpolationStep {
  double t = 0.0;
  Array theta;
  std::vector<std::string> tokens;
};

/// Greedy decodes along theta(t) = (1 - t) e_k1 + t e_k2 at `steps` evenly spaced t in [0, 1].
std::vector<InterpolationStep> interpolate_topics(const Model& model, std::size_t k1, std::size_t k2,
                                                  std::size_t steps, const std::vector<std::string>& prefix,
                                                  std::size_t max_len = 200);

struct TopicScore {
  std::size_t topic = 0;
  double log_likelihood = 0.0;
  std::vector<std::string> top_words;
};

/// Every topic scored by the equation's log-likelihood under theta = e_k,
/// descending, ties to the smaller id; the first top_n are returned (all when 0).
std::vector<TopicScore> infer_equation_topic(const Model& model, const std::string& equation, std::size_t top_n = 0,
                                             std::size_t words_per_topic = 5);
std::vector<TopicScore> infer_equation_topic(const Model& model, const std::vector<std::string>& tokens,
                                             std::size_t top_n = 0, std::size_t words_per_topic = 5);

struct ContextGeneration {
  Array theta;
  bool empty_context = false;  // no in-vocabulary words; theta comes from the bias path
  std::vector<std::vector<std::string>> equations;
};

ContextGeneration generate_from_context(const Model& model, const std::string& context, std::size_t n,
                                        const GenerateOptions& opts, std::uint64_t seed);

nlohmann::json to_json(const std::vector<TopicScore>& ranking);

}  // namespace topiceq::apps
