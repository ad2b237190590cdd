#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "topiceq/corpus.hpp"
#include "topiceq/model.hpp"
#include "topiceq/trainer.hpp"

namespace fixtures {

inline std::filesystem::path data_dir() { return TOPICEQ_TEST_DATA; }

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("topiceq-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<topiceq::corpus::ContextEqPair> small_corpus(std::size_t n = 60, std::uint64_t seed = 2) {
  auto spec = topiceq::corpus::equation_preset(n, seed);
  return topiceq::corpus::generate_synthetic(spec);
}

// A few hundred parameters; fast enough for gradient checks and decoding tests.
inline topiceq::Model tiny_model(topiceq::EqVariant variant, std::uint64_t seed = 7,
                                 const std::vector<topiceq::corpus::ContextEqPair>& pairs = small_corpus()) {
  topiceq::ModelConfig cfg;
  cfg.topic.num_topics = 3;
  cfg.topic.hidden = 6;
  cfg.eq.variant = variant;
  cfg.eq.width = 5;
  cfg.eq.embed_dim = 4;
  cfg.eq.dropout = 0.2;
  topiceq::VocabOptions vo;
  vo.max_words = 30;
  vo.max_math = 30;
  vo.math = variant != topiceq::EqVariant::None;
  return topiceq::Model::create(cfg, topiceq::build_vocabs(pairs, vo), seed);
}

}  // namespace fixtures
