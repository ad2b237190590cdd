#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "topiceq/config.hpp"
#include "topiceq/corpus.hpp"
#include "topiceq/params.hpp"
#include "topiceq/vocab.hpp"

namespace topiceq {

struct Vocabs {
  Vocab words;
  Vocab math;     // empty for context-only and alignment models
  Vocab phrases;  // alignment models only
  Vocab symbols;  // alignment models only
};

struct VocabOptions {
  std::size_t min_doc_freq = 2;
  std::size_t max_words = 2000;
  std::size_t max_math = 300;
  std::size_t max_symbols = 200;
  bool math = true;     // equation-model vocabulary
  bool symbols = false; // alignment symbol vocabulary
};

/// Word, math and symbol vocabularies from (training) pairs. `phrases` is
/// copied through unchanged.
Vocabs build_vocabs(const std::vector<corpus::ContextEqPair>& pairs, const VocabOptions& opts, Vocab phrases = {});

/// Parameters plus everything needed to interpret them.
struct Model {
  ModelConfig config;
  Vocabs vocabs;
  ParamStore params;

  /// Sizes in `config` are overwritten from the vocabularies, then every
  /// parameter block is initialised from a stream derived from `seed`.
  static Model create(ModelConfig config, Vocabs vocabs, std::uint64_t seed);

  /// "topiceq" or "align".
  std::string family() const { return config.align.enabled ? "align" : "topiceq"; }

  /// Config JSON as embedded in checkpoints (model config, family marker, vocabularies).
  std::string config_json() const;
  static Model from_checkpoint_parts(const std::string& config_json, ParamStore params);

  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);
};

// --- Checkpoint container ------------------------------------------------
//
// Little-endian: "TEQ1", u32 version (1), u32 config length, config bytes,
// u32 tensor count, then per tensor u16 name length, name, u8 dtype (0 = f64),
// u8 rank, u32 dims[rank], row-major f64 payload.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string config_json;
  ParamStore params;
};

std::string encode_checkpoint(const ParamStore& store, const std::string& config_json);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const ParamStore& store, const std::string& config_json);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace topiceq
