#include "topiceq/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "topiceq/align.hpp"
#include "topiceq/eqnet.hpp"
#include "topiceq/error.hpp"
#include "topiceq/mathtok.hpp"
#include "topiceq/rng.hpp"
#include "topiceq/topicnet.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace topiceq {

using nlohmann::json;

Vocabs build_vocabs(const std::vector<corpus::ContextEqPair>& pairs, const VocabOptions& opts, Vocab phrases) {
  Vocabs v;
  std::vector<std::vector<std::string>> contexts;
  contexts.reserve(pairs.size());
  for (const auto& p : pairs) contexts.push_back(corpus::context_words(p));
  v.words = corpus::build_word_vocab(contexts, opts.min_doc_freq, opts.max_words);
  if (opts.math) {
    std::vector<std::vector<std::string>> eqs;
    eqs.reserve(pairs.size());
    for (const auto& p : pairs) eqs.push_back(p.equation);
    v.math = mathtok::build_token_vocab(eqs, opts.max_math);
  }
  if (opts.symbols) v.symbols = align::build_symbol_vocab(pairs, opts.max_symbols);
  v.phrases = std::move(phrases);
  return v;
}

Model Model::create(ModelConfig config, Vocabs vocabs, std::uint64_t seed) {
  config.topic.vocab_size = vocabs.words.size();
  config.eq.num_topics = config.topic.num_topics;
  if (config.eq.variant != EqVariant::None) config.eq.vocab_size = vocabs.math.size();
  if (config.align.enabled) {
    config.align.num_phrases = vocabs.phrases.size();
    config.align.num_symbols = vocabs.symbols.size();
    if (config.align.factors == 0) config.align.factors = config.topic.num_topics;
  }
  config.validate();
  Model m{config, std::move(vocabs), {}};
  Rng rng = Rng::derive(seed, 0x1417);
  topicnet::init_params(m.params, config.topic, rng);
  eqnet::init_params(m.params, config.eq, rng);
  if (config.align.enabled) align::init_params(m.params, config.align, config.topic.num_topics, rng);
  return m;
}

std::string Model::config_json() const {
  json j;
  j["family"] = family();
  j["model"] = config;
  j["vocabs"] = {{"words", vocabs.words.entries()},
                 {"math", vocabs.math.entries()},
                 {"phrases", vocabs.phrases.entries()},
                 {"symbols", vocabs.symbols.entries()}};
  return j.dump();
}

Model Model::from_checkpoint_parts(const std::string& config_json, ParamStore params) {
  json j;
  try {
    j = json::parse(config_json);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InputError, std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  Model m;
  try {
    m.config = j.at("model").get<ModelConfig>();
    const auto& v = j.at("vocabs");
    m.vocabs.words = Vocab(v.at("words").get<std::vector<std::string>>());
    m.vocabs.math = Vocab(v.at("math").get<std::vector<std::string>>());
    m.vocabs.phrases = Vocab(v.at("phrases").get<std::vector<std::string>>());
    m.vocabs.symbols = Vocab(v.at("symbols").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InputError, std::string("checkpoint config is incomplete: ") + e.what());
  }
  m.config.validate();
  if (m.family() != j.value("family", std::string())) {
    throw Error(ErrorKind::InputError, "checkpoint family marker does not match its config");
  }
  m.params = std::move(params);
  return m;
}

void Model::save(const std::filesystem::path& path) const { save_checkpoint(path, params, config_json()); }

Model Model::load(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  return from_checkpoint_parts(ck.config_json, std::move(ck.params));
}

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorKind::TruncatedFile, "checkpoint ends unexpectedly");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ParamStore& store, const std::string& config_json) {
  std::string out = "TEQ1";
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(config_json.size()));
  out += config_json;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (const Parameter& p : store) {
    if (p.name.size() > 0xFFFF) throw Error(ErrorKind::InputError, "parameter name too long");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(p.name.size()));
    out += p.name;
    put<std::uint8_t>(out, 0);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double x : p.value.data()) put<double>(out, x);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4) throw Error(ErrorKind::TruncatedFile, "checkpoint shorter than its magic");
  if (bytes.compare(0, 4, "TEQ1") != 0) throw Error(ErrorKind::BadMagic, "not a TEQ1 checkpoint");
  Reader r(bytes);
  r.take(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::VersionMismatch, "checkpoint version " + std::to_string(version) + " is not supported");
  }
  Checkpoint ck;
  ck.config_json = r.take(r.get<std::uint32_t>());
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = r.take(r.get<std::uint16_t>());
    const auto dtype = r.get<std::uint8_t>();
    if (dtype != 0) throw Error(ErrorKind::InputError, "tensor '" + name + "' has unsupported dtype");
    const auto rank = r.get<std::uint8_t>();
    Shape shape;
    std::size_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      shape.push_back(r.get<std::uint32_t>());
      n *= shape.back();
    }
    std::vector<double> data(n);
    for (double& x : data) x = r.get<double>();
    ck.params.add(std::move(name), Array(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw Error(ErrorKind::InputError, "trailing bytes after checkpoint tensors");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store, const std::string& config_json) {
  const std::string bytes = encode_checkpoint(store, config_json);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoError, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace topiceq
