#include "topiceq/align.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>

#include "topiceq/error.hpp"

namespace topiceq::align {

void init_params(ParamStore& store, const AlignConfig& cfg, std::size_t num_topics, Rng& rng) {
  const std::size_t m = cfg.num_phrases, l = cfg.num_symbols;
  if (!cfg.topic_aware) {
    store.add_glorot("align.A", m, l, rng);
    return;
  }
  const std::size_t f = cfg.factors ? cfg.factors : num_topics;
  store.add_glorot("align.Wa", m, f, rng);
  store.add_glorot("align.Wb", f, num_topics, rng);
  store.add_glorot("align.Wc", f, l, rng);
}

std::vector<std::string> sentence_words(const std::string& sentence) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : sentence) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalpha(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocab make_phrase_vocab(const std::vector<std::string>& phrases) {
  std::vector<std::string> entries;
  for (const auto& p : phrases) {
    auto words = sentence_words(p);
    if (words.empty()) continue;
    if (words.size() > kMaxPhraseWords) {
      throw Error(ErrorKind::InputError, "phrase '" + p + "' has more than four words");
    }
    std::string joined;
    for (const auto& w : words) joined += (joined.empty() ? "" : " ") + w;
    entries.push_back(std::move(joined));
  }
  return Vocab(std::move(entries));
}

Vocab load_phrase_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot read phrase list " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return make_phrase_vocab(lines);
}

Vocab build_symbol_vocab(const std::vector<corpus::ContextEqPair>& pairs, std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& p : pairs)
    for (const auto& t : p.equation) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size) ranked.resize(max_size);
  if (ranked.empty()) throw Error(ErrorKind::EmptyVocab, "no equation symbols found");
  std::vector<std::string> entries;
  for (auto& [t, c] : ranked) entries.push_back(t);
  return Vocab(std::move(entries));
}

namespace {

void match_sentence(const std::string& sentence, const Vocab& phrases, std::vector<std::size_t>& out) {
  const auto words = sentence_words(sentence);
  std::size_t i = 0;
  while (i < words.size()) {
    std::size_t matched = 0, id = 0;
    std::string candidate;
    for (std::size_t n = 1; n <= kMaxPhraseWords && i + n <= words.size(); ++n) {
      candidate += (n > 1 ? " " : "") + words[i + n - 1];
      if (auto hit = phrases.find(candidate)) {
        matched = n;
        id = *hit;
      }
    }
    if (matched) {
      out.push_back(id);
      i += matched;
    } else {
      ++i;
    }
  }
}

}  // namespace

std::vector<std::size_t> extract_phrase_occurrences(const corpus::ContextEqPair& pair, const Vocab& phrases) {
  std::vector<std::size_t> out;
  if (phrases.empty()) return out;
  if (!pair.before.empty()) match_sentence(pair.before.back(), phrases, out);
  if (!pair.after.empty()) match_sentence(pair.after.front(), phrases, out);
  return out;
}

Array symbol_bag(const std::vector<std::string>& equation, const Vocab& symbols) {
  Array s(Shape{symbols.size()});
  for (const auto& t : equation)
    if (auto id = symbols.find(t)) s[*id] += 1.0;
  return s;
}

Array symbol_one_hot(const std::string& symbol, const Vocab& symbols) {
  auto id = symbols.find(symbol);
  if (!id) throw Error(ErrorKind::UnknownSymbol, "symbol '" + symbol + "' is not in the symbol vocabulary");
  Array s(Shape{symbols.size()});
  s[*id] = 1.0;
  return s;
}

Array alignment_matrix(const ParamStore& store, const AlignConfig& cfg, const Array& theta) {
  if (!cfg.topic_aware) return store["align.A"].value;
  const Array& wa = store["align.Wa"].value;
  const Array& wb = store["align.Wb"].value;
  const Array& wc = store["align.Wc"].value;
  const std::size_t m = wa.dim(0), f = wa.dim(1), k = wb.dim(1), l = wc.dim(1);
  if (theta.rank() != 1 || theta.size() != k) throw Error(ErrorKind::ShapeError, "theta does not match W_b columns");
  std::vector<double> d(f, 0.0);
  for (std::size_t i = 0; i < f; ++i)
    for (std::size_t j = 0; j < k; ++j) d[i] += wb.at(i, j) * theta[j];
  Array a(Shape{m, l});
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t i = 0; i < f; ++i) {
      const double coef = wa.at(r, i) * d[i];
      for (std::size_t c = 0; c < l; ++c) a.data()[r * l + c] += coef * wc.at(i, c);
    }
  return a;
}

Var phrase_logits(Tape& tape, const AlignConfig& cfg, Var s, Var theta) {
  if (!cfg.topic_aware) return tape.affine(tape.param("align.A"), s);
  Var weights = tape.affine(tape.param("align.Wb"), theta);
  Var proj = tape.affine(tape.param("align.Wc"), s);
  return tape.affine(tape.param("align.Wa"), tape.mul(weights, proj));
}

Var phrase_log_likelihood(Tape& tape, const AlignConfig& cfg, std::size_t phrase, Var s, Var theta) {
  return tape.scale(tape.categorical_nll(phrase_logits(tape, cfg, s, theta), phrase), -1.0);
}

Array phrase_distribution(const ParamStore& store, const AlignConfig& cfg, const Array& s, const Array& theta) {
  Tape tape(store);
  return tape.value(tape.softmax(phrase_logits(tape, cfg, tape.constant(s), tape.constant(theta))));
}

std::vector<std::pair<std::string, double>> predict_phrases(const ParamStore& store, const AlignConfig& cfg,
                                                            const Vocab& phrases, const Vocab& symbols,
                                                            const std::string& symbol, const Array& theta,
                                                            std::size_t top_n) {
  const Array s = symbol_one_hot(symbol, symbols);
  const Array p = phrase_distribution(store, cfg, s, theta);
  if (p.size() != phrases.size()) throw Error(ErrorKind::ShapeError, "phrase vocabulary does not match model");
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (p[a] != p[b]) return p[a] > p[b];
    return phrases.lookup(a) < phrases.lookup(b);
  });
  top_n = std::min(top_n, order.size());
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < top_n; ++i) out.emplace_back(phrases.lookup(order[i]), p[order[i]]);
  return out;
}

}  // namespace topiceq::align
