#include "topiceq/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "topiceq/error.hpp"
#include "topiceq/mathtok.hpp"
#include "topiceq/rng.hpp"

namespace topiceq::corpus {

extern const char* const kStopwordsResource;  // generated from resources/stopwords.txt

namespace {

using json = nlohmann::json;

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

std::string strip_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\\' && i + 1 < text.size()) {
      out.push_back(c);
      out.push_back(text[++i]);
      continue;
    }
    if (c == '%') {
      while (i < text.size() && text[i] != '\n') ++i;
      out.push_back('\n');
      continue;
    }
    out.push_back(c);
  }
  return out;
}

bool escaped_at(std::string_view text, std::size_t pos) {
  std::size_t slashes = 0;
  while (pos > slashes && text[pos - 1 - slashes] == '\\') ++slashes;
  return slashes % 2 == 1;
}

/// Removes `$...$` and `\(...\)` spans.
std::string remove_inline_math(std::string_view text) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '$' && !escaped_at(text, i)) {
      std::size_t j = i + 1;
      while (j < text.size() && !(text[j] == '$' && !escaped_at(text, j))) ++j;
      out.push_back(' ');
      i = j < text.size() ? j + 1 : j;
      continue;
    }
    if (text.compare(i, 2, "\\(") == 0 && !escaped_at(text, i)) {
      const std::size_t j = text.find("\\)", i + 2);
      out.push_back(' ');
      i = j == std::string_view::npos ? text.size() : j + 2;
      continue;
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

/// Drops reference-like commands with their argument.
std::string remove_references(std::string_view text) {
  static const std::vector<std::string_view> kCommands = {"\\label{", "\\cite{", "\\ref{", "\\eqref{", "\\citep{",
                                                           "\\citet{"};
  std::string out(text);
  for (auto cmd : kCommands) {
    std::size_t pos = 0;
    while ((pos = out.find(cmd, pos)) != std::string::npos) {
      const std::size_t close = out.find('}', pos + cmd.size());
      out.erase(pos, close == std::string::npos ? std::string::npos : close + 1 - pos);
    }
  }
  return out;
}

/// Removes command names and grouping braces, leaving prose.
std::string clean_sentence(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '\\') {
      if (i + 1 < s.size() && is_alpha(s[i + 1])) {
        while (i + 1 < s.size() && is_alpha(s[i + 1])) ++i;
      } else if (i + 1 < s.size()) {
        ++i;
      }
      out.push_back(' ');
      continue;
    }
    if (c == '{' || c == '}' || c == '~') {
      out.push_back(' ');
      continue;
    }
    out.push_back(c);
  }
  return collapse_whitespace(out);
}

struct DisplaySpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // one past the closing delimiter
  std::string content;
};

std::vector<DisplaySpan> find_display_math(std::string_view text) {
  struct Delim {
    std::string_view open, close;
  };
  static const Delim kDelims[] = {{"\\[", "\\]"}, {"$$", "$$"}, {"\\begin{equation}", "\\end{equation}"}};
  std::vector<DisplaySpan> spans;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t best = std::string_view::npos;
    const Delim* which = nullptr;
    for (const auto& d : kDelims) {
      std::size_t p = pos;
      while ((p = text.find(d.open, p)) != std::string_view::npos && escaped_at(text, p)) ++p;
      if (p < best) {
        best = p;
        which = &d;
      }
    }
    if (!which) break;
    const std::size_t content_begin = best + which->open.size();
    std::size_t close = content_begin;
    while ((close = text.find(which->close, close)) != std::string_view::npos && escaped_at(text, close)) ++close;
    if (close == std::string_view::npos) break;
    spans.push_back({best, close + which->close.size(), std::string(text.substr(content_begin, close - content_begin))});
    pos = close + which->close.size();
  }
  return spans;
}

std::string document_body(std::string_view doc) {
  const std::string_view begin_doc = "\\begin{document}";
  const std::size_t b = doc.find(begin_doc);
  if (b == std::string_view::npos) return std::string(doc);
  const std::size_t start = b + begin_doc.size();
  const std::size_t e = doc.find("\\end{document}", start);
  return std::string(doc.substr(start, e == std::string_view::npos ? std::string_view::npos : e - start));
}

std::vector<std::string> clean_sentences(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& s : raw) out.push_back(clean_sentence(s));
  return out;
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (is_alpha(c)) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    std::string s = collapse_whitespace(text.substr(start, end - start));
    if (!s.empty()) out.push_back(std::move(s));
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 >= text.size() || !is_space(text[i + 1])) continue;
    std::size_t j = i + 1;
    while (j < text.size() && is_space(text[j])) ++j;
    if (j < text.size() && (is_upper(text[j]) || text[j] == '\\')) {
      emit(i + 1);
      start = j;
      i = j - 1;
    }
  }
  emit(text.size());
  return out;
}

std::vector<ContextEqPair> extract_pairs(std::string_view document) {
  const std::string body = strip_comments(document_body(document));
  const auto spans = find_display_math(body);
  if (spans.empty()) return {};

  // Text chunks around the equations: chunk i precedes equation i.
  std::vector<std::string> chunks;
  std::size_t prev = 0;
  for (const auto& s : spans) {
    chunks.push_back(remove_references(remove_inline_math(std::string_view(body).substr(prev, s.begin - prev))));
    prev = s.end;
  }
  chunks.push_back(remove_references(remove_inline_math(std::string_view(body).substr(prev))));

  std::vector<ContextEqPair> out;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    std::string eq = remove_references(spans[i].content);
    if (eq.find("\\\\") != std::string::npos) continue;  // multi-line
    eq = collapse_whitespace(eq);

    std::string before_text, after_text;
    for (std::size_t c = 0; c <= i; ++c) before_text += chunks[c] + " ";
    for (std::size_t c = i + 1; c < chunks.size(); ++c) after_text += chunks[c] + " ";
    const auto before = split_sentences(before_text);
    const auto after = split_sentences(after_text);
    if (before.size() < kContextSentences || after.size() < kContextSentences) continue;

    std::vector<std::string> tokens;
    try {
      tokens = mathtok::tokenize(eq);
    } catch (const Error&) {
      continue;
    }
    if (tokens.size() < kMinEquationTokens || tokens.size() > kMaxEquationTokens) continue;

    ContextEqPair pair;
    pair.before = clean_sentences({before.end() - kContextSentences, before.end()});
    pair.after = clean_sentences({after.begin(), after.begin() + kContextSentences});
    pair.equation = std::move(tokens);
    out.push_back(std::move(pair));
  }
  return out;
}

const std::vector<std::string>& stopwords() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> w;
    std::string_view src = kStopwordsResource;
    std::size_t pos = 0;
    while (pos < src.size()) {
      std::size_t nl = src.find('\n', pos);
      if (nl == std::string_view::npos) nl = src.size();
      std::string line = collapse_whitespace(src.substr(pos, nl - pos));
      if (!line.empty()) w.push_back(std::move(line));
      pos = nl + 1;
    }
    return w;
  }();
  return words;
}

bool is_stopword(std::string_view word) {
  static const std::unordered_set<std::string_view> set(stopwords().begin(), stopwords().end());
  return set.contains(word);
}

std::vector<std::string> context_words(const std::vector<std::string>& sentences) {
  std::vector<std::string> out;
  for (const auto& s : sentences) {
    for (auto& w : split_words(s)) {
      if (w.size() < 2 || is_stopword(w)) continue;
      out.push_back(std::move(w));
    }
  }
  return out;
}

std::vector<std::string> context_words(const ContextEqPair& pair) {
  std::vector<std::string> all = pair.before;
  all.insert(all.end(), pair.after.begin(), pair.after.end());
  return context_words(all);
}

SparseBow preprocess_context(const std::vector<std::string>& sentences, const Vocab& vocab) {
  std::map<std::size_t, std::size_t> counts;
  for (const auto& w : context_words(sentences)) {
    if (auto id = vocab.find(w)) ++counts[*id];
  }
  return SparseBow(counts.begin(), counts.end());
}

SparseBow preprocess_context(const ContextEqPair& pair, const Vocab& vocab) {
  std::vector<std::string> all = pair.before;
  all.insert(all.end(), pair.after.begin(), pair.after.end());
  return preprocess_context(all, vocab);
}

Vocab build_word_vocab(const std::vector<std::vector<std::string>>& contexts, std::size_t min_doc_freq,
                       std::size_t max_size) {
  if (min_doc_freq < 1) throw Error(ErrorKind::InputError, "min_doc_freq must be at least 1");
  std::map<std::string, std::size_t> doc_freq;
  for (const auto& words : contexts) {
    std::set<std::string_view> seen(words.begin(), words.end());
    for (auto w : seen) ++doc_freq[std::string(w)];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [w, df] : doc_freq)
    if (df >= min_doc_freq) kept.emplace_back(w, df);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (kept.size() > max_size) kept.resize(max_size);
  if (kept.empty()) throw Error(ErrorKind::EmptyVocab, "no word meets the document-frequency threshold");
  std::vector<std::string> entries;
  for (auto& [w, df] : kept) entries.push_back(w);
  return Vocab(std::move(entries));
}

CorpusSplit split_corpus(std::vector<ContextEqPair> pairs, std::array<double, 3> ratios, std::uint64_t seed) {
  if (pairs.size() < 3) throw Error(ErrorKind::TooSmall, "need at least 3 pairs to split");
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] <= 0 || ratios[1] <= 0 || ratios[2] <= 0 || std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorKind::InputError, "split ratios must be positive and sum to 1");
  }
  Rng rng(seed);
  rng.shuffle(pairs);
  const std::size_t n = pairs.size();
  const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  const auto n_valid = std::min(n - n_train, static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n))));
  CorpusSplit split;
  auto it = std::make_move_iterator(pairs.begin());
  split.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  split.valid.assign(it + static_cast<std::ptrdiff_t>(n_train), it + static_cast<std::ptrdiff_t>(n_train + n_valid));
  split.test.assign(it + static_cast<std::ptrdiff_t>(n_train + n_valid), std::make_move_iterator(pairs.end()));
  return split;
}

ContextEqPair shuffle_equation_tokens(const ContextEqPair& pair, std::uint64_t seed) {
  ContextEqPair out = pair;
  Rng rng(seed);
  rng.shuffle(out.equation);
  return out;
}

std::vector<std::string> TokenGrammar::token_set() const {
  std::set<std::string> s(joiners.begin(), joiners.end());
  s.insert(variables.begin(), variables.end());
  for (const auto& c : clauses)
    for (const auto& t : c)
      if (t != "$v") s.insert(t);
  return {s.begin(), s.end()};
}

bool TokenGrammar::accepts(const std::vector<std::string>& tokens) const {
  const std::size_t n = tokens.size();
  auto clause_at = [&](const std::vector<std::string>& c, std::size_t i) {
    if (i + c.size() > n) return false;
    for (std::size_t j = 0; j < c.size(); ++j) {
      const std::string& t = tokens[i + j];
      if (c[j] == "$v" ? std::find(variables.begin(), variables.end(), t) == variables.end() : c[j] != t) return false;
    }
    return true;
  };
  // reach[i]: a clause may start at position i.
  std::vector<char> reach(n + 1, 0);
  if (n > 0) reach[0] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (!reach[i]) continue;
    for (const auto& c : clauses) {
      if (c.empty() || !clause_at(c, i)) continue;
      const std::size_t e = i + c.size();
      if (e == n) return true;
      if (std::find(joiners.begin(), joiners.end(), tokens[e]) != joiners.end()) reach[e + 1] = 1;
    }
  }
  return false;
}

void SyntheticSpec::validate() const {
  if (topics.empty()) throw Error(ErrorKind::InputError, "synthetic spec needs at least one topic");
  if (min_equation_length == 0 || min_equation_length > max_equation_length) {
    throw Error(ErrorKind::InputError, "bad equation length range");
  }
  for (std::size_t k = 0; k < topics.size(); ++k) {
    const auto& t = topics[k];
    double total = 0.0;
    for (const auto& [w, p] : t.words) {
      if (p < 0) throw Error(ErrorKind::InputError, "negative word probability in topic " + std::to_string(k));
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw Error(ErrorKind::InputError, "word distribution of topic " + std::to_string(k) + " sums to " +
                                             std::to_string(total));
    }
    if (t.grammar.clauses.empty()) throw Error(ErrorKind::InputError, "topic " + std::to_string(k) + " has no clauses");
    for (const auto& c : t.grammar.clauses) {
      if (c.empty()) throw Error(ErrorKind::InputError, "empty clause");
      if (std::find(c.begin(), c.end(), "$v") != c.end() && t.grammar.variables.empty()) {
        throw Error(ErrorKind::InputError, "clause uses $v but topic has no variables");
      }
    }
  }
}

namespace {

std::vector<std::string> sample_equation_from(const TokenGrammar& g, std::size_t lo, std::size_t hi, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const std::size_t target = lo + static_cast<std::size_t>(rng.uniform_int(hi - lo + 1));
    std::vector<std::string> eq;
    while (eq.size() < target) {
      if (!eq.empty() && !g.joiners.empty()) eq.push_back(g.joiners[rng.uniform_int(g.joiners.size())]);
      const auto& clause = g.clauses[rng.uniform_int(g.clauses.size())];
      for (const auto& t : clause) {
        eq.push_back(t == "$v" ? g.variables[rng.uniform_int(g.variables.size())] : t);
      }
    }
    if (eq.size() <= hi) return eq;
  }
  throw Error(ErrorKind::InputError, "grammar cannot produce an equation inside the length range");
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace

std::vector<ContextEqPair> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t k_topics = spec.topics.size();
  constexpr std::size_t kSentences = 2 * kContextSentences;

  // Word tables in map order for a deterministic categorical draw.
  std::vector<std::vector<std::string>> words(k_topics);
  std::vector<std::vector<double>> probs(k_topics);
  for (std::size_t k = 0; k < k_topics; ++k) {
    for (const auto& [w, p] : spec.topics[k].words) {
      words[k].push_back(w);
      probs[k].push_back(p);
    }
  }

  std::vector<ContextEqPair> out;
  out.reserve(spec.num_docs);
  for (std::size_t d = 0; d < spec.num_docs; ++d) {
    const auto k = static_cast<std::size_t>(rng.uniform_int(k_topics));
    const auto& topic = spec.topics[k];
    std::vector<std::vector<std::string>> sentence_words(kSentences);
    for (std::size_t n = 0; n < spec.context_length; ++n) {
      sentence_words[n * kSentences / std::max<std::size_t>(spec.context_length, 1)].push_back(
          words[k][rng.categorical(probs[k])]);
    }
    ContextEqPair pair;
    pair.topic = static_cast<int>(k);
    pair.equation = sample_equation_from(topic.grammar, spec.min_equation_length, spec.max_equation_length, rng);

    // Planted symbol descriptions go into the immediate context.
    std::vector<std::string> seen;
    for (const auto& tok : pair.equation) {
      if (std::find(seen.begin(), seen.end(), tok) != seen.end()) continue;
      seen.push_back(tok);
      auto it = topic.phrases.find(tok);
      if (it == topic.phrases.end()) continue;
      auto& target = rng.uniform() < 0.5 ? sentence_words[kContextSentences - 1] : sentence_words[kContextSentences];
      target.push_back(it->second);
    }

    for (std::size_t s = 0; s < kSentences; ++s) {
      std::string text;
      for (const auto& w : sentence_words[s]) {
        if (!text.empty()) text.push_back(' ');
        text += w;
      }
      text = capitalize(text) + ".";
      (s < kContextSentences ? pair.before : pair.after).push_back(std::move(text));
    }
    out.push_back(std::move(pair));
  }
  return out;
}

std::vector<std::string> rename_variables(const std::vector<std::string>& equation, const TokenGrammar& grammar,
                                          std::uint64_t seed) {
  std::vector<std::string> pool = grammar.variables;
  if (pool.size() < 2) return equation;
  Rng rng(seed);
  rng.shuffle(pool);
  std::map<std::string, std::string> rename;
  for (std::size_t i = 0; i < pool.size(); ++i) rename[pool[i]] = pool[(i + 1) % pool.size()];
  std::vector<std::string> out;
  out.reserve(equation.size());
  for (const auto& t : equation) {
    auto it = rename.find(t);
    out.push_back(it == rename.end() ? t : it->second);
  }
  return out;
}

namespace {

std::map<std::string, double> zipf_distribution(const std::vector<std::string>& specific, double specific_mass,
                                                const std::vector<std::string>& shared) {
  std::map<std::string, double> dist;
  double norm = 0.0;
  for (std::size_t i = 0; i < specific.size(); ++i) norm += 1.0 / static_cast<double>(i + 1);
  for (std::size_t i = 0; i < specific.size(); ++i) {
    dist[specific[i]] += specific_mass / (static_cast<double>(i + 1) * norm);
  }
  for (const auto& w : shared) dist[w] += (1.0 - specific_mass) / static_cast<double>(shared.size());
  // Renormalize away rounding so validate() holds to 1e-9.
  double total = 0.0;
  for (auto& [w, p] : dist) total += p;
  for (auto& [w, p] : dist) p /= total;
  return dist;
}

}  // namespace

SyntheticSpec equation_preset(std::size_t num_docs, std::uint64_t seed) {
  const std::vector<std::string> shared = {"model", "result", "value", "case", "term", "form", "order", "method"};
  SyntheticSpec spec;
  spec.num_docs = num_docs;
  spec.seed = seed;
  spec.context_length = 30;
  spec.min_equation_length = 12;
  spec.max_equation_length = 24;

  SyntheticTopic probability;
  probability.words = zipf_distribution({"random", "probability", "distribution", "variance", "expectation",
                                         "sample", "measure", "process", "independent", "density", "estimator",
                                         "likelihood"},
                                        1.0, shared);
  probability.grammar.clauses = {
      {"\\mathbb", "{", "E", "}", "[", "$v", "]"},
      {"\\mathbb", "{", "P", "}", "(", "$v", "\\mid", "$v", ")"},
      {"p", "(", "$v", "\\mid", "\\theta", ")"},
      {"\\sum", "_", "{", "i", "}", "$v", "_", "{", "i", "}"},
  };
  probability.grammar.variables = {"X", "Y", "Z"};
  probability.grammar.joiners = {"=", "+", "\\leq"};

  SyntheticTopic relativity;
  relativity.words = zipf_distribution({"metric", "gravity", "black", "hole", "tensor", "curvature", "spacetime",
                                        "einstein", "geodesic", "horizon", "schwarzschild", "manifold"},
                                       1.0, shared);
  relativity.grammar.clauses = {
      {"T", "_", "{", "$v", "$v", "}"},
      {"g", "^", "{", "$v", "$v", "}"},
      {"\\partial", "_", "{", "$v", "}", "\\phi"},
      {"R", "_", "{", "$v", "$v", "}", "^", "{", "$v", "}"},
  };
  relativity.grammar.variables = {"\\mu", "\\nu", "\\alpha", "\\beta"};
  relativity.grammar.joiners = {"=", "+", "-"};

  SyntheticTopic optimization;
  optimization.words = zipf_distribution({"optimization", "gradient", "convex", "objective", "constraint", "solver",
                                          "minimize", "algorithm", "iteration", "regularization", "loss",
                                          "convergence"},
                                         1.0, shared);
  optimization.grammar.clauses = {
      {"\\min", "_", "{", "$v", "}"},
      {"\\|", "$v", "\\|", "_", "{", "2", "}", "^", "{", "2", "}"},
      {"\\lambda", "\\|", "$v", "\\|", "_", "{", "1", "}"},
      {"\\nabla", "f", "(", "$v", ")"},
  };
  optimization.grammar.variables = {"x", "w", "z"};
  optimization.grammar.joiners = {"=", "+", "\\leq"};

  spec.topics = {probability, relativity, optimization};
  return spec;
}

SyntheticSpec alignment_preset(std::size_t num_docs, std::uint64_t seed) {
  const std::vector<std::string> shared = {"model", "result", "value", "case", "term", "form"};
  SyntheticSpec spec;
  spec.num_docs = num_docs;
  spec.seed = seed;
  spec.context_length = 20;
  spec.min_equation_length = 20;
  spec.max_equation_length = 40;

  TokenGrammar common;
  common.clauses = {
      {"E", "(", "x", ")"},
      {"\\sigma", "^", "{", "2", "}"},
      {"p", "_", "{", "i", "}"},
      {"G", "(", "x", ")"},
      {"\\frac", "{", "1", "}", "{", "2", "}"},
  };
  common.joiners = {"=", "+"};

  SyntheticTopic probability;
  probability.words = zipf_distribution({"random", "probability", "distribution", "variance", "sample", "measure",
                                         "process", "independent", "density", "estimator"},
                                        0.9, shared);
  probability.grammar = common;
  probability.phrases = {{"E", "expectation"}, {"\\sigma", "standard deviation"}, {"p", "probability density"},
                         {"G", "generating function"}};

  SyntheticTopic physics;
  physics.words = zipf_distribution({"electron", "spin", "magnetic", "charge", "quantum", "field", "energy",
                                     "particle", "photon", "lattice"},
                                    0.9, shared);
  physics.grammar = common;
  physics.phrases = {{"E", "electric field"}, {"\\sigma", "conductivity"}, {"p", "momentum"},
                     {"G", "green function"}};

  SyntheticTopic graphs;
  graphs.words = zipf_distribution({"graph", "vertex", "vertices", "edges", "node", "tree", "path", "degree",
                                    "cycle", "subgraph"},
                                   0.9, shared);
  graphs.grammar = common;
  graphs.phrases = {{"E", "edge set"}, {"\\sigma", "permutation"}, {"p", "prime number"}, {"G", "graph"}};

  spec.topics = {probability, physics, graphs};
  return spec;
}

// --- Files ------------------------------------------------------------------

std::string pair_to_json_line(const ContextEqPair& pair) {
  json j;
  j["before"] = pair.before;
  j["after"] = pair.after;
  j["equation"] = mathtok::detokenize(pair.equation);
  if (pair.topic) j["topic"] = *pair.topic;
  return j.dump();
}

ContextEqPair pair_from_json_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InputError, std::string("malformed corpus line: ") + e.what());
  }
  ContextEqPair pair;
  try {
    pair.before = j.at("before").get<std::vector<std::string>>();
    pair.after = j.at("after").get<std::vector<std::string>>();
    pair.equation = mathtok::tokenize(j.at("equation").get<std::string>());
    if (j.contains("topic")) pair.topic = j.at("topic").get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InputError, std::string("bad corpus record: ") + e.what());
  }
  return pair;
}

std::vector<ContextEqPair> read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::vector<ContextEqPair> out;
  std::string line;
  while (std::getline(in, line)) {
    if (collapse_whitespace(line).empty()) continue;
    out.push_back(pair_from_json_line(line));
  }
  return out;
}

void write_pairs(const std::filesystem::path& path, const std::vector<ContextEqPair>& pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& p : pairs) out << pair_to_json_line(p) << '\n';
}

SyntheticSpec read_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  SyntheticSpec spec;
  try {
    const json j = json::parse(in);
    spec.num_docs = j.value("num_docs", spec.num_docs);
    spec.context_length = j.value("context_length", spec.context_length);
    if (j.contains("equation_length")) {
      const auto range = j.at("equation_length").get<std::vector<std::size_t>>();
      if (range.size() != 2) throw Error(ErrorKind::InputError, "equation_length must be [min, max]");
      spec.min_equation_length = range[0];
      spec.max_equation_length = range[1];
    }
    spec.seed = j.value("seed", spec.seed);
    for (const auto& t : j.at("topics")) {
      SyntheticTopic topic;
      topic.words = t.at("words").get<std::map<std::string, double>>();
      const auto& g = t.at("grammar");
      topic.grammar.clauses = g.at("clauses").get<std::vector<std::vector<std::string>>>();
      topic.grammar.variables = g.value("variables", std::vector<std::string>{});
      topic.grammar.joiners = g.value("joiners", std::vector<std::string>{});
      topic.phrases = t.value("phrases", std::map<std::string, std::string>{});
      spec.topics.push_back(std::move(topic));
    }
    if (j.contains("num_topics") && j.at("num_topics").get<std::size_t>() != spec.topics.size()) {
      throw Error(ErrorKind::InputError, "num_topics does not match the number of topic entries");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InputError, std::string("bad synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

void write_synthetic_spec(const std::filesystem::path& path, const SyntheticSpec& spec) {
  json j;
  j["num_topics"] = spec.topics.size();
  j["num_docs"] = spec.num_docs;
  j["context_length"] = spec.context_length;
  j["equation_length"] = {spec.min_equation_length, spec.max_equation_length};
  j["seed"] = spec.seed;
  j["topics"] = json::array();
  for (const auto& t : spec.topics) {
    json jt;
    jt["words"] = t.words;
    jt["grammar"] = {{"clauses", t.grammar.clauses}, {"variables", t.grammar.variables}, {"joiners", t.grammar.joiners}};
    if (!t.phrases.empty()) jt["phrases"] = t.phrases;
    j["topics"].push_back(std::move(jt));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace topiceq::corpus
