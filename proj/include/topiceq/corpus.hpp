#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "topiceq/vocab.hpp"

namespace topiceq::corpus {

inline constexpr std::size_t kContextSentences = 5;
inline constexpr std::size_t kMinEquationTokens = 20;
inline constexpr std::size_t kMaxEquationTokens = 150;

/// One training document: the equation and the sentences around it.
struct ContextEqPair {
  std::vector<std::string> before;
  std::vector<std::string> after;
  std::vector<std::string> equation;  // math tokens
  std::optional<int> topic;           // generating topic (synthetic corpora only)

  friend bool operator==(const ContextEqPair&, const ContextEqPair&) = default;
};

/// (word id, count) with strictly increasing ids and positive counts.
using SparseBow = std::vector<std::pair<std::size_t, std::size_t>>;

struct CorpusSplit {
  std::vector<ContextEqPair> train;
  std::vector<ContextEqPair> valid;
  std::vector<ContextEqPair> test;
};

/// Sentence boundaries are `.`, `!` or `?` followed by whitespace and then
/// an uppercase letter or a backslash. Returned sentences are trimmed and
/// whitespace-collapsed; empty ones are dropped.
std::vector<std::string> split_sentences(std::string_view text);

/// Display equations (`\[..\]`, `$$..$$`, `\begin{equation}..\end{equation}`)
/// with at least five sentences on each side, inline math removed from the
/// context, and 20-150 math tokens.
std::vector<ContextEqPair> extract_pairs(std::string_view document);

const std::vector<std::string>& stopwords();
bool is_stopword(std::string_view word);

/// Lowercased alphabetic runs of length >= 2 that are not stopwords.
std::vector<std::string> context_words(const std::vector<std::string>& sentences);
std::vector<std::string> context_words(const ContextEqPair& pair);

SparseBow preprocess_context(const std::vector<std::string>& sentences, const Vocab& vocab);
SparseBow preprocess_context(const ContextEqPair& pair, const Vocab& vocab);

/// Words with document frequency >= min_doc_freq, the max_size most
/// document-frequent of them, ties broken lexicographically. Throws
/// Error(EmptyVocab) if nothing survives.
Vocab build_word_vocab(const std::vector<std::vector<std::string>>& contexts, std::size_t min_doc_freq,
                       std::size_t max_size);

/// Seeded shuffle then contiguous slicing. Throws Error(TooSmall) for fewer
/// than three pairs.
CorpusSplit split_corpus(std::vector<ContextEqPair> pairs, std::array<double, 3> ratios, std::uint64_t seed);

/// Copy with the equation tokens permuted uniformly at random.
ContextEqPair shuffle_equation_tokens(const ContextEqPair& pair, std::uint64_t seed);

// --- Synthetic corpora ---------------------------------------------------

/// A topic's equation grammar. An equation is a sequence of clauses joined
/// by joiner tokens; the token "$v" in a clause is replaced by a variable
/// drawn from `variables`.
struct TokenGrammar {
  std::vector<std::vector<std::string>> clauses;
  std::vector<std::string> variables;
  std::vector<std::string> joiners;

  /// Every token this grammar can emit.
  std::vector<std::string> token_set() const;
  /// True when the grammar can emit exactly this sequence.
  bool accepts(const std::vector<std::string>& tokens) const;
};

struct SyntheticTopic {
  std::map<std::string, double> words;  // sums to 1
  TokenGrammar grammar;
  /// Planted alignment: symbol -> phrase mentioned in the immediate context
  /// whenever the symbol occurs in the equation.
  std::map<std::string, std::string> phrases;
};

struct SyntheticSpec {
  std::vector<SyntheticTopic> topics;
  std::size_t num_docs = 1000;
  std::size_t context_length = 30;  // words per pair, spread over 10 sentences
  std::size_t min_equation_length = 20;
  std::size_t max_equation_length = 60;
  std::uint64_t seed = 1;

  std::size_t num_topics() const { return topics.size(); }
  /// Throws Error(InputError) when a distribution does not sum to 1 within
  /// 1e-9 or a grammar is empty.
  void validate() const;
};

/// Draws a topic uniformly per pair, context words from that topic's word
/// distribution and an equation from its grammar.
std::vector<ContextEqPair> generate_synthetic(const SyntheticSpec& spec);

/// Renames every grammar variable of `topic` in the equation through a fixed
/// permutation of that topic's variable pool (structure is kept).
std::vector<std::string> rename_variables(const std::vector<std::string>& equation, const TokenGrammar& grammar,
                                          std::uint64_t seed);

/// K=3 corpus whose topics share structural tokens ({ } ^ _ ( ) = +) but
/// have disjoint topic-specific symbols and word supports.
SyntheticSpec equation_preset(std::size_t num_docs, std::uint64_t seed);
/// K=3 corpus where every topic writes equations over the same symbols and
/// the immediate context carries a topic-dependent phrase for each symbol.
SyntheticSpec alignment_preset(std::size_t num_docs, std::uint64_t seed);

// --- Files ----------------------------------------------------------------

/// JSON Lines: {"before": [...], "after": [...], "equation": "<tokens>"}
/// plus an optional integer "topic".
std::vector<ContextEqPair> read_pairs(const std::filesystem::path& path);
void write_pairs(const std::filesystem::path& path, const std::vector<ContextEqPair>& pairs);
std::string pair_to_json_line(const ContextEqPair& pair);
ContextEqPair pair_from_json_line(std::string_view line);

SyntheticSpec read_synthetic_spec(const std::filesystem::path& path);
void write_synthetic_spec(const std::filesystem::path& path, const SyntheticSpec& spec);

}  // namespace topiceq::corpus
