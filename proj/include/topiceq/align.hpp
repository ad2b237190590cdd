#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "topiceq/array.hpp"
#include "topiceq/config.hpp"
#include "topiceq/corpus.hpp"
#include "topiceq/params.hpp"
#include "topiceq/tape.hpp"
#include "topiceq/vocab.hpp"

/// Symbol-to-phrase alignment. Phrases are drawn from Mult(softmax(A s)),
/// where s is the bag of equation symbols and A is either a static M x L
/// matrix (baseline) or A(theta) = W_a diag(W_b theta) W_c.
namespace topiceq::align {

inline constexpr std::size_t kMaxPhraseWords = 4;

/// Baseline: align.A [M,L]. Topic-aware: align.Wa [M,F], align.Wb [F,K], align.Wc [F,L].
void init_params(ParamStore& store, const AlignConfig& cfg, std::size_t num_topics, Rng& rng);

/// One lowercase phrase of 1-4 words per line; blank lines are skipped.
Vocab load_phrase_vocab(const std::filesystem::path& path);
Vocab make_phrase_vocab(const std::vector<std::string>& phrases);

/// The max_size most frequent equation tokens, ties lexicographic.
Vocab build_symbol_vocab(const std::vector<corpus::ContextEqPair>& pairs, std::size_t max_size);

/// Lowercased alphabetic words of a sentence.
std::vector<std::string> sentence_words(const std::string& sentence);

/// Greedy longest-match phrase ids from the sentence immediately before and
/// the sentence immediately after the equation, non-overlapping, in order.
std::vector<std::size_t> extract_phrase_occurrences(const corpus::ContextEqPair& pair, const Vocab& phrases);

Array symbol_bag(const std::vector<std::string>& equation, const Vocab& symbols);
/// One-hot s for a single symbol; throws Error(UnknownSymbol).
Array symbol_one_hot(const std::string& symbol, const Vocab& symbols);

/// Full M x L matrix (value level).
Array alignment_matrix(const ParamStore& store, const AlignConfig& cfg, const Array& theta);

/// A(theta) s on the tape, without materialising A.
Var phrase_logits(Tape& tape, const AlignConfig& cfg, Var s, Var theta);
/// log softmax(A(theta) s)[w].
Var phrase_log_likelihood(Tape& tape, const AlignConfig& cfg, std::size_t phrase, Var s, Var theta);

Array phrase_distribution(const ParamStore& store, const AlignConfig& cfg, const Array& s, const Array& theta);

/// The top_n phrases for a symbol, descending by probability, ties lexicographic.
std::vector<std::pair<std::string, double>> predict_phrases(const ParamStore& store, const AlignConfig& cfg,
                                                            const Vocab& phrases, const Vocab& symbols,
                                                            const std::string& symbol, const Array& theta,
                                                            std::size_t top_n);

}  // namespace topiceq::align
