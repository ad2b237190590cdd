#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "topiceq/vocab.hpp"

namespace topiceq::mathtok {

/// Splits single-line math-mode LaTeX into tokens:
///  - `\` + maximal run of ASCII letters, or `\` + one non-letter character
///    (`\ ` is a spacing command and is dropped like other whitespace);
///  - any other character (one UTF-8 code point) is its own token, so
///    multi-digit numbers come out one digit at a time;
///  - whitespace is discarded and an unescaped `%` ends the input.
/// Throws Error(InvalidEscape) on a trailing lone backslash.
std::vector<std::string> tokenize(std::string_view latex);

/// Tokens joined by single spaces.
std::string detokenize(const std::vector<std::string>& tokens);

/// True when `token` satisfies the math-token grammar (or is reserved).
bool is_valid_token(std::string_view token);

enum class SyntaxErrorKind {
  UnbalancedBrace,
  UnbalancedLeftRight,
  BadArgCount,
  UnknownEnvironment,
  DanglingScript,
};

std::string_view to_string(SyntaxErrorKind kind);

struct SyntaxError {
  std::size_t position = 0;
  SyntaxErrorKind kind = SyntaxErrorKind::UnbalancedBrace;
};

struct SyntaxReport {
  bool valid = true;
  std::optional<SyntaxError> first_error;
};

/// Number of mandatory `{...}` groups a command takes (0 for anything not
/// in the table).
std::size_t command_arity(std::string_view command);

/// Grammar check standing in for a LaTeX compiler. Rules:
///  - `{`/`}` balanced;
///  - each `\left` closed by a `\right` at the same brace depth;
///  - commands with non-zero arity are followed by that many `{...}` groups
///    (`\sqrt` may take one `[...]` before its group);
///  - `^` and `_` take exactly one token or group, never at the end and
///    never doubled on the same argument;
///  - `\begin{X}`/`\end{X}` names match and nest.
/// The reported error is the one with the smallest token position.
SyntaxReport check_syntax(const std::vector<std::string>& tokens);

/// Math vocabulary: the three reserved entries followed by the
/// (max_size - 3) most frequent tokens, ties broken lexicographically.
/// Throws Error(EmptyCorpus) when no tokens are seen.
Vocab build_token_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t max_size);

}  // namespace topiceq::mathtok
