#include "topiceq/mathtok.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "topiceq/error.hpp"

namespace topiceq::mathtok {

namespace {

bool is_ascii_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

bool is_reserved(std::string_view t) { return t == kUnkToken || t == kStartToken || t == kEndToken; }

}  // namespace

std::vector<std::string> tokenize(std::string_view latex) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = latex.size();
  while (i < n) {
    const char c = latex[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (c == '%') {
      while (i < n && latex[i] != '\n') ++i;
      continue;
    }
    if (c == '\\') {
      if (i + 1 >= n) throw Error(ErrorKind::InvalidEscape, "trailing backslash");
      const char next = latex[i + 1];
      if (is_ascii_letter(next)) {
        std::size_t j = i + 1;
        while (j < n && is_ascii_letter(latex[j])) ++j;
        out.emplace_back(latex.substr(i, j - i));
        i = j;
      } else if (is_space(next)) {
        i += 2;  // control space
      } else {
        const std::size_t len = std::min(utf8_length(static_cast<unsigned char>(next)), n - (i + 1));
        out.emplace_back(latex.substr(i, 1 + len));
        i += 1 + len;
      }
      continue;
    }
    const std::size_t len = std::min(utf8_length(static_cast<unsigned char>(c)), n - i);
    out.emplace_back(latex.substr(i, len));
    i += len;
  }
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

bool is_valid_token(std::string_view t) {
  if (t.empty()) return false;
  if (is_reserved(t)) return true;
  if (std::any_of(t.begin(), t.end(), is_space)) return false;
  if (t[0] == '\\') {
    if (t.size() < 2) return false;
    if (is_ascii_letter(t[1])) return std::all_of(t.begin() + 1, t.end(), is_ascii_letter);
    return t.size() == 1 + utf8_length(static_cast<unsigned char>(t[1]));
  }
  return t.size() == utf8_length(static_cast<unsigned char>(t[0]));
}

std::string_view to_string(SyntaxErrorKind kind) {
  switch (kind) {
    case SyntaxErrorKind::UnbalancedBrace: return "UnbalancedBrace";
    case SyntaxErrorKind::UnbalancedLeftRight: return "UnbalancedLeftRight";
    case SyntaxErrorKind::BadArgCount: return "BadArgCount";
    case SyntaxErrorKind::UnknownEnvironment: return "UnknownEnvironment";
    case SyntaxErrorKind::DanglingScript: return "DanglingScript";
  }
  return "SyntaxError";
}

std::size_t command_arity(std::string_view command) {
  static const std::unordered_map<std::string_view, std::size_t> table = {
      {"\\frac", 2}, {"\\sqrt", 1},    {"\\hat", 1},    {"\\bar", 1},  {"\\vec", 1},  {"\\mathbb", 1},
      {"\\mathrm", 1}, {"\\mathbf", 1}, {"\\mathcal", 1}, {"\\text", 1}, {"\\dot", 1}, {"\\tilde", 1},
  };
  auto it = table.find(command);
  return it == table.end() ? 0 : it->second;
}

SyntaxReport check_syntax(const std::vector<std::string>& tokens) {
  const std::size_t n = tokens.size();
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<SyntaxError> errors;
  auto fail = [&](std::size_t pos, SyntaxErrorKind kind) { errors.push_back({pos, kind}); };

  // Brace matching and per-token depth.
  std::vector<std::size_t> match(n, kNone);
  std::vector<std::size_t> depth(n, 0);
  {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < n; ++i) {
      depth[i] = open.size();
      if (tokens[i] == "{") {
        open.push_back(i);
      } else if (tokens[i] == "}") {
        if (open.empty()) {
          fail(i, SyntaxErrorKind::UnbalancedBrace);
        } else {
          match[open.back()] = i;
          match[i] = open.back();
          open.pop_back();
          depth[i] = open.size();
        }
      }
    }
    if (!open.empty()) fail(open.front(), SyntaxErrorKind::UnbalancedBrace);
  }

  // \left ... \right at equal depth; a group may not close over an open \left.
  {
    std::vector<std::size_t> lefts;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& t = tokens[i];
      if (t == "\\left" || t == "\\right") {
        if (i + 1 >= n) {
          fail(i, SyntaxErrorKind::UnbalancedLeftRight);
          continue;
        }
      }
      if (t == "\\left") {
        lefts.push_back(i);
      } else if (t == "\\right") {
        if (lefts.empty() || depth[lefts.back()] != depth[i]) {
          fail(i, SyntaxErrorKind::UnbalancedLeftRight);
        } else {
          lefts.pop_back();
        }
      } else if (t == "}" && match[i] != kNone) {
        while (!lefts.empty() && depth[lefts.back()] > depth[i]) {
          fail(lefts.back(), SyntaxErrorKind::UnbalancedLeftRight);
          lefts.pop_back();
        }
      }
    }
    for (std::size_t p : lefts) fail(p, SyntaxErrorKind::UnbalancedLeftRight);
  }

  // Command arities, \begin/\end, scripts.
  {
    std::vector<std::pair<std::string, std::size_t>> envs;
    // Returns the index just past a `{...}` group starting at j, or kNone.
    auto group_end = [&](std::size_t j) -> std::size_t {
      if (j >= n || tokens[j] != "{" || match[j] == kNone) return kNone;
      return match[j] + 1;
    };
    auto env_name = [&](std::size_t j) {
      std::string name;
      for (std::size_t k = j + 1; k < match[j]; ++k) name += tokens[k];
      return name;
    };
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& t = tokens[i];
      if (t == "\\begin" || t == "\\end") {
        const std::size_t after = group_end(i + 1);
        if (after == kNone) {
          fail(i, SyntaxErrorKind::BadArgCount);
          continue;
        }
        std::string name = env_name(i + 1);
        if (t == "\\begin") {
          envs.emplace_back(std::move(name), i);
        } else if (envs.empty() || envs.back().first != name) {
          fail(i, SyntaxErrorKind::UnknownEnvironment);
        } else {
          envs.pop_back();
        }
        continue;
      }
      if (t == "^" || t == "_") {
        if (i + 1 >= n) {
          fail(i, SyntaxErrorKind::DanglingScript);
          continue;
        }
        const std::string& arg = tokens[i + 1];
        if (arg == "}" || arg == "^" || arg == "_") {
          fail(i, SyntaxErrorKind::DanglingScript);
          continue;
        }
        std::size_t after = i + 2;
        if (arg == "{") {
          after = group_end(i + 1);
          if (after == kNone) continue;  // reported as a brace error
        }
        if (after < n && tokens[after] == t) fail(after, SyntaxErrorKind::DanglingScript);
        continue;
      }
      const std::size_t arity = command_arity(t);
      if (arity == 0) continue;
      std::size_t j = i + 1;
      if (t == "\\sqrt" && j < n && tokens[j] == "[") {
        while (j < n && tokens[j] != "]") ++j;
        if (j < n) ++j;
      }
      for (std::size_t a = 0; a < arity; ++a) {
        const std::size_t after = group_end(j);
        if (after == kNone) {
          fail(i, SyntaxErrorKind::BadArgCount);
          break;
        }
        j = after;
      }
    }
    for (const auto& [name, pos] : envs) fail(pos, SyntaxErrorKind::UnknownEnvironment);
  }

  SyntaxReport report;
  if (!errors.empty()) {
    report.valid = false;
    report.first_error = *std::min_element(errors.begin(), errors.end(), [](const SyntaxError& a, const SyntaxError& b) {
      return a.position < b.position;
    });
  }
  return report;
}

Vocab build_token_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t max_size) {
  if (max_size < 4) throw Error(ErrorKind::InputError, "math vocabulary max_size must be at least 4");
  std::map<std::string, std::size_t> counts;
  for (const auto& seq : corpus)
    for (const auto& tok : seq) {
      if (is_reserved(tok)) continue;
      ++counts[tok];
    }
  if (counts.empty()) throw Error(ErrorKind::EmptyCorpus, "no tokens to build a vocabulary from");
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < ranked.size() && kept.size() + 3 < max_size; ++i) kept.push_back(ranked[i].first);
  return Vocab::math(kept);
}

}  // namespace topiceq::mathtok
