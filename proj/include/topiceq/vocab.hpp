#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace topiceq {

inline constexpr std::string_view kUnkToken = "<UNK>";
inline constexpr std::string_view kStartToken = "<START>";
inline constexpr std::string_view kEndToken = "<END>";
inline constexpr std::size_t kUnkId = 0;
inline constexpr std::size_t kStartId = 1;
inline constexpr std::size_t kEndId = 2;

/// Bidirectional string <-> id map. Math vocabularies reserve <UNK>,
/// <START>, <END> at ids 0..2; word, phrase and symbol vocabularies have no
/// reserved entries.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> entries);

  /// Prepends the three reserved entries to `tokens`.
  static Vocab math(const std::vector<std::string>& tokens);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  bool is_math() const;

  std::optional<std::size_t> find(std::string_view s) const;
  bool contains(std::string_view s) const { return find(s).has_value(); }
  /// Unknown strings map to <UNK> (math vocabs only; throws otherwise).
  std::size_t id_of(std::string_view s) const;
  const std::string& lookup(std::size_t id) const;
  const std::vector<std::string>& entries() const noexcept { return entries_; }

  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<std::size_t>& ids) const;

  /// One entry per line; line number is the id.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.entries_ == b.entries_; }

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace topiceq
