#include "topiceq/vocab.hpp"

#include <fstream>

#include "topiceq/error.hpp"

namespace topiceq {

Vocab::Vocab(std::vector<std::string> entries) : entries_(std::move(entries)) {
  index_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i], i).second) {
      throw Error(ErrorKind::InputError, "duplicate vocabulary entry '" + entries_[i] + "'");
    }
  }
}

Vocab Vocab::math(const std::vector<std::string>& tokens) {
  std::vector<std::string> entries{std::string(kUnkToken), std::string(kStartToken), std::string(kEndToken)};
  entries.insert(entries.end(), tokens.begin(), tokens.end());
  return Vocab(std::move(entries));
}

bool Vocab::is_math() const {
  return entries_.size() >= 3 && entries_[kUnkId] == kUnkToken && entries_[kStartId] == kStartToken &&
         entries_[kEndId] == kEndToken;
}

std::optional<std::size_t> Vocab::find(std::string_view s) const {
  auto it = index_.find(std::string(s));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocab::id_of(std::string_view s) const {
  if (auto id = find(s)) return *id;
  if (is_math()) return kUnkId;
  throw Error(ErrorKind::InputError, "'" + std::string(s) + "' is not in the vocabulary");
}

const std::string& Vocab::lookup(std::size_t id) const {
  if (id >= entries_.size()) throw Error(ErrorKind::InputError, "vocabulary id " + std::to_string(id) + " out of range");
  return entries_[id];
}

std::vector<std::size_t> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id_of(t));
  return ids;
}

std::vector<std::string> Vocab::decode(const std::vector<std::size_t>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) out.push_back(lookup(id));
  return out;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& e : entries_) out << e << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::vector<std::string> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    entries.push_back(line);
  }
  return Vocab(std::move(entries));
}

}  // namespace topiceq
