#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ptc/error.hpp"

namespace ptc {

// Lowercases and splits on anything that is not alphanumeric. Bytes >= 0x80
// count as word characters so UTF-8 text stays intact.
inline std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (unsigned char c : text) {
    const bool word_char = std::isalnum(c) || c >= 0x80;
    if (word_char) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

// Token <-> id bijection with reserved pad=0 and unk=1. Ids are assigned by
// frequency (descending), ties broken lexicographically, so rebuilding on the
// same corpus always gives the same mapping.
class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;

  Vocabulary() : tokens_{"<pad>", "<unk>"} {}

  static Vocabulary build(const std::vector<std::string>& corpus,
                          std::size_t min_count) {
    if (corpus.empty()) throw InputError("build_vocab: empty corpus");
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& sentence : corpus)
      for (auto& tok : tokenize_words(sentence)) ++counts[tok];
    std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(),
                                                             counts.end());
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Vocabulary v;
    for (auto& [tok, count] : ordered)
      if (count >= min_count) v.add(tok);
    return v;
  }

  std::size_t size() const { return tokens_.size(); }

  std::int32_t id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
  }

  const std::string& token(std::int32_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
      throw InputError("vocabulary: id " + std::to_string(id) +
                       " out of range");
    return tokens_[static_cast<std::size_t>(id)];
  }

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_;
  }

  // One token per line; line number = id - 2 (pad/unk are implicit).
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("vocabulary: cannot write " + path);
    for (std::size_t i = 2; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("vocabulary: cannot read " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty())
        throw InputError("vocabulary: blank line in " + path);
      v.add(line);
    }
    return v;
  }

 private:
  void add(const std::string& token) {
    if (ids_.count(token))
      throw InputError("vocabulary: duplicate token '" + token + "'");
    ids_[token] = static_cast<std::int32_t>(tokens_.size());
    tokens_.push_back(token);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

}  // namespace ptc
