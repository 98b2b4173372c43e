#include "g2s/vocab.hpp"

#include <algorithm>

#include "g2s/common.hpp"

namespace g2s {

Vocabulary::Vocabulary() {
  tokens_ = {kSosToken, kUnkToken, kEosToken};
  rebuild_index();
}

Vocabulary Vocabulary::build(const std::unordered_map<std::string, std::size_t>& frequencies,
                             std::size_t cap) {
  std::vector<std::pair<std::string, std::size_t>> sorted(frequencies.begin(),
                                                          frequencies.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  for (const auto& [token, count] : sorted) {
    if (cap != 0 && v.tokens_.size() >= cap + 3) break;
    v.tokens_.push_back(token);
  }
  v.rebuild_index();
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens_after_specials) {
  Vocabulary v;
  v.tokens_.insert(v.tokens_.end(), tokens_after_specials.begin(),
                   tokens_after_specials.end());
  v.rebuild_index();
  return v;
}

Vocabulary Vocabulary::from_lines(const std::vector<std::string>& lines) {
  if (lines.size() < 3 || lines[0] != kSosToken || lines[1] != kUnkToken ||
      lines[2] != kEosToken) {
    throw FormatError("vocabulary file must start with the three reserved tokens");
  }
  Vocabulary v;
  v.tokens_ = lines;
  v.rebuild_index();
  return v;
}

std::vector<std::string> Vocabulary::to_lines() const { return tokens_; }

std::int32_t Vocabulary::encode(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::decode(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw ContractError("Vocabulary::decode: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const {
  return index_.find(token) != index_.end();
}

void Vocabulary::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    index_.emplace(tokens_[i], static_cast<std::int32_t>(i));
  }
}

std::vector<std::int32_t> encode_target(const std::vector<std::string>& subtokens,
                                        const Vocabulary& vocab, std::size_t max_len) {
  if (max_len == 0) throw ContractError("encode_target: max_len must be at least 1");
  std::vector<std::int32_t> ids;
  ids.reserve(max_len);
  for (const auto& tok : subtokens) {
    if (ids.size() == max_len) break;
    ids.push_back(vocab.encode(tok));
  }
  while (ids.size() < max_len) ids.push_back(Vocabulary::kEos);
  return ids;
}

}  // namespace g2s
