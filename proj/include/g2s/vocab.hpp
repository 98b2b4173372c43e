#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace g2s {

// Token table with reserved ids 0=SOS, 1=UNK, 2=EOS. Remaining tokens are
// ordered by descending corpus frequency, ties broken lexicographically.
class Vocabulary {
 public:
  static constexpr std::int32_t kSos = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kEos = 2;
  static constexpr const char* kSosToken = "<SOS>";
  static constexpr const char* kUnkToken = "<UNK>";
  static constexpr const char* kEosToken = "<EOS>";

  Vocabulary();

  // Specials plus the top `cap` tokens; cap == 0 means no limit.
  static Vocabulary build(const std::unordered_map<std::string, std::size_t>& frequencies,
                          std::size_t cap);

  static Vocabulary from_tokens(const std::vector<std::string>& tokens_after_specials);

  // One token per line, line number == id (specials included).
  static Vocabulary from_lines(const std::vector<std::string>& lines);
  std::vector<std::string> to_lines() const;

  std::int32_t encode(const std::string& token) const;  // kUnk when absent
  const std::string& decode(std::int32_t id) const;
  bool contains(const std::string& token) const;
  std::size_t size() const { return tokens_.size(); }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;

  void rebuild_index();
};

// Maps subtokens to ids (UNK when absent), truncates to max_len and pads
// with EOS to exactly max_len.
std::vector<std::int32_t> encode_target(const std::vector<std::string>& subtokens,
                                        const Vocabulary& vocab, std::size_t max_len);

}  // namespace g2s
