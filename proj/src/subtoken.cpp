#include "g2s/subtoken.hpp"

#include <cctype>

namespace g2s {

namespace {

bool is_lower(char c) { return std::islower(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

char to_lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

// Boundary between s[i-1] and s[i]: lower->Upper, end of an acronym run
// (Upper Upper lower), or a letter/digit transition.
bool is_boundary(const std::string& s, std::size_t i) {
  const char prev = s[i - 1];
  const char cur = s[i];
  if (is_lower(prev) && is_upper(cur)) return true;
  if (is_upper(prev) && is_upper(cur) && i + 1 < s.size() && is_lower(s[i + 1])) return true;
  if (is_digit(prev) != is_digit(cur)) return true;
  return false;
}

}  // namespace

std::vector<std::string> tokenize_name(const std::string& name) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (std::size_t i = 0; i < name.size(); ++i) {
    const char c = name[i];
    if (c == '_') {
      flush();
      continue;
    }
    if (!cur.empty() && is_boundary(name, i)) flush();
    cur.push_back(to_lower(c));
  }
  flush();
  if (out.empty() && !name.empty()) out.push_back(name);  // e.g. "_"
  return out;
}

}  // namespace g2s
