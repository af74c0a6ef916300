#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace inforeasoner {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

/// Open-domain QA answer normalization: lowercase, delete ASCII punctuation,
/// collapse whitespace, drop leading articles (a, an, the). Idempotent.
inline std::string normalize_answer(std::string_view s) {
  std::string cleaned;
  cleaned.reserve(s.size());
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::ispunct(u)) continue;
    cleaned.push_back(std::isspace(u) ? ' ' : static_cast<char>(std::tolower(u)));
  }
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && cleaned[i] == ' ') ++i;
    std::size_t j = i;
    while (j < cleaned.size() && cleaned[j] != ' ') ++j;
    if (j > i) words.emplace_back(cleaned.substr(i, j - i));
    i = j;
  }
  std::size_t first = 0;
  while (first < words.size() && (words[first] == "a" || words[first] == "an" || words[first] == "the")) ++first;
  std::string out;
  for (std::size_t w = first; w < words.size(); ++w) {
    if (!out.empty()) out.push_back(' ');
    out += words[w];
  }
  return out;
}

}  // namespace inforeasoner
