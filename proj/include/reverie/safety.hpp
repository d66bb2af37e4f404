#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace reverie {

// Case-insensitive phrase screen applied to player text before the model's
// own safety verdict is consulted.
class RiskLexicon {
 public:
  RiskLexicon() = default;
  explicit RiskLexicon(std::vector<std::string> phrases) {
    for (auto& p : phrases) add(std::move(p));
  }

  /// One phrase per line; blank lines and lines starting with '#' are skipped.
  static RiskLexicon load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read safety lexicon: " + path);
    RiskLexicon lex;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      lex.add(line.substr(first));
    }
    return lex;
  }

  void add(std::string phrase) {
    phrase = lower(phrase);
    while (!phrase.empty() && std::isspace(static_cast<unsigned char>(phrase.back()))) phrase.pop_back();
    if (!phrase.empty()) phrases_.push_back(std::move(phrase));
  }

  /// First matching phrase, or empty when the text is clear.
  std::string match(std::string_view text) const {
    const std::string hay = lower(text);
    for (const auto& p : phrases_) {
      if (hay.find(p) != std::string::npos) return p;
    }
    return {};
  }

  bool flags(std::string_view text) const { return !match(text).empty(); }

  const std::vector<std::string>& phrases() const noexcept { return phrases_; }
  bool operator==(const RiskLexicon&) const = default;

 private:
  static std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
  }

  std::vector<std::string> phrases_;
};

}  // namespace reverie
