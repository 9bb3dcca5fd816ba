#pragma once

// Core value types shared by every module: token sequences and the
// source/target example that all pipelines operate on.

#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qaware {

using TokenSeq = std::vector<std::string>;

// Tag tokens are the only tokens allowed to contain square brackets and have
// the exact shape "[id]" with a nonempty, bracket-free, whitespace-free id.
inline bool is_tag_shaped(const std::string& tok) {
  if (tok.size() < 3 || tok.front() != '[' || tok.back() != ']') return false;
  for (std::size_t i = 1; i + 1 < tok.size(); ++i) {
    char c = tok[i];
    if (c == '[' || c == ']' || c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
  }
  return true;
}

inline void validate_token(const std::string& tok) {
  if (tok.empty()) throw std::runtime_error("invalid token: empty");
  for (char c : tok) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r')
      throw std::runtime_error("invalid token (contains whitespace): '" + tok + "'");
  }
  if ((tok.find('[') != std::string::npos || tok.find(']') != std::string::npos) && !is_tag_shaped(tok))
    throw std::runtime_error("invalid token (brackets are reserved for quality tags): '" + tok + "'");
}

inline std::string join_tokens(const TokenSeq& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += seq[i];
  }
  return out;
}

inline TokenSeq split_tokens(const std::string& line) {
  TokenSeq out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

struct ParallelExample {
  TokenSeq source;
  TokenSeq target;
  std::optional<double> quality;
  std::optional<int> bin;

  bool operator==(const ParallelExample&) const = default;
};

}  // namespace qaware
