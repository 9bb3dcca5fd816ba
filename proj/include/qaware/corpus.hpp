#pragma once

// Synthetic parallel corpora. A TaskRule defines the gold translation of any
// source sequence (token-level bijection, optionally with order reversal);
// generate_corpus corrupts gold targets with per-example noise so the corpus
// spans the whole quality range.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qaware/types.hpp"
#include "qaware/util.hpp"

namespace qaware {

enum class RuleKind { SubstitutionCipher, WordMappingWithReversal };

inline std::string rule_kind_name(RuleKind k) {
  return k == RuleKind::SubstitutionCipher ? "substitution-cipher" : "word-mapping-with-reversal";
}

inline RuleKind rule_kind_from_name(const std::string& name) {
  if (name == "substitution-cipher") return RuleKind::SubstitutionCipher;
  if (name == "word-mapping-with-reversal") return RuleKind::WordMappingWithReversal;
  throw std::runtime_error("unknown rule kind: '" + name + "'");
}

struct TaskRule {
  RuleKind kind = RuleKind::SubstitutionCipher;
  std::map<std::string, std::string> mapping;  // bijection source token -> target token

  void validate() const {
    if (mapping.empty()) throw std::runtime_error("task rule: empty vocabulary");
    std::map<std::string, int> seen;
    for (const auto& [src, tgt] : mapping) {
      validate_token(src);
      validate_token(tgt);
      if (++seen[tgt] > 1) throw std::runtime_error("task rule: mapping is not a bijection at '" + tgt + "'");
    }
  }

  TokenSeq source_vocab() const {
    TokenSeq v;
    v.reserve(mapping.size());
    for (const auto& [src, tgt] : mapping) v.push_back(src);
    return v;
  }

  TokenSeq target_vocab() const {
    TokenSeq v;
    v.reserve(mapping.size());
    for (const auto& [src, tgt] : mapping) v.push_back(tgt);
    std::sort(v.begin(), v.end());
    return v;
  }

  // Gold translation of a source sequence.
  TokenSeq apply(const TokenSeq& source) const {
    TokenSeq out;
    out.reserve(source.size());
    for (const auto& tok : source) {
      auto it = mapping.find(tok);
      if (it == mapping.end()) throw std::runtime_error("token outside rule domain: '" + tok + "'");
      out.push_back(it->second);
    }
    if (kind == RuleKind::WordMappingWithReversal) std::reverse(out.begin(), out.end());
    return out;
  }
};

// Source tokens a..z (then a1, b1, ...), target tokens the uppercase analog.
inline std::string nth_source_token(std::size_t i) {
  std::string t(1, static_cast<char>('a' + i % 26));
  if (i >= 26) t += std::to_string(i / 26);
  return t;
}

inline std::string nth_target_token(std::size_t i) {
  std::string t(1, static_cast<char>('A' + i % 26));
  if (i >= 26) t += std::to_string(i / 26);
  return t;
}

// identity=true maps every source token to itself (useful for sanity runs).
inline TaskRule make_rule(RuleKind kind, std::size_t vocab_size, std::uint64_t seed, bool identity = false) {
  if (vocab_size == 0) throw std::runtime_error("task rule: empty vocabulary");
  TaskRule rule;
  rule.kind = kind;
  std::vector<std::size_t> perm(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) perm[i] = i;
  Rng rng(splitmix64(seed ^ 0x7275'6c65ULL));
  rng.shuffle(perm);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    std::string src = nth_source_token(i);
    rule.mapping[src] = identity ? src : nth_target_token(perm[i]);
  }
  rule.validate();
  return rule;
}

enum class NoiseSpread { Constant, Uniform, Graded };

inline std::string noise_spread_name(NoiseSpread s) {
  switch (s) {
    case NoiseSpread::Constant: return "constant";
    case NoiseSpread::Uniform: return "uniform";
    default: return "graded";
  }
}

inline NoiseSpread noise_spread_from_name(const std::string& name) {
  if (name == "constant") return NoiseSpread::Constant;
  if (name == "uniform") return NoiseSpread::Uniform;
  if (name == "graded") return NoiseSpread::Graded;
  throw std::runtime_error("unknown noise spread: '" + name + "'");
}

struct NoiseConfig {
  double substitution_rate = 0.0;
  double deletion_rate = 0.0;
  double insertion_rate = 0.0;
  NoiseSpread spread = NoiseSpread::Uniform;
  std::uint64_t seed = 0;

  void validate() const {
    for (double r : {substitution_rate, deletion_rate, insertion_rate})
      if (!(r >= 0.0 && r <= 1.0)) throw std::runtime_error("noise rates must lie in [0, 1]");
  }
};

// One example per index; all randomness comes from substream(seed, index), so
// generation is a pure function of its arguments and order-independent.
//
// The per-example noise level scales all three rates at once:
//   constant -> 1, uniform -> U[0,1), graded -> index / (n - 1).
// "graded" yields a corpus whose quality degrades monotonically with the
// example index, which eval uses to form pseudo-systems of distinct quality.
inline std::vector<ParallelExample> generate_corpus(const TaskRule& rule, std::size_t n, std::size_t len_lo,
                                                    std::size_t len_hi, const NoiseConfig& noise) {
  if (n < 1) throw std::runtime_error("generate_corpus: n must be >= 1");
  if (len_lo < 1 || len_hi < len_lo) throw std::runtime_error("generate_corpus: empty length range");
  rule.validate();
  noise.validate();

  const TokenSeq src_vocab = rule.source_vocab();
  const TokenSeq tgt_vocab = rule.target_vocab();

  std::vector<ParallelExample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = substream(noise.seed, i);
    std::size_t len = len_lo + rng.below(len_hi - len_lo + 1);

    ParallelExample ex;
    ex.source.reserve(len);
    for (std::size_t t = 0; t < len; ++t) ex.source.push_back(src_vocab[rng.below(src_vocab.size())]);
    TokenSeq gold = rule.apply(ex.source);

    double level = 1.0;
    if (noise.spread == NoiseSpread::Uniform) level = rng.uniform();
    if (noise.spread == NoiseSpread::Graded) level = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 1.0;
    const double sub = level * noise.substitution_rate;
    const double del = level * noise.deletion_rate;
    const double ins = level * noise.insertion_rate;

    for (const auto& tok : gold) {
      if (rng.uniform() < del) continue;
      if (rng.uniform() < sub)
        ex.target.push_back(tgt_vocab[rng.below(tgt_vocab.size())]);
      else
        ex.target.push_back(tok);
      if (rng.uniform() < ins) ex.target.push_back(tgt_vocab[rng.below(tgt_vocab.size())]);
    }
    out[i] = std::move(ex);
  }
  return out;
}

// --- corpus file: UTF-8, tab-separated "source \t target [\t quality [\t bin]]",
// --- '#' starts a comment line.

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_corpus(const std::vector<ParallelExample>& examples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& ex : examples) {
    if (ex.bin && !ex.quality) throw std::runtime_error("write_corpus: bin set without quality");
    out << join_tokens(ex.source) << '\t' << join_tokens(ex.target);
    if (ex.quality) {
      out << '\t' << format_double(*ex.quality);
      if (ex.bin) out << '\t' << *ex.bin;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline double parse_double_field(const std::string& s, std::size_t line_no) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  if (pos != s.size())
    throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

inline std::vector<ParallelExample> read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<ParallelExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2 || fields.size() > 4)
      throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": expected 2-4 fields, got " +
                               std::to_string(fields.size()));

    ParallelExample ex;
    ex.source = split_tokens(fields[0]);
    ex.target = split_tokens(fields[1]);
    try {
      for (const auto& t : ex.source) validate_token(t);
      for (const auto& t : ex.target) validate_token(t);
    } catch (const std::exception& e) {
      throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": " + e.what());
    }
    if (fields.size() >= 3) ex.quality = parse_double_field(fields[2], line_no);
    if (fields.size() == 4) {
      double b = parse_double_field(fields[3], line_no);
      if (b != static_cast<int>(b))
        throw std::runtime_error("parse error at line " + std::to_string(line_no) + ": bin must be an integer");
      ex.bin = static_cast<int>(b);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

// --- rule file: "kind <name>" then one "source target" pair per line.

inline void write_rule(const TaskRule& rule, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "kind " << rule_kind_name(rule.kind) << '\n';
  for (const auto& [src, tgt] : rule.mapping) out << src << ' ' << tgt << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline TaskRule read_rule(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  TaskRule rule;
  std::string line;
  std::size_t line_no = 0;
  bool have_kind = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    TokenSeq parts = split_tokens(line);
    if (!have_kind) {
      if (parts.size() != 2 || parts[0] != "kind")
        throw std::runtime_error("rule file: expected 'kind <name>' at line " + std::to_string(line_no));
      rule.kind = rule_kind_from_name(parts[1]);
      have_kind = true;
      continue;
    }
    if (parts.size() != 2)
      throw std::runtime_error("rule file: expected 'source target' at line " + std::to_string(line_no));
    rule.mapping[parts[0]] = parts[1];
  }
  rule.validate();
  return rule;
}

}  // namespace qaware
