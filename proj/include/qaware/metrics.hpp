#pragma once

// Surface similarity metrics used as MBR utilities and evaluation scores.
// All three map to [0, 1] and attain their maximum at hyp == ref.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qaware/types.hpp"

namespace qaware {

// Token-level Levenshtein distance, two-row DP.
inline std::size_t edit_distance(const TokenSeq& a, const TokenSeq& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// 1 - lev / max(|hyp|, |ref|).
inline double edit_similarity(const TokenSeq& hyp, const TokenSeq& ref) {
  if (ref.empty()) throw std::runtime_error("edit_similarity: empty reference");
  std::size_t denom = std::max(hyp.size(), ref.size());
  return 1.0 - static_cast<double>(edit_distance(hyp, ref)) / static_cast<double>(denom);
}

namespace detail {

// Character n-gram counts of the whitespace-stripped rendering of a sequence.
inline std::map<std::string, int> char_ngrams(const TokenSeq& seq, std::size_t n) {
  std::string s;
  for (const auto& tok : seq) s += tok;
  std::map<std::string, int> counts;
  if (s.size() >= n)
    for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[s.substr(i, n)];
  return counts;
}

inline long clipped_matches(const std::map<std::string, int>& hyp, const std::map<std::string, int>& ref) {
  long m = 0;
  for (const auto& [g, c] : hyp) {
    auto it = ref.find(g);
    if (it != ref.end()) m += std::min(c, it->second);
  }
  return m;
}

inline long total(const std::map<std::string, int>& counts) {
  long t = 0;
  for (const auto& [g, c] : counts) t += c;
  return t;
}

}  // namespace detail

// chrF: character n-gram F-score, n = 1..6, beta = 2. Precision and recall
// are macro-averaged over orders; orders where neither side has n-grams are
// skipped so that identical short strings still score 1.0. Whitespace is
// removed before extracting n-grams.
inline double chrf(const TokenSeq& hyp, const TokenSeq& ref) {
  if (ref.empty()) throw std::runtime_error("chrf: empty reference");
  constexpr std::size_t kMaxOrder = 6;
  constexpr double kBeta2 = 4.0;  // beta = 2
  double prec_sum = 0.0, rec_sum = 0.0;
  int orders = 0;
  for (std::size_t n = 1; n <= kMaxOrder; ++n) {
    auto h = detail::char_ngrams(hyp, n);
    auto r = detail::char_ngrams(ref, n);
    long ht = detail::total(h), rt = detail::total(r);
    if (ht == 0 && rt == 0) continue;
    long m = detail::clipped_matches(h, r);
    prec_sum += ht > 0 ? static_cast<double>(m) / static_cast<double>(ht) : 0.0;
    rec_sum += rt > 0 ? static_cast<double>(m) / static_cast<double>(rt) : 0.0;
    ++orders;
  }
  if (orders == 0) return 0.0;
  double p = prec_sum / orders, r = rec_sum / orders;
  if (p + r == 0.0) return 0.0;
  return (1.0 + kBeta2) * p * r / (kBeta2 * p + r);
}

// Sentence BLEU: geometric mean of token n-gram precisions up to 4-grams with
// add-one smoothing for n >= 2, times the brevity penalty.
inline double sentence_bleu(const TokenSeq& hyp, const TokenSeq& ref) {
  if (ref.empty()) throw std::runtime_error("sentence_bleu: empty reference");
  if (hyp.empty()) return 0.0;
  constexpr std::size_t kMaxOrder = 4;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= kMaxOrder; ++n) {
    std::map<TokenSeq, int> h, r;
    if (hyp.size() >= n)
      for (std::size_t i = 0; i + n <= hyp.size(); ++i) ++h[TokenSeq(hyp.begin() + i, hyp.begin() + i + n)];
    if (ref.size() >= n)
      for (std::size_t i = 0; i + n <= ref.size(); ++i) ++r[TokenSeq(ref.begin() + i, ref.begin() + i + n)];
    long matches = 0, hyp_total = 0;
    for (const auto& [g, c] : h) {
      hyp_total += c;
      auto it = r.find(g);
      if (it != r.end()) matches += std::min(c, it->second);
    }
    double p;
    if (n == 1)
      p = hyp_total > 0 ? static_cast<double>(matches) / static_cast<double>(hyp_total) : 0.0;
    else
      p = static_cast<double>(matches + 1) / static_cast<double>(hyp_total + 1);
    if (p == 0.0) return 0.0;
    log_sum += std::log(p);
  }
  double bleu = std::exp(log_sum / kMaxOrder);
  if (hyp.size() < ref.size())
    bleu *= std::exp(1.0 - static_cast<double>(ref.size()) / static_cast<double>(hyp.size()));
  return bleu;
}

// Utility metric u(y, r) for MBR and sweep reporting; higher is better.
struct UtilityMetric {
  std::string name;
  std::function<double(const TokenSeq&, const TokenSeq&)> evaluate;
};

inline UtilityMetric utility_metric(const std::string& name) {
  if (name == "chrf") return {"chrf", [](const TokenSeq& h, const TokenSeq& r) { return chrf(h, r); }};
  if (name == "bleu") return {"bleu", [](const TokenSeq& h, const TokenSeq& r) { return sentence_bleu(h, r); }};
  if (name == "edit") return {"edit", [](const TokenSeq& h, const TokenSeq& r) { return edit_similarity(h, r); }};
  throw std::runtime_error("unknown utility metric: '" + name + "'");
}

}  // namespace qaware
