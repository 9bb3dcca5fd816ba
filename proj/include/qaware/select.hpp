#pragma once

// Final-hypothesis selection: sampling-based MBR over a candidate list, the
// lexicographic (bin, tag log-probability) self-ranking, quality-aware
// pruning in front of MBR, and external-scorer reranking.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qaware/decode.hpp"
#include "qaware/metrics.hpp"
#include "qaware/types.hpp"
#include "qaware/util.hpp"

namespace qaware {

struct UtilityMatrix {
  std::vector<std::vector<double>> values;  // M x M, diagonal never consumed
  std::size_t evaluations = 0;              // exact count of utility computations
};

struct SelectionReport {
  Candidate chosen;
  std::string method;
  std::size_t candidate_count = 0;
  std::size_t evaluations = 0;
  std::vector<double> per_candidate_scores;
  std::size_t chosen_index = 0;
  int source_id = -1;
  double chosen_score = 0.0;
};

namespace detail {

// Metrics reject empty references, but sampled pseudo-references can be
// empty; such cells score by identity instead.
inline double utility_cell(const UtilityMetric& metric, const TokenSeq& hyp, const TokenSeq& ref) {
  if (ref.empty()) return hyp.empty() ? 1.0 : 0.0;
  return metric.evaluate(hyp, ref);
}

}  // namespace detail

// All off-diagonal cells u(candidate_i, candidate_j); rows are independent
// so they may be computed on several threads with a deterministic result.
inline UtilityMatrix compute_utility_matrix(const std::vector<Candidate>& candidates, const UtilityMetric& metric,
                                            unsigned threads = 1) {
  const std::size_t m = candidates.size();
  UtilityMatrix matrix;
  matrix.values.assign(m, std::vector<double>(m, 0.0));
  std::vector<std::size_t> row_evals(m, 0);
  parallel_for(m, threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      matrix.values[i][j] = detail::utility_cell(metric, candidates[i].tokens, candidates[j].tokens);
      ++row_evals[i];
    }
  });
  for (std::size_t e : row_evals) matrix.evaluations += e;
  return matrix;
}

// Finite-sample MBR: the candidate list doubles as the pseudo-reference list,
// a hypothesis is never evaluated against itself, and the score of candidate
// y is the mean of u(y, r) over the M-1 other entries. Ties break toward the
// lower candidate index.
inline SelectionReport mbr_select(const std::vector<Candidate>& candidates, const UtilityMetric& metric,
                                  unsigned threads = 1, const std::string& method = "mbr") {
  const std::size_t m = candidates.size();
  if (m < 2) throw std::runtime_error("mbr_select: need at least 2 candidates");
  UtilityMatrix matrix = compute_utility_matrix(candidates, metric, threads);

  SelectionReport report;
  report.method = method;
  report.candidate_count = m;
  report.evaluations = matrix.evaluations;
  report.per_candidate_scores.resize(m);
  for (std::size_t i = 0; i < m; ++i)
    report.per_candidate_scores[i] = pairwise_sum(matrix.values[i]) / static_cast<double>(m - 1);

  std::size_t best = 0;
  for (std::size_t i = 1; i < m; ++i)
    if (report.per_candidate_scores[i] > report.per_candidate_scores[best]) best = i;
  report.chosen = candidates[best];
  report.chosen_index = best;
  report.chosen_score = report.per_candidate_scores[best];
  report.source_id = candidates[best].source_id;
  return report;
}

// Self-ranking: primary key is the predicted bin (higher first), secondary
// the tag log-probability; stable on full ties. Candidates without a
// prediction rank as (bin 0, -inf).
inline std::vector<Candidate> qa_rank(const std::vector<Candidate>& candidates) {
  auto key = [](const Candidate& c) {
    return std::make_pair(c.predicted_bin.value_or(0),
                          c.bin_logprob.value_or(-std::numeric_limits<double>::infinity()));
  };
  std::vector<Candidate> out = candidates;
  std::stable_sort(out.begin(), out.end(), [&](const Candidate& a, const Candidate& b) { return key(a) > key(b); });
  return out;
}

// Rank by the model's own quality prediction, keep the top M, then run MBR on
// the survivors. Utility cost is M*(M-1) no matter how large the pool was.
inline SelectionReport prune_then_mbr(const std::vector<Candidate>& candidates, std::size_t m,
                                      const UtilityMetric& metric, unsigned threads = 1,
                                      const std::string& method = "prune-mbr") {
  if (m > candidates.size()) throw std::runtime_error("prune_then_mbr: M exceeds the candidate pool");
  if (m < 2) throw std::runtime_error("prune_then_mbr: need M >= 2");
  std::vector<Candidate> ranked = qa_rank(candidates);
  ranked.resize(m);
  return mbr_select(ranked, metric, threads, method);
}

// Reranking with an external scorer f(source, hypothesis); one evaluation per
// candidate. Ties break toward the lower index.
inline SelectionReport qe_rerank(const std::vector<Candidate>& candidates, const TokenSeq& source,
                                 const std::function<double(const TokenSeq&, const TokenSeq&)>& scorer,
                                 const std::string& method = "qe-rerank") {
  if (candidates.empty()) throw std::runtime_error("qe_rerank: empty candidate list");
  SelectionReport report;
  report.method = method;
  report.candidate_count = candidates.size();
  report.evaluations = candidates.size();
  report.per_candidate_scores.reserve(candidates.size());
  for (const auto& c : candidates) report.per_candidate_scores.push_back(scorer(source, c.tokens));

  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i)
    if (report.per_candidate_scores[i] > report.per_candidate_scores[best]) best = i;
  report.chosen = candidates[best];
  report.chosen_index = best;
  report.chosen_score = report.per_candidate_scores[best];
  report.source_id = candidates[best].source_id;
  return report;
}

// Top of the self-ranked list; no utility evaluations at all.
inline SelectionReport qa_rerank_top(const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw std::runtime_error("qa_rerank_top: empty candidate list");
  std::vector<Candidate> ranked = qa_rank(candidates);
  SelectionReport report;
  report.method = "qa-rerank";
  report.candidate_count = candidates.size();
  report.evaluations = 0;
  report.chosen = ranked.front();
  report.chosen_index = 0;
  report.chosen_score = static_cast<double>(ranked.front().predicted_bin.value_or(0));
  report.source_id = ranked.front().source_id;
  return report;
}

}  // namespace qaware
