#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <map>

#include "oracles.hpp"
#include "qaware/select.hpp"

using namespace qaware;

namespace {

// Candidates whose single tokens key into a lookup-table utility.
std::vector<Candidate> keyed_candidates(std::size_t m) {
  std::vector<Candidate> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i].tokens = {"c" + std::to_string(i)};
  return out;
}

UtilityMetric table_metric(const std::vector<std::vector<double>>& table) {
  return {"table", [table](const TokenSeq& h, const TokenSeq& r) {
            std::size_t i = std::stoul(h.front().substr(1));
            std::size_t j = std::stoul(r.front().substr(1));
            return table[i][j];
          }};
}

std::vector<std::vector<double>> random_symmetric(std::size_t m, Rng& rng) {
  std::vector<std::vector<double>> u(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) u[i][j] = u[j][i] = rng.uniform();
  return u;
}

}  // namespace

TEST_CASE("three-candidate MBR picks the highest expected utility") {
  // u(A,B)=0.8, u(A,C)=0.6, u(B,C)=0.9 -> row sums A:1.4, B:1.7, C:1.5
  std::vector<std::vector<double>> u = {{0, 0.8, 0.6}, {0.8, 0, 0.9}, {0.6, 0.9, 0}};
  auto report = mbr_select(keyed_candidates(3), table_metric(u));
  REQUIRE(report.chosen_index == 1);
  REQUIRE(report.evaluations == 6);
  REQUIRE_THAT(report.per_candidate_scores[0], Catch::Matchers::WithinAbs(1.4 / 2, 1e-12));
  REQUIRE_THAT(report.per_candidate_scores[1], Catch::Matchers::WithinAbs(1.7 / 2, 1e-12));
  REQUIRE_THAT(report.per_candidate_scores[2], Catch::Matchers::WithinAbs(1.5 / 2, 1e-12));
  REQUIRE(oracles::brute_force_mbr(u) == 1);
}

TEST_CASE("identical candidates tie-break to index zero") {
  std::vector<Candidate> cands(4);
  for (auto& c : cands) c.tokens = {"same", "tokens"};
  auto report = mbr_select(cands, utility_metric("chrf"));
  REQUIRE(report.chosen_index == 0);
}

TEST_CASE("fifty candidates cost exactly 2450 utility evaluations") {
  Rng rng(7);
  auto u = random_symmetric(50, rng);
  auto report = mbr_select(keyed_candidates(50), table_metric(u));
  REQUIRE(report.evaluations == 50 * 49);
  REQUIRE(report.evaluations == 2450);
}

TEST_CASE("MBR equals exhaustive brute force on random utilities") {
  Rng rng(11);
  for (std::size_t m = 2; m <= 8; ++m) {
    for (int trial = 0; trial < 100; ++trial) {
      auto u = random_symmetric(m, rng);
      auto report = mbr_select(keyed_candidates(m), table_metric(u));
      REQUIRE(report.chosen_index == oracles::brute_force_mbr(u));
      REQUIRE(report.evaluations == m * (m - 1));
    }
  }
}

TEST_CASE("MBR requires at least two candidates") {
  REQUIRE_THROWS(mbr_select(keyed_candidates(1), utility_metric("chrf")));
  REQUIRE_THROWS(mbr_select({}, utility_metric("chrf")));
}

TEST_CASE("positive affine rescaling of the utility keeps the choice") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    auto u = random_symmetric(6, rng);
    auto scaled = u;
    double a = 0.1 + rng.uniform() * 5.0, c = rng.uniform() * 10.0 - 5.0;
    for (auto& row : scaled)
      for (auto& x : row) x = a * x + c;
    auto r1 = mbr_select(keyed_candidates(6), table_metric(u));
    auto r2 = mbr_select(keyed_candidates(6), table_metric(scaled));
    REQUIRE(r1.chosen_index == r2.chosen_index);
  }
}

TEST_CASE("utility matrix is identical across thread counts") {
  Rng rng(17);
  auto u = random_symmetric(12, rng);
  auto cands = keyed_candidates(12);
  auto m1 = compute_utility_matrix(cands, table_metric(u), 1);
  auto m3 = compute_utility_matrix(cands, table_metric(u), 3);
  REQUIRE(m1.values == m3.values);
  REQUIRE(m1.evaluations == 12 * 11);
  REQUIRE(m3.evaluations == 12 * 11);
}

namespace {

std::vector<Candidate> bz_candidates(const std::vector<std::pair<int, double>>& bz) {
  std::vector<Candidate> out(bz.size());
  for (std::size_t i = 0; i < bz.size(); ++i) {
    out[i].tokens = {"h" + std::to_string(i)};
    out[i].predicted_bin = bz[i].first;
    out[i].bin_logprob = bz[i].second;
  }
  return out;
}

}  // namespace

TEST_CASE("qa_rank applies the lexicographic (bin, logprob) order") {
  auto ranked = qa_rank(bz_candidates({{7, -0.2}, {9, -1.5}, {9, -0.3}}));
  REQUIRE(ranked[0].predicted_bin == 9);
  REQUIRE(ranked[0].bin_logprob == -0.3);
  REQUIRE(ranked[1].predicted_bin == 9);
  REQUIRE(ranked[1].bin_logprob == -1.5);
  REQUIRE(ranked[2].predicted_bin == 7);
}

TEST_CASE("equal bins order by descending logprob; single candidate unchanged") {
  auto ranked = qa_rank(bz_candidates({{3, -2.0}, {3, -0.5}, {3, -1.0}}));
  REQUIRE(ranked[0].bin_logprob == -0.5);
  REQUIRE(ranked[1].bin_logprob == -1.0);
  REQUIRE(ranked[2].bin_logprob == -2.0);

  auto single = qa_rank(bz_candidates({{5, -1.0}}));
  REQUIRE(single.size() == 1);
  REQUIRE(single[0].tokens == TokenSeq{"h0"});
}

TEST_CASE("qa_rank satisfies the ordering predicate and permutes its input") {
  Rng rng(19);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t m = 1 + rng.below(12);
    std::vector<std::pair<int, double>> bz(m);
    for (auto& [b, z] : bz) {
      b = static_cast<int>(rng.below(4));
      z = rng.uniform() < 0.15 ? -std::numeric_limits<double>::infinity() : -3.0 * rng.uniform();
    }
    auto input = bz_candidates(bz);
    auto ranked = qa_rank(input);
    REQUIRE(ranked.size() == input.size());

    for (std::size_t i = 0; i + 1 < ranked.size(); ++i) {
      int bi = *ranked[i].predicted_bin, bj = *ranked[i + 1].predicted_bin;
      double zi = *ranked[i].bin_logprob, zj = *ranked[i + 1].bin_logprob;
      REQUIRE((bi > bj || (bi == bj && zi >= zj)));
    }

    auto multiset_of = [](const std::vector<Candidate>& cs) {
      std::map<std::string, int> m;
      for (const auto& c : cs) m[c.tokens.front()]++;
      return m;
    };
    REQUIRE(multiset_of(ranked) == multiset_of(input));
  }
}

TEST_CASE("missing predictions rank at the very bottom") {
  std::vector<Candidate> cands(3);
  cands[0].tokens = {"untagged"};  // no bin, no logprob
  cands[1].tokens = {"low"};
  cands[1].predicted_bin = 0;
  cands[1].bin_logprob = -5.0;
  cands[2].tokens = {"high"};
  cands[2].predicted_bin = 2;
  cands[2].bin_logprob = -0.1;
  auto ranked = qa_rank(cands);
  REQUIRE(ranked[0].tokens == TokenSeq{"high"});
  REQUIRE(ranked[1].tokens == TokenSeq{"low"});
  REQUIRE(ranked[2].tokens == TokenSeq{"untagged"});
}

TEST_CASE("pruned MBR keeps the cost at M*(M-1) regardless of the pool") {
  Rng rng(23);
  std::vector<Candidate> pool(1024);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    pool[i].tokens = {"w" + std::to_string(rng.below(40)), "w" + std::to_string(rng.below(40))};
    pool[i].predicted_bin = static_cast<int>(rng.below(10));
    pool[i].bin_logprob = -rng.uniform() * 4.0;
  }
  auto report = prune_then_mbr(pool, 5, utility_metric("chrf"));
  REQUIRE(report.evaluations == 20);
  REQUIRE(report.candidate_count == 5);
}

TEST_CASE("pruning with M = N reduces to plain MBR") {
  // continuous utilities keep the argmax unique, so the qa_rank permutation
  // cannot shift the choice through a tie
  Rng rng(29);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n = 4 + rng.below(8);
    auto u = random_symmetric(n, rng);
    auto pool = keyed_candidates(n);
    for (auto& c : pool) {
      c.predicted_bin = static_cast<int>(rng.below(3));
      c.bin_logprob = -rng.uniform();
    }
    auto pruned = prune_then_mbr(pool, n, table_metric(u));
    auto plain = mbr_select(pool, table_metric(u));
    REQUIRE(pruned.chosen.tokens == plain.chosen.tokens);
  }

  auto pool = keyed_candidates(5);
  for (auto& c : pool) c.predicted_bin = 0;
  REQUIRE_THROWS(prune_then_mbr(pool, 6, utility_metric("edit")));
  REQUIRE_THROWS(prune_then_mbr(pool, 1, utility_metric("edit")));
}

TEST_CASE("external reranking picks the scorer maximum with M evaluations") {
  std::vector<Candidate> cands(1024);
  for (std::size_t i = 0; i < cands.size(); ++i) cands[i].tokens = {"h" + std::to_string(i)};
  cands[700].tokens = {"gold"};

  std::size_t calls = 0;
  auto report = qe_rerank(cands, {"src"}, [&](const TokenSeq&, const TokenSeq& hyp) {
    ++calls;
    return hyp.front() == "gold" ? 1.0 : 0.5;
  });
  REQUIRE(report.chosen.tokens == TokenSeq{"gold"});
  REQUIRE(report.evaluations == 1024);
  REQUIRE(calls == 1024);

  // ties break toward the lower index
  auto tie = qe_rerank(cands, {"src"}, [](const TokenSeq&, const TokenSeq&) { return 0.25; });
  REQUIRE(tie.chosen_index == 0);
}

TEST_CASE("qa_rerank_top selects without any utility evaluations") {
  auto cands = bz_candidates({{1, -0.5}, {4, -2.0}, {4, -0.1}});
  auto report = qa_rerank_top(cands);
  REQUIRE(report.chosen.tokens == TokenSeq{"h2"});
  REQUIRE(report.evaluations == 0);
}
