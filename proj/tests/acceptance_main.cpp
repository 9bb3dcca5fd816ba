// Acceptance suite: one check per shipped guarantee, each printed as a
// single [PASS]/[FAIL] line with its runtime. Criteria 5-7 train models on a
// 20k-pair noisy cipher corpus; criterion 10 drives the CLI binary passed as
// argv[1] through the full pipeline and compares runs byte for byte.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qaware/qaware.hpp"

using namespace qaware;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Criterion {
 public:
  // shared_seconds: setup time (e.g. model training) charged against the budget
  Criterion(int number, std::string label, double budget_seconds, double shared_seconds = 0.0)
      : number_(number),
        label_(std::move(label)),
        budget_(budget_seconds),
        shared_(shared_seconds),
        start_(clock::now()) {}

  void check(bool ok, const std::string& detail) {
    if (!ok && first_failure_.empty()) first_failure_ = detail;
    ok_ = ok_ && ok;
  }

  void finish() {
    double elapsed = shared_ + std::chrono::duration<double>(clock::now() - start_).count();
    if (elapsed >= budget_ && first_failure_.empty()) first_failure_ = "exceeded runtime budget";
    bool pass = ok_ && elapsed < budget_;
    std::printf("[%s] criterion %d: %s (%.1fs of %.0fs budget)%s%s\n", pass ? "PASS" : "FAIL", number_,
                label_.c_str(), elapsed, budget_, first_failure_.empty() ? "" : " -- ",
                first_failure_.c_str());
    if (!pass) ++g_failures;
    std::fflush(stdout);
  }

 private:
  using clock = std::chrono::steady_clock;
  int number_;
  std::string label_;
  double budget_;
  double shared_;
  clock::time_point start_;
  bool ok_ = true;
  std::string first_failure_;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// --- criterion 1: equal-mass binning ----------------------------------------

void criterion_binning() {
  Criterion c(1, "equal-mass binning balance", 1.0);

  Rng rng(101);
  std::vector<double> scores(10000);
  for (auto& s : scores) s = std::pow(rng.uniform(), 2.3);  // skewed continuous draw
  BinTable table = fit_bins(scores, 10, make_identifiers("digits", 10));
  std::vector<std::size_t> counts(10, 0);
  for (double s : scores) ++counts[static_cast<std::size_t>(assign_bin(s, table))];
  for (std::size_t b = 0; b < 10; ++b)
    c.check(counts[b] >= 999 && counts[b] <= 1001,
            "bin " + std::to_string(b) + " holds " + std::to_string(counts[b]));

  std::vector<double> uneven(10007);
  for (auto& s : uneven) s = rng.uniform();
  BinTable t2 = fit_bins(uneven, 10, make_identifiers("digits", 10));
  std::vector<std::size_t> c2(10, 0);
  for (double s : uneven) ++c2[static_cast<std::size_t>(assign_bin(s, t2))];
  auto [lo, hi] = std::minmax_element(c2.begin(), c2.end());
  c.check(*hi - *lo <= 1, "uneven split sizes differ by " + std::to_string(*hi - *lo));

  c.finish();
}

// --- criterion 2: epsilon sampling step --------------------------------------

void criterion_epsilon() {
  Criterion c(2, "epsilon truncation zeroes, renormalization, identity", 5.0);

  Rng rng(202);
  for (int trial = 0; trial < 10000; ++trial) {
    std::size_t k = 2 + rng.below(30);
    std::vector<double> dist(k);
    double z = 0.0;
    for (auto& p : dist) {
      p = rng.uniform();
      z += p;
    }
    for (auto& p : dist) p /= z;

    double eps = rng.uniform() * 0.3;
    double temp = 0.25 + rng.uniform() * 2.0;
    auto out = epsilon_step(dist, eps, temp);

    double sum = 0.0;
    bool zeros_ok = true;
    bool any_survivor = false;
    for (double p : dist) any_survivor |= p >= eps;
    for (std::size_t i = 0; i < k; ++i) {
      sum += out[i];
      if (any_survivor && dist[i] < eps && out[i] != 0.0) zeros_ok = false;
    }
    c.check(zeros_ok, "trial " + std::to_string(trial) + ": nonzero mass below epsilon");
    c.check(std::abs(sum - 1.0) <= 1e-9, "trial " + std::to_string(trial) + ": sum " + fmt(sum));

    auto identity = epsilon_step(dist, 0.0, 1.0);
    c.check(identity == dist, "trial " + std::to_string(trial) + ": eps=0,T=1 changed the distribution");
  }
  c.finish();
}

// --- criterion 3: MBR oracle equivalence -------------------------------------

std::size_t brute_mbr(const std::vector<std::vector<double>>& u) {
  std::size_t best = 0;
  double best_score = -1e300;
  for (std::size_t y = 0; y < u.size(); ++y) {
    double sum = 0.0;
    for (std::size_t r = 0; r < u.size(); ++r)
      if (r != y) sum += u[y][r];
    double score = sum / static_cast<double>(u.size() - 1);
    if (score > best_score) {
      best_score = score;
      best = y;
    }
  }
  return best;
}

void criterion_mbr() {
  Criterion c(3, "MBR equals brute force with exact M*(M-1) accounting", 10.0);

  Rng rng(303);
  std::size_t agreements = 0, trials = 0;
  for (std::size_t m = 2; m <= 8; ++m) {
    for (int t = 0; t < 1000; ++t) {
      std::vector<std::vector<double>> u(m, std::vector<double>(m, 0.0));
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) u[i][j] = u[j][i] = rng.uniform();

      std::vector<Candidate> cands(m);
      for (std::size_t i = 0; i < m; ++i) cands[i].tokens = {"c" + std::to_string(i)};
      UtilityMetric metric{"table", [&](const TokenSeq& h, const TokenSeq& r) {
                             return u[std::stoul(h.front().substr(1))][std::stoul(r.front().substr(1))];
                           }};
      auto report = mbr_select(cands, metric);
      ++trials;
      if (report.chosen_index == brute_mbr(u)) ++agreements;
      c.check(report.evaluations == m * (m - 1),
              "M=" + std::to_string(m) + " evaluations " + std::to_string(report.evaluations));
    }
  }
  c.check(agreements == trials,
          "agreement " + std::to_string(agreements) + "/" + std::to_string(trials));
  std::printf("       brute-force agreement %zu/%zu\n", agreements, trials);

  std::vector<Candidate> fifty(50);
  Rng r2(304);
  for (auto& cand : fifty)
    cand.tokens = {"w" + std::to_string(r2.below(30)), "w" + std::to_string(r2.below(30))};
  auto report = mbr_select(fifty, utility_metric("chrf"));
  c.check(report.evaluations == 2450, "M=50 evaluations " + std::to_string(report.evaluations));

  c.finish();
}

// --- criterion 4: lexicographic reranking ------------------------------------

void criterion_rerank() {
  Criterion c(4, "reranking satisfies the (bin, logprob) order; pruning with M=N is plain MBR", 5.0);

  Rng rng(404);
  for (int trial = 0; trial < 2000; ++trial) {
    std::size_t m = 1 + rng.below(16);
    std::vector<Candidate> cands(m);
    for (std::size_t i = 0; i < m; ++i) {
      cands[i].tokens = {"h" + std::to_string(i)};
      cands[i].predicted_bin = static_cast<int>(rng.below(5));
      cands[i].bin_logprob = rng.uniform() < 0.1 ? -std::numeric_limits<double>::infinity()
                                                 : -4.0 * rng.uniform();
    }
    auto ranked = qa_rank(cands);
    c.check(ranked.size() == m, "rank changed the list size");
    std::map<std::string, int> in_counts, out_counts;
    for (const auto& x : cands) in_counts[x.tokens.front()]++;
    for (const auto& x : ranked) out_counts[x.tokens.front()]++;
    c.check(in_counts == out_counts, "rank output is not a permutation");
    for (std::size_t i = 0; i + 1 < ranked.size(); ++i) {
      int bi = *ranked[i].predicted_bin, bj = *ranked[i + 1].predicted_bin;
      double zi = *ranked[i].bin_logprob, zj = *ranked[i + 1].bin_logprob;
      c.check(bi > bj || (bi == bj && zi >= zj), "adjacent pair violates the order");
    }
  }

  // continuous random utilities keep the MBR argmax unique under permutation
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 4 + rng.below(12);
    std::vector<std::vector<double>> u(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) u[i][j] = u[j][i] = rng.uniform();
    UtilityMetric metric{"table", [&](const TokenSeq& h, const TokenSeq& r) {
                           return u[std::stoul(h.front().substr(1))][std::stoul(r.front().substr(1))];
                         }};
    std::vector<Candidate> pool(n);
    for (std::size_t i = 0; i < n; ++i) {
      pool[i].tokens = {"c" + std::to_string(i)};
      pool[i].predicted_bin = static_cast<int>(rng.below(4));
      pool[i].bin_logprob = -rng.uniform() * 3.0;
    }
    auto pruned = prune_then_mbr(pool, n, metric);
    auto plain = mbr_select(pool, metric);
    c.check(pruned.chosen.tokens == plain.chosen.tokens, "M=N pruning changed the MBR choice");
  }
  c.finish();
}

// --- shared 20k-pair experiment pipeline (criteria 5-7) ----------------------

struct Experiment {
  TaskRule rule;
  BinTable table;
  LogLinearModel baseline, prompt, predict;
  std::vector<TokenSeq> eval_sources;
};

Experiment build_experiment() {
  Experiment e;
  e.rule = make_rule(RuleKind::SubstitutionCipher, 12, 20240101);

  NoiseConfig noise;
  noise.substitution_rate = 0.7;
  noise.deletion_rate = 0.12;
  noise.insertion_rate = 0.12;
  noise.spread = NoiseSpread::Uniform;
  noise.seed = 515;
  auto corpus = generate_corpus(e.rule, 20000, 4, 9, noise);
  for (auto& ex : corpus) ex.quality = score_synthetic_qe(e.rule, ex.source, ex.target);

  std::vector<double> scores;
  for (const auto& ex : corpus) scores.push_back(*ex.quality);
  e.table = fit_bins(scores, 10, make_identifiers("digits", 10));

  TrainConfig base;
  base.epochs = 12;
  base.learning_rate = 0.25;
  base.hash_dim = 1u << 20;
  base.seed = 616;

  e.baseline = train(corpus, base);

  TrainConfig cp = base;
  cp.mode = ModelMode::Prompting;
  cp.prompt_tags = e.table.tags;
  e.prompt = train(tag_corpus(corpus, {TagMode::Prompting, e.table, {}}), cp);

  TrainConfig cq = base;
  cq.mode = ModelMode::Prediction;
  cq.predict_tags = e.table.tags;
  e.predict = train(tag_corpus(corpus, {TagMode::Prediction, {}, e.table}), cq);

  NoiseConfig clean;
  clean.seed = 717;
  for (const auto& ex : generate_corpus(e.rule, 200, 4, 9, clean)) e.eval_sources.push_back(ex.source);
  return e;
}

void criterion_controllability(const Experiment& e, double train_seconds) {
  // budget covers training plus the sweep, all on a single worker
  Criterion c(5, "prompted bin controls output quality", 600.0, train_seconds);

  std::vector<TokenSeq> sources(e.eval_sources.begin(), e.eval_sources.begin() + 150);
  SampleConfig sc;
  sc.seed = 818;
  auto rows = controllability_sweep(e.prompt, e.rule, sources, e.table, sc, 4, 1);

  std::vector<double> bins, means;
  for (const auto& r : rows) {
    bins.push_back(r.bin);
    means.push_back(r.mean_qe);
  }
  double rho = spearman(bins, means);
  double gap = means.back() - means.front();
  c.check(rho >= 0.9, "spearman(bin, mean QE) = " + fmt(rho));
  c.check(gap >= 0.15, "top-bottom gap = " + fmt(gap));
  std::printf("       spearman=%s gap=%s (bin0=%s bin9=%s)\n", fmt(rho).c_str(), fmt(gap).c_str(),
              fmt(means.front()).c_str(), fmt(means.back()).c_str());
  c.finish();
}

void criterion_alignment(const Experiment& e, double train_seconds) {
  Criterion c(6, "self-predicted bins align with actual quality", 600.0, train_seconds);

  std::vector<TokenSeq> sources(e.eval_sources.begin(), e.eval_sources.begin() + 150);
  SampleConfig sc;
  sc.seed = 919;
  auto rows = alignment_report(e.predict, e.rule, sources, sc, 8, 2);
  c.check(rows.size() >= 3, "only " + std::to_string(rows.size()) + " populated bins");

  std::size_t inversions = 0;
  std::ostringstream medians;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].actual.median < rows[i - 1].actual.median) ++inversions;
    medians << (i ? " " : "") << rows[i].bin << ":" << fmt(rows[i].actual.median);
  }
  c.check(inversions <= 1, std::to_string(inversions) + " adjacent median inversions");
  std::printf("       per-bin medians %s (%zu inversions)\n", medians.str().c_str(), inversions);
  c.finish();
}

void criterion_efficiency(const Experiment& e, double train_seconds) {
  Criterion c(7, "pruned MBR (20 evals) matches baseline MBR at 992 evals", 900.0, train_seconds);

  const UtilityMetric metric = utility_metric("chrf");
  const std::size_t n_pool = 64, m_pruned = 5, m_base = 32;
  std::vector<double> pruned_scores(e.eval_sources.size()), base_scores(e.eval_sources.size());
  std::vector<double> plain5_scores(e.eval_sources.size());
  std::size_t pruned_evals = 0, base_evals = 0;
  std::vector<std::size_t> pruned_evals_per(e.eval_sources.size()), base_evals_per(e.eval_sources.size());

  parallel_for(e.eval_sources.size(), 2, [&](std::size_t s) {
    const TokenSeq& source = e.eval_sources[s];
    TokenSeq gold = e.rule.apply(source);

    SampleConfig sc;
    sc.seed = splitmix64(0xACCE55ULL ^ splitmix64(s));
    auto pool = sample_candidates(e.predict, source, n_pool, sc);
    auto pruned = prune_then_mbr(pool, m_pruned, metric);
    pruned_scores[s] = chrf(pruned.chosen.tokens, gold);
    pruned_evals_per[s] = pruned.evaluations;

    // paired control: plain MBR over the first 5 samples of the same pool
    std::vector<Candidate> first5(pool.begin(), pool.begin() + 5);
    plain5_scores[s] = chrf(mbr_select(first5, metric).chosen.tokens, gold);

    auto base_pool = sample_candidates(e.baseline, source, m_base, sc);
    auto base = mbr_select(base_pool, metric);
    base_scores[s] = chrf(base.chosen.tokens, gold);
    base_evals_per[s] = base.evaluations;
  });
  for (std::size_t s = 0; s < e.eval_sources.size(); ++s) {
    pruned_evals += pruned_evals_per[s];
    base_evals += base_evals_per[s];
  }

  double mean_pruned = mean_of(pruned_scores);
  double mean_base = mean_of(base_scores);
  double mean_plain5 = mean_of(plain5_scores);
  c.check(mean_pruned >= mean_plain5,
          "pruned M=5 " + fmt(mean_pruned) + " below plain M=5 " + fmt(mean_plain5));
  c.check(pruned_evals == 20 * e.eval_sources.size(),
          "pruned evaluations " + std::to_string(pruned_evals));
  c.check(base_evals == 992 * e.eval_sources.size(), "baseline evaluations " + std::to_string(base_evals));
  c.check(mean_pruned >= mean_base,
          "mean chrF pruned " + fmt(mean_pruned) + " < baseline " + fmt(mean_base));

  double p = 1.0;
  if (mean_pruned > mean_base) {
    p = permutation_test(pruned_scores, base_scores, 10000, 2024);
    c.check(p < 0.05, "difference favors pruning but p = " + fmt(p));
  }
  std::printf("       chrF pruned=%s (20 evals) baseline=%s (992 evals) plain-M5=%s, 49.6x fewer, p=%s\n",
              fmt(mean_pruned).c_str(), fmt(mean_base).c_str(), fmt(mean_plain5).c_str(), fmt(p).c_str());
  c.finish();
}

// --- criterion 8: gradient correctness ----------------------------------------

void criterion_gradient() {
  Criterion c(8, "analytic gradients match central finite differences", 30.0);

  Rng seeds(808);
  for (int instance = 0; instance < 50; ++instance) {
    TaskRule rule = make_rule(RuleKind::SubstitutionCipher, 4 + seeds.below(5), seeds.next_u64());
    NoiseConfig noise;
    noise.substitution_rate = 0.5;
    noise.deletion_rate = 0.15;
    noise.insertion_rate = 0.15;
    noise.seed = seeds.next_u64();
    auto corpus = generate_corpus(rule, 40, 2, 6, noise);

    TrainConfig config;
    config.epochs = 1;
    config.hash_dim = 1u << 13;
    config.seed = seeds.next_u64();
    LogLinearModel model = train(corpus, config);

    const auto& ex = corpus[seeds.below(corpus.size())];
    auto grad = model.example_gradient(ex);
    c.check(!grad.empty(), "empty gradient");
    const double h = 1e-6;
    std::size_t checked = 0;
    for (const auto& [f, g] : grad) {
      if (checked >= 6) break;
      ++checked;
      double w0 = model.weight_at(f);
      model.set_weight(f, w0 + h);
      double up = model.example_loss(ex);
      model.set_weight(f, w0 - h);
      double down = model.example_loss(ex);
      model.set_weight(f, w0);
      double fd = (up - down) / (2.0 * h);
      double rel = std::abs(fd - g) / std::max({1.0, std::abs(fd), std::abs(g)});
      c.check(rel <= 1e-4, "instance " + std::to_string(instance) + " relative error " + fmt(rel));
    }
  }
  c.finish();
}

// --- criterion 9: statistics ----------------------------------------------------

void criterion_statistics() {
  Criterion c(9, "correlation statistics and permutation test", 30.0);

  c.check(std::abs(pearson({1, 2, 3, 4}, {1, 2, 3, 4}) - 1.0) <= 1e-12, "pearson identity");
  c.check(std::abs(pearson({1, 2, 3}, {6, 4, 2}) + 1.0) <= 1e-12, "pearson anti-linear");
  c.check(std::abs(pearson({1, 2, 3, 4, 5}, {1, 3, 2, 5, 4}) - 0.8) <= 1e-12, "pearson 0.8 case");
  c.check(std::abs(spearman({1, 2, 3, 4}, {1, 3, 2, 4}) - 0.8) <= 1e-12, "spearman 0.8 case");
  c.check(std::abs(spearman({1, 2, 3, 4, 5}, {1, 3, 2, 5, 4}) - 0.8) <= 1e-12, "spearman 5-point case");

  std::vector<double> a(120), b(120);
  Rng rng(909);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = b[i] = rng.uniform();
  c.check(permutation_test(a, b, 5000, 7) == 1.0, "identical inputs must give p = 1.0");

  for (std::size_t i = 0; i < a.size(); ++i) a[i] = b[i] + 0.25 + 0.05 * rng.uniform();
  double p = permutation_test(a, b, 5000, 7);
  c.check(p < 0.05, "separated samples gave p = " + fmt(p));
  c.check(p > 0.0, "p must stay positive");
  c.finish();
}

// --- criterion 10: full-pipeline determinism via the CLI -------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cmd(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

void criterion_determinism(const std::string& cli) {
  Criterion c(10, "quickstart pipeline is byte-identical across runs and thread counts", 900.0);

  // each run works in its own directory with relative paths, so identical
  // recipes must produce identical files, manifests included
  auto pipeline = [&](const fs::path& dir, unsigned threads) {
    fs::create_directories(dir);
    std::string in = "cd " + dir.string() + " && " + cli + " ";
    std::string t = std::to_string(threads);
    std::vector<std::string> cmds = {
        in + "gen-data --out corpus.tsv --rule-out rule.txt --n 2000 --vocab-size 10 --min-len 3 --max-len 7" +
            " --sub-rate 0.6 --del-rate 0.1 --ins-rate 0.1 --seed 5",
        in + "gen-data --out eval.tsv --rule-file rule.txt --n 24 --min-len 3 --max-len 7" +
            " --sub-rate 0 --del-rate 0 --ins-rate 0 --seed 6",
        in + "label --in corpus.tsv --rule-file rule.txt --out labeled.tsv --threads " + t,
        in + "fit-bins --in labeled.tsv --bins 10 --out bins.txt",
        in + "tag --in labeled.tsv --mode prediction --bins-file bins.txt --out tagged.tsv",
        in + "train --in tagged.tsv --mode prediction --bins-file bins.txt --epochs 4 --hash-dim 65536" +
            " --seed 7 --out model.bin",
        in + "sample --model model.bin --in eval.tsv --n 16 --seed 8 --threads " + t + " --out cands.jsonl",
        in + "mbr --candidates cands.jsonl --m 5 --prune qa --metric chrf --threads " + t +
            " --out selected.jsonl",
        in + "translate --model model.bin --in eval.tsv --threads " + t + " --out hyps.tsv",
        in + "eval alignment --model model.bin --in eval.tsv --rule-file rule.txt --samples 4 --seed 9" +
            " --threads " + t + " --out alignment.csv",
    };
    for (const auto& cmd : cmds)
      if (run_cmd(cmd) != 0) throw std::runtime_error("pipeline step failed: " + cmd);
  };

  const fs::path base = fs::temp_directory_path() / "qaware_acceptance";
  fs::remove_all(base);
  const fs::path ra = base / "run_a", rb = base / "run_b", rc = base / "run_c";

  try {
    pipeline(ra, 1);
    pipeline(rb, 1);
    pipeline(rc, 3);

    const std::vector<std::string> data_files = {"corpus.tsv",  "eval.tsv",       "labeled.tsv",
                                                 "bins.txt",    "tagged.tsv",     "model.bin",
                                                 "cands.jsonl", "selected.jsonl", "hyps.tsv",
                                                 "alignment.csv"};
    for (const auto& f : data_files) {
      c.check(slurp(ra / f) == slurp(rb / f), "rerun differs in " + f);
      c.check(slurp(ra / f) == slurp(rc / f), "thread count changed " + f);
      // identical recipes also reproduce the manifests byte for byte;
      // the threads=3 run records a different flag value, so skip it there
      c.check(slurp(ra / (f + ".manifest.json")) == slurp(rb / (f + ".manifest.json")),
              "rerun differs in manifest of " + f);
    }

    // replaying the recorded mbr step reproduces its output byte for byte
    std::string before = slurp(ra / "selected.jsonl");
    int rc_replay = run_cmd("cd " + ra.string() + " && " + cli + " --from-manifest selected.jsonl.manifest.json");
    c.check(rc_replay == 0, "--from-manifest replay failed");
    c.check(slurp(ra / "selected.jsonl") == before, "--from-manifest changed the output");
    c.check(!before.empty(), "pipeline produced an empty selection file");

    // a nonexistent input must fail with a nonzero exit code
    c.check(run_cmd(cli + " label --in " + (base / "missing.tsv").string() + " --rule-file " +
                    (ra / "rule.txt").string() + " --out " + (base / "x.tsv").string()) != 0,
            "missing input file did not fail");
  } catch (const std::exception& err) {
    c.check(false, err.what());
  }
  fs::remove_all(base);
  c.finish();
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli = argc > 1 ? fs::absolute(argv[1]).string() : "";

  criterion_binning();
  criterion_epsilon();
  criterion_mbr();
  criterion_rerank();

  std::printf("-- training experiment models (20k-pair noisy cipher corpus, B=10)\n");
  std::fflush(stdout);
  auto train_start = std::chrono::steady_clock::now();
  Experiment experiment = build_experiment();
  double train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - train_start).count();
  std::printf("-- trained baseline/prompting/prediction models in %.1fs\n", train_seconds);
  criterion_controllability(experiment, train_seconds);
  criterion_alignment(experiment, train_seconds);
  criterion_efficiency(experiment, train_seconds);

  criterion_gradient();
  criterion_statistics();

  if (cli.empty()) {
    std::printf("[FAIL] criterion 10: no CLI binary supplied (argv[1])\n");
    ++g_failures;
  } else {
    criterion_determinism(cli);
  }

  std::printf("%s: %d criterion(s) failed\n", g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
              g_failures);
  return g_failures == 0 ? 0 : 1;
}
