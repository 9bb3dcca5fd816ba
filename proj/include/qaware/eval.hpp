#pragma once

// Everything measured in the experiment harness: correlation statistics for
// the self-QE study, prompting controllability, predicted-bin vs. actual
// score alignment, the MBR cost/quality sweep, and the paired permutation
// significance test. All aggregation uses pairwise summation in a fixed
// order so results do not depend on the worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qaware/corpus.hpp"
#include "qaware/decode.hpp"
#include "qaware/metrics.hpp"
#include "qaware/model.hpp"
#include "qaware/quality.hpp"
#include "qaware/select.hpp"
#include "qaware/util.hpp"

namespace qaware {

// --- correlation statistics ----------------------------------------------

inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::runtime_error("pearson: length mismatch");
  if (xs.size() < 2) throw std::runtime_error("pearson: need at least 2 points");
  const double mx = mean_of(xs), my = mean_of(ys);
  std::vector<double> xy(xs.size()), xx(xs.size()), yy(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double dx = xs[i] - mx, dy = ys[i] - my;
    xy[i] = dx * dy;
    xx[i] = dx * dx;
    yy[i] = dy * dy;
  }
  double sxx = pairwise_sum(xx), syy = pairwise_sum(yy);
  if (sxx == 0.0 || syy == 0.0) throw std::runtime_error("pearson: zero variance");
  return pairwise_sum(xy) / std::sqrt(sxx * syy);
}

// Fractional (average) ranks; ties share the mean of their rank range.
inline std::vector<double> fractional_ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  return pearson(fractional_ranks(xs), fractional_ranks(ys));
}

// Fraction of segment pairs whose strict order agrees between prediction and
// gold. Pairs tied in both count as agreement, a tie on one side only counts
// half.
inline double pairwise_accuracy(const std::vector<double>& pred, const std::vector<double>& gold) {
  if (pred.size() != gold.size()) throw std::runtime_error("pairwise_accuracy: length mismatch");
  if (pred.size() < 2) throw std::runtime_error("pairwise_accuracy: need at least 2 points");
  double agree = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = i + 1; j < pred.size(); ++j) {
      ++pairs;
      double dp = pred[i] - pred[j], dg = gold[i] - gold[j];
      if (dp == 0.0 && dg == 0.0)
        agree += 1.0;
      else if (dp == 0.0 || dg == 0.0)
        agree += 0.5;
      else
        agree += (dp > 0) == (dg > 0) ? 1.0 : 0.0;
    }
  }
  return agree / static_cast<double>(pairs);
}

// Two-sided paired permutation test on the mean difference via random sign
// flips; add-one counting keeps p in (0, 1] and identical inputs give 1.0.
inline double permutation_test(const std::vector<double>& scores_a, const std::vector<double>& scores_b,
                               std::size_t iterations, std::uint64_t seed) {
  if (scores_a.size() != scores_b.size()) throw std::runtime_error("permutation_test: length mismatch");
  if (scores_a.size() < 2) throw std::runtime_error("permutation_test: need at least 2 pairs");
  if (iterations < 100) throw std::runtime_error("permutation_test: need at least 100 iterations");

  std::vector<double> diff(scores_a.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = scores_a[i] - scores_b[i];
  const double observed = std::abs(mean_of(diff));

  Rng rng(splitmix64(seed ^ 0x7065'726dULL));
  std::size_t at_least = 0;
  std::vector<double> flipped(diff.size());
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < diff.size(); ++i)
      flipped[i] = (rng.next_u64() & 1) ? -diff[i] : diff[i];
    if (std::abs(mean_of(flipped)) >= observed) ++at_least;
  }
  return static_cast<double>(at_least + 1) / static_cast<double>(iterations + 1);
}

// Linear-interpolation quartiles.
struct Quartiles {
  double q1 = 0.0, median = 0.0, q3 = 0.0;
};

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::runtime_error("quantile: empty input");
  double pos = q * static_cast<double>(sorted.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline Quartiles quartiles(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return {quantile_sorted(values, 0.25), quantile_sorted(values, 0.5), quantile_sorted(values, 0.75)};
}

// --- self-QE correlation (prediction model as a QE metric) ----------------

struct CorrelationReport {
  double pearson_system = 0.0;
  double pearson_segment = 0.0;
  double spearman = 0.0;
  double pairwise_accuracy = 0.0;
};

// Force-decodes the given target and reads the tag distribution at the
// position after it. Returns (bin, z, scalar) where the scalar b + exp(z)
// orders exactly like the lexicographic (b, z) pair.
struct QualityPrediction {
  int bin = 0;
  double logprob = 0.0;
  double scalar = 0.0;
};

inline QualityPrediction predict_quality(const LogLinearModel& model, const TokenSeq& source, const TokenSeq& target) {
  if (model.predict_tags().size() == 0)
    throw std::runtime_error("predict_quality: model was not trained with prediction tags");
  std::vector<double> dist = model.next_distribution(source, target);
  QualityPrediction best;
  double best_p = -1.0;
  for (std::size_t v = 0; v < model.vocab().size(); ++v) {
    auto bin = model.tag_bin(model.vocab().token(v));
    if (!bin) continue;
    if (dist[v] > best_p) {
      best_p = dist[v];
      best.bin = *bin;
    }
  }
  best.logprob = std::log(std::max(best_p, 1e-300));
  best.scalar = static_cast<double>(best.bin) + std::exp(best.logprob);
  return best;
}

// Segment-level stats over a labeled corpus plus a system-level Pearson over
// `num_systems` contiguous blocks (generate the eval corpus with graded noise
// so blocks differ in quality).
inline CorrelationReport correlation_report(const LogLinearModel& model, const std::vector<ParallelExample>& corpus,
                                            std::size_t num_systems, unsigned threads = 1) {
  if (corpus.size() < 2) throw std::runtime_error("correlation_report: need at least 2 examples");
  if (num_systems < 2 || num_systems > corpus.size())
    throw std::runtime_error("correlation_report: bad system count");

  std::vector<double> preds(corpus.size()), golds(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    const auto& ex = corpus[i];
    if (!ex.quality) throw std::runtime_error("correlation_report: example " + std::to_string(i) + " is unlabeled");
    preds[i] = predict_quality(model, ex.source, ex.target).scalar;
    golds[i] = *ex.quality;
  });

  CorrelationReport report;
  report.pearson_segment = pearson(preds, golds);
  report.spearman = spearman(preds, golds);
  report.pairwise_accuracy = pairwise_accuracy(preds, golds);

  std::vector<double> sys_pred(num_systems), sys_gold(num_systems);
  for (std::size_t s = 0; s < num_systems; ++s) {
    std::size_t lo = s * corpus.size() / num_systems;
    std::size_t hi = (s + 1) * corpus.size() / num_systems;
    sys_pred[s] = mean_of(std::span<const double>(preds).subspan(lo, hi - lo));
    sys_gold[s] = mean_of(std::span<const double>(golds).subspan(lo, hi - lo));
  }
  report.pearson_system = pearson(sys_pred, sys_gold);
  return report;
}

// --- prompting controllability --------------------------------------------

struct ControllabilityRow {
  int bin = 0;
  double mean_qe = 0.0;
  std::size_t count = 0;
};

// Decodes every source once per bin with that bin's tag appended and reports
// the mean oracle score per bin. Sampling (not argmax) is used so the
// conditional distribution, not just its mode, is visible in the outputs.
inline std::vector<ControllabilityRow> controllability_sweep(const LogLinearModel& model, const TaskRule& rule,
                                                             const std::vector<TokenSeq>& sources,
                                                             const BinTable& table, const SampleConfig& config,
                                                             std::size_t samples_per_source = 1, unsigned threads = 1) {
  if (model.mode() != ModelMode::Prompting && model.mode() != ModelMode::Combined)
    throw std::runtime_error("controllability_sweep: model was not trained with prompting tags");
  if (sources.empty()) throw std::runtime_error("controllability_sweep: no sources");

  const std::size_t bins = table.num_bins();
  std::vector<ControllabilityRow> rows(bins);
  std::vector<std::vector<double>> scores(bins, std::vector<double>(sources.size() * samples_per_source));

  parallel_for(bins * sources.size(), threads, [&](std::size_t work) {
    std::size_t b = work / sources.size();
    std::size_t s = work % sources.size();
    TokenSeq prompted = sources[s];
    prompted.push_back(table.tags.token_for(b));
    SampleConfig cfg = config;
    cfg.seed = splitmix64(config.seed ^ splitmix64((static_cast<std::uint64_t>(b) << 32) | s));
    auto cands = sample_candidates(model, prompted, samples_per_source, cfg);
    for (std::size_t k = 0; k < cands.size(); ++k)
      scores[b][s * samples_per_source + k] = score_synthetic_qe(rule, sources[s], cands[k].tokens);
  });

  for (std::size_t b = 0; b < bins; ++b) {
    rows[b].bin = static_cast<int>(b);
    rows[b].count = scores[b].size();
    rows[b].mean_qe = mean_of(scores[b]);
  }
  return rows;
}

// --- predicted-bin alignment ----------------------------------------------

struct AlignmentRow {
  int bin = 0;
  std::size_t count = 0;
  Quartiles actual;  // distribution of oracle scores within the bin
};

// Samples hypotheses, groups them by the model's own predicted bin and
// summarizes the actual oracle scores per group. Only populated bins appear.
inline std::vector<AlignmentRow> alignment_report(const LogLinearModel& model, const TaskRule& rule,
                                                  const std::vector<TokenSeq>& sources, const SampleConfig& config,
                                                  std::size_t samples_per_source = 1, unsigned threads = 1) {
  if (model.predict_tags().size() == 0)
    throw std::runtime_error("alignment_report: model was not trained with prediction tags");
  if (sources.empty()) throw std::runtime_error("alignment_report: no sources");

  std::vector<std::vector<std::pair<int, double>>> per_source(sources.size());
  parallel_for(sources.size(), threads, [&](std::size_t s) {
    SampleConfig cfg = config;
    cfg.seed = splitmix64(config.seed ^ splitmix64(s));
    auto cands = sample_candidates(model, sources[s], samples_per_source, cfg);
    for (const auto& c : cands)
      per_source[s].push_back({c.predicted_bin.value_or(0), score_synthetic_qe(rule, sources[s], c.tokens)});
  });

  std::map<int, std::vector<double>> grouped;
  for (const auto& chunk : per_source)
    for (const auto& [bin, score] : chunk) grouped[bin].push_back(score);

  std::vector<AlignmentRow> rows;
  for (const auto& [bin, scores] : grouped) {
    AlignmentRow row;
    row.bin = bin;
    row.count = scores.size();
    row.actual = quartiles(scores);
    rows.push_back(row);
  }
  return rows;
}

// --- MBR cost/quality sweep ------------------------------------------------

struct SweepRow {
  std::string method;
  std::size_t m = 0;
  double mean_utility = 0.0;
  double mean_synthetic_qe = 0.0;
  std::size_t total_evaluations = 0;
};

struct SweepModels {
  const LogLinearModel* baseline = nullptr;  // plain model: baseline-mbr, qe-rerank, map
  const LogLinearModel* prompt = nullptr;    // prompting model: qa-prompt-mbr
  const LogLinearModel* predict = nullptr;   // prediction model: qa-predict-prune-mbr
};

struct SweepOptions {
  std::vector<std::size_t> ms;
  std::vector<std::string> methods;
  std::size_t n_pool = 1024;  // sampling pool for qa-predict-prune-mbr
  std::string metric = "chrf";
  SampleConfig sample;
  unsigned threads = 1;
};

// Per-segment utilities per (method, M), exposed for significance testing.
using SweepSegmentScores = std::map<std::pair<std::string, std::size_t>, std::vector<double>>;

inline std::vector<SweepRow> mbr_sweep(const SweepModels& models, const TaskRule& rule,
                                       const std::vector<TokenSeq>& sources, const SweepOptions& options,
                                       SweepSegmentScores* per_segment = nullptr) {
  if (sources.empty()) throw std::runtime_error("mbr_sweep: no sources");
  if (options.ms.empty()) throw std::runtime_error("mbr_sweep: no candidate sizes");
  const UtilityMetric metric = utility_metric(options.metric);

  for (const auto& method : options.methods) {
    if (method != "baseline-mbr" && method != "qa-prompt-mbr" && method != "qa-predict-prune-mbr" &&
        method != "qe-rerank" && method != "map")
      throw std::runtime_error("mbr_sweep: unknown method '" + method + "'");
  }
  auto require_model = [&](const LogLinearModel* m, const std::string& method) {
    if (!m) throw std::runtime_error("mbr_sweep: method '" + method + "' needs a model that was not supplied");
    return m;
  };

  std::vector<TokenSeq> golds(sources.size());
  for (std::size_t s = 0; s < sources.size(); ++s) golds[s] = rule.apply(sources[s]);

  std::vector<SweepRow> rows;
  for (const auto& method : options.methods) {
    const std::size_t max_m = *std::max_element(options.ms.begin(), options.ms.end());

    // chosen[s][mi] for each source and candidate size
    std::vector<std::vector<TokenSeq>> chosen(sources.size(), std::vector<TokenSeq>(options.ms.size()));
    std::vector<std::vector<std::size_t>> evals(sources.size(), std::vector<std::size_t>(options.ms.size(), 0));

    parallel_for(sources.size(), options.threads, [&](std::size_t s) {
      SampleConfig cfg = options.sample;
      cfg.seed = splitmix64(options.sample.seed ^ splitmix64(s));

      if (method == "map") {
        const auto* m = require_model(models.baseline, method);
        Candidate c = greedy(*m, sources[s], cfg);
        for (std::size_t mi = 0; mi < options.ms.size(); ++mi) chosen[s][mi] = c.tokens;
        return;
      }
      if (method == "qe-rerank") {
        const auto* m = require_model(models.baseline, method);
        auto pool = sample_candidates(*m, sources[s], max_m, cfg);
        for (std::size_t mi = 0; mi < options.ms.size(); ++mi) {
          std::vector<Candidate> cands(pool.begin(), pool.begin() + static_cast<long>(options.ms[mi]));
          auto report = qe_rerank(cands, sources[s], [&](const TokenSeq& src, const TokenSeq& hyp) {
            return score_synthetic_qe(rule, src, hyp);
          });
          chosen[s][mi] = report.chosen.tokens;
          evals[s][mi] = report.evaluations;
        }
        return;
      }
      if (method == "baseline-mbr" || method == "qa-prompt-mbr") {
        TokenSeq input = sources[s];
        const LogLinearModel* m = nullptr;
        if (method == "baseline-mbr") {
          m = require_model(models.baseline, method);
        } else {
          m = require_model(models.prompt, method);
          input.push_back(m->prompt_tags().token_for(m->prompt_tags().size() - 1));
        }
        auto pool = sample_candidates(*m, input, max_m, cfg);
        for (std::size_t mi = 0; mi < options.ms.size(); ++mi) {
          std::vector<Candidate> cands(pool.begin(), pool.begin() + static_cast<long>(options.ms[mi]));
          auto report = mbr_select(cands, metric);
          chosen[s][mi] = report.chosen.tokens;
          evals[s][mi] = report.evaluations;
        }
        return;
      }
      // qa-predict-prune-mbr
      const auto* m = require_model(models.predict, method);
      auto pool = sample_candidates(*m, sources[s], options.n_pool, cfg);
      for (std::size_t mi = 0; mi < options.ms.size(); ++mi) {
        auto report = prune_then_mbr(pool, options.ms[mi], metric);
        chosen[s][mi] = report.chosen.tokens;
        evals[s][mi] = report.evaluations;
      }
    });

    for (std::size_t mi = 0; mi < options.ms.size(); ++mi) {
      SweepRow row;
      row.method = method;
      row.m = options.ms[mi];
      std::vector<double> utilities(sources.size()), oracle(sources.size());
      for (std::size_t s = 0; s < sources.size(); ++s) {
        utilities[s] = detail::utility_cell(metric, chosen[s][mi], golds[s]);
        oracle[s] = score_synthetic_qe(rule, sources[s], chosen[s][mi]);
        row.total_evaluations += evals[s][mi];
      }
      row.mean_utility = mean_of(utilities);
      row.mean_synthetic_qe = mean_of(oracle);
      if (per_segment) (*per_segment)[{method, row.m}] = utilities;
      rows.push_back(row);
    }
  }
  return rows;
}

// --- CSV output -------------------------------------------------------------

inline void write_correlation_csv(const CorrelationReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "pearson_system,pearson_segment,spearman,pairwise_accuracy\n";
  out << format_double(r.pearson_system) << ',' << format_double(r.pearson_segment) << ','
      << format_double(r.spearman) << ',' << format_double(r.pairwise_accuracy) << '\n';
}

inline void write_controllability_csv(const std::vector<ControllabilityRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "bin,mean_synthetic_qe,count\n";
  for (const auto& r : rows) out << r.bin << ',' << format_double(r.mean_qe) << ',' << r.count << '\n';
}

inline void write_alignment_csv(const std::vector<AlignmentRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "bin,count,q1,median,q3\n";
  for (const auto& r : rows)
    out << r.bin << ',' << r.count << ',' << format_double(r.actual.q1) << ',' << format_double(r.actual.median)
        << ',' << format_double(r.actual.q3) << '\n';
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "method,m,mean_utility,mean_synthetic_qe,total_evaluations\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.m << ',' << format_double(r.mean_utility) << ','
        << format_double(r.mean_synthetic_qe) << ',' << r.total_evaluations << '\n';
}

}  // namespace qaware
