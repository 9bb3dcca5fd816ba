#pragma once

// Hypothesis generation: greedy and beam MAP approximations, plus epsilon
// sampling for candidate lists. A trailing quality tag emitted by a
// prediction-mode model is stripped from the surface tokens; its bin and raw
// log-probability are reported separately on the Candidate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qaware/model.hpp"
#include "qaware/types.hpp"
#include "qaware/util.hpp"

namespace qaware {

struct Candidate {
  TokenSeq tokens;  // surface tokens, trailing tag stripped
  double logprob = 0.0;
  std::optional<int> predicted_bin;
  std::optional<double> bin_logprob;
  int source_id = -1;
};

struct SampleConfig {
  double epsilon = 0.02;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_len = 0;  // 0: derive from the source length

  void validate() const {
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::runtime_error("sample config: epsilon must lie in [0, 1)");
    if (!(temperature > 0.0)) throw std::runtime_error("sample config: temperature must be > 0");
  }
};

// Zeroes every token with probability below epsilon, then renormalizes the
// survivors' p^(1/T). If nothing survives, the argmax token keeps mass 1.
inline std::vector<double> epsilon_step(const std::vector<double>& dist, double epsilon, double temperature) {
  if (epsilon == 0.0 && temperature == 1.0) return dist;
  std::vector<double> out(dist.size(), 0.0);
  double pmax = 0.0;
  for (double p : dist) pmax = std::max(pmax, p);

  double z = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] >= epsilon) {
      // scaled by pmax before the exponent for numerical stability
      out[i] = pmax > 0.0 ? std::pow(dist[i] / pmax, 1.0 / temperature) : 0.0;
      z += out[i];
    }
  }
  if (z <= 0.0) {
    std::size_t arg = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    std::fill(out.begin(), out.end(), 0.0);
    out[arg] = 1.0;
    return out;
  }
  for (double& p : out) p /= z;
  return out;
}

namespace detail {

// Tokens that do not count toward the surface length: end-of-sequence and
// prediction-side tags.
inline std::vector<char> non_surface_mask(const SequenceModel& model) {
  std::vector<char> mask(model.vocab().size(), 0);
  mask[static_cast<std::size_t>(model.vocab().eos())] = 1;
  for (std::size_t v = 0; v < model.vocab().size(); ++v)
    if (model.tag_bin(model.vocab().token(v))) mask[v] = 1;
  return mask;
}

inline std::size_t surface_limit(const TokenSeq& source, const SampleConfig& config) {
  std::size_t n = source.size();
  if (n > 0 && is_tag_shaped(source.back())) --n;  // prompt tag is not content
  std::size_t limit = n + LogLinearModel::kMaxExtraLength;
  if (config.max_len > 0) limit = std::min(limit, config.max_len);
  return limit;
}

// At the surface cap only non-surface tokens may be chosen.
inline void mask_surface(std::vector<double>& dist, const std::vector<char>& non_surface, int eos) {
  double z = 0.0;
  for (std::size_t v = 0; v < dist.size(); ++v) {
    if (!non_surface[v]) dist[v] = 0.0;
    z += dist[v];
  }
  if (z <= 0.0) {
    std::fill(dist.begin(), dist.end(), 0.0);
    dist[static_cast<std::size_t>(eos)] = 1.0;
    return;
  }
  for (double& p : dist) p /= z;
}

struct EmittedToken {
  int index;
  double raw_logprob;  // log of the model's (smoothed) probability
};

// Builds the Candidate from the emitted tokens: strips one trailing tag into
// (predicted_bin, bin_logprob) and excludes its log-probability from the
// candidate's total.
inline Candidate finalize(const SequenceModel& model, const std::vector<EmittedToken>& emitted, double eos_logprob,
                          bool saw_eos) {
  Candidate cand;
  double total = saw_eos ? eos_logprob : 0.0;
  std::size_t end = emitted.size();
  if (end > 0) {
    const std::string& last = model.vocab().token(static_cast<std::size_t>(emitted[end - 1].index));
    if (auto bin = model.tag_bin(last)) {
      cand.predicted_bin = bin;
      cand.bin_logprob = emitted[end - 1].raw_logprob;
      --end;
    }
  }
  for (std::size_t i = 0; i < end; ++i) {
    cand.tokens.push_back(model.vocab().token(static_cast<std::size_t>(emitted[i].index)));
    total += emitted[i].raw_logprob;
  }
  cand.logprob = total;
  return cand;
}

}  // namespace detail

// Argmax token at every step until end-of-sequence or the length cap.
inline Candidate greedy(const SequenceModel& model, const TokenSeq& source, const SampleConfig& config = {}) {
  config.validate();
  const auto non_surface = detail::non_surface_mask(model);
  const int eos = model.vocab().eos();
  const std::size_t limit = detail::surface_limit(source, config);

  std::vector<detail::EmittedToken> emitted;
  TokenSeq prefix;
  std::size_t surface = 0;
  bool saw_eos = false;
  double eos_logprob = 0.0;

  while (emitted.size() < limit + 2) {
    std::vector<double> dist = model.next_distribution(source, prefix);
    std::vector<double> choice = dist;
    if (surface >= limit) detail::mask_surface(choice, non_surface, eos);
    int pick = static_cast<int>(std::max_element(choice.begin(), choice.end()) - choice.begin());
    double lp = std::log(std::max(dist[static_cast<std::size_t>(pick)], 1e-300));
    if (pick == eos) {
      saw_eos = true;
      eos_logprob = lp;
      break;
    }
    emitted.push_back({pick, lp});
    if (!non_surface[static_cast<std::size_t>(pick)]) ++surface;
    prefix.push_back(model.vocab().token(static_cast<std::size_t>(pick)));
  }
  return detail::finalize(model, emitted, eos_logprob, saw_eos);
}

// Beam search over cumulative log-probability, no length normalization.
// width == 1 coincides with greedy decoding.
inline Candidate beam(const SequenceModel& model, const TokenSeq& source, std::size_t width,
                      const SampleConfig& config = {}) {
  if (width < 1) throw std::runtime_error("beam: width must be >= 1");
  config.validate();
  const auto non_surface = detail::non_surface_mask(model);
  const int eos = model.vocab().eos();
  const std::size_t limit = detail::surface_limit(source, config);
  const std::size_t vocab_size = model.vocab().size();

  struct Beam {
    TokenSeq prefix;
    std::vector<detail::EmittedToken> emitted;
    double score = 0.0;
    std::size_t surface = 0;
  };
  struct Finished {
    std::vector<detail::EmittedToken> emitted;
    double score = 0.0;
    double eos_logprob = 0.0;
    bool saw_eos = false;
  };

  std::vector<Beam> live(1);
  std::optional<Finished> best;

  for (std::size_t step = 0; step < limit + 2 && !live.empty(); ++step) {
    struct Expansion {
      std::size_t beam;
      int token;
      double raw_logprob;
      double score;
    };
    std::vector<Expansion> expansions;
    expansions.reserve(live.size() * vocab_size);

    for (std::size_t b = 0; b < live.size(); ++b) {
      std::vector<double> dist = model.next_distribution(source, live[b].prefix);
      std::vector<double> choice = dist;
      if (live[b].surface >= limit) detail::mask_surface(choice, non_surface, eos);
      for (std::size_t v = 0; v < vocab_size; ++v) {
        if (choice[v] <= 0.0) continue;
        double lp = std::log(std::max(dist[v], 1e-300));
        expansions.push_back({b, static_cast<int>(v), lp, live[b].score + lp});
      }
    }
    std::sort(expansions.begin(), expansions.end(), [](const Expansion& a, const Expansion& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.beam != b.beam) return a.beam < b.beam;
      return a.token < b.token;
    });

    // the top `width` expansions fill the beam slots; an end-of-sequence
    // expansion finishes its hypothesis in place
    std::vector<Beam> next;
    std::size_t taken = 0;
    for (const auto& e : expansions) {
      if (taken >= width) break;
      ++taken;
      if (e.token == eos) {
        if (!best || e.score > best->score)
          best = Finished{live[e.beam].emitted, e.score, e.raw_logprob, true};
        continue;
      }
      Beam nb = live[e.beam];
      nb.emitted.push_back({e.token, e.raw_logprob});
      nb.prefix.push_back(model.vocab().token(static_cast<std::size_t>(e.token)));
      nb.score = e.score;
      if (!non_surface[static_cast<std::size_t>(e.token)]) ++nb.surface;
      next.push_back(std::move(nb));
    }
    // log-probabilities only decrease, so beams below the best finished
    // hypothesis can never win
    if (best) {
      std::vector<Beam> kept;
      for (auto& beam : next)
        if (beam.score > best->score) kept.push_back(std::move(beam));
      next = std::move(kept);
    }
    live = std::move(next);
  }

  if (!best) {
    // step cap exhausted with nothing finished; fall back to the best live
    // prefix (possible only for degenerate untrained models)
    if (live.empty()) return Candidate{};
    const Beam* top = &live.front();
    for (const auto& b : live)
      if (b.score > top->score) top = &b;
    return detail::finalize(model, top->emitted, 0.0, false);
  }
  return detail::finalize(model, best->emitted, best->eos_logprob, best->saw_eos);
}

// n epsilon-sampled hypotheses; candidate i draws from substream(seed, i), so
// the result is one multiset regardless of thread count or schedule.
inline std::vector<Candidate> sample_candidates(const SequenceModel& model, const TokenSeq& source, std::size_t n,
                                                const SampleConfig& config, unsigned threads = 1) {
  if (n < 1) throw std::runtime_error("sample_candidates: n must be >= 1");
  config.validate();
  const auto non_surface = detail::non_surface_mask(model);
  const int eos = model.vocab().eos();
  const std::size_t limit = detail::surface_limit(source, config);
  const bool has_predict_tags = [&] {
    for (std::size_t v = 0; v < model.vocab().size(); ++v)
      if (model.tag_bin(model.vocab().token(v))) return true;
    return false;
  }();

  std::vector<Candidate> out(n);
  parallel_for(n, threads, [&](std::size_t i) {
    Rng rng = substream(config.seed, i);
    std::vector<detail::EmittedToken> emitted;
    TokenSeq prefix;
    std::size_t surface = 0;
    bool saw_eos = false;
    double eos_logprob = 0.0;

    while (emitted.size() < limit + 2) {
      std::vector<double> dist = model.next_distribution(source, prefix);
      std::vector<double> choice = dist;
      if (surface >= limit) detail::mask_surface(choice, non_surface, eos);
      choice = epsilon_step(choice, config.epsilon, config.temperature);

      double u = rng.uniform();
      double cum = 0.0;
      int pick = -1;
      for (std::size_t v = 0; v < choice.size(); ++v) {
        cum += choice[v];
        if (u < cum) {
          pick = static_cast<int>(v);
          break;
        }
      }
      if (pick < 0) {  // floating-point residue: take the last nonzero entry
        for (std::size_t v = choice.size(); v-- > 0;)
          if (choice[v] > 0.0) {
            pick = static_cast<int>(v);
            break;
          }
      }

      double lp = std::log(std::max(dist[static_cast<std::size_t>(pick)], 1e-300));
      if (pick == eos) {
        saw_eos = true;
        eos_logprob = lp;
        break;
      }
      emitted.push_back({pick, lp});
      if (!non_surface[static_cast<std::size_t>(pick)]) ++surface;
      prefix.push_back(model.vocab().token(static_cast<std::size_t>(pick)));
    }

    Candidate cand = detail::finalize(model, emitted, eos_logprob, saw_eos);
    if (has_predict_tags && !cand.predicted_bin) {
      // hypotheses without a parseable tag fall back to the lowest bin
      cand.predicted_bin = 0;
      cand.bin_logprob = -std::numeric_limits<double>::infinity();
    }
    out[i] = std::move(cand);
  });
  return out;
}

}  // namespace qaware
