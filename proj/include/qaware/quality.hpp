#pragma once

// Quality scoring and discretization: the synthetic QE oracle, equal-mass
// score binning, and the "[b]" tag tokens attached to sources (prompting)
// or targets (prediction).

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qaware/corpus.hpp"
#include "qaware/metrics.hpp"
#include "qaware/types.hpp"

namespace qaware {

// Reference-free from the caller's side: the oracle knows the task rule the
// way a learned QE model knows the task, and scores a hypothesis by its
// normalized edit similarity to the gold translation. Range [0, 1].
inline double score_synthetic_qe(const TaskRule& rule, const TokenSeq& source, const TokenSeq& hypothesis) {
  TokenSeq gold = rule.apply(source);
  return edit_similarity(hypothesis, gold);
}

// Ordered bin identifiers; bin b is tagged with the single token "[id_b]".
struct TagSet {
  std::vector<std::string> identifiers;

  std::size_t size() const { return identifiers.size(); }

  std::string token_for(std::size_t bin) const {
    if (bin >= identifiers.size()) throw std::runtime_error("bin out of range: " + std::to_string(bin));
    return "[" + identifiers[bin] + "]";
  }

  // Bin index of a tag token, or nullopt if the token is not a registered tag.
  std::optional<int> bin_for(const std::string& token) const {
    if (!is_tag_shaped(token)) return std::nullopt;
    std::string inner = token.substr(1, token.size() - 2);
    for (std::size_t b = 0; b < identifiers.size(); ++b)
      if (identifiers[b] == inner) return static_cast<int>(b);
    return std::nullopt;
  }

  void validate() const {
    if (identifiers.empty()) throw std::runtime_error("tag set: no identifiers");
    for (std::size_t i = 0; i < identifiers.size(); ++i) {
      validate_token(token_for(i));
      for (std::size_t j = i + 1; j < identifiers.size(); ++j)
        if (identifiers[i] == identifiers[j])
          throw std::runtime_error("tag set: duplicate identifier '" + identifiers[i] + "'");
    }
  }
};

// "digits" -> 0..9..., "letters" -> a..z...; anything else is parsed as a
// comma-separated identifier list.
inline TagSet make_identifiers(const std::string& scheme, std::size_t count) {
  TagSet tags;
  if (scheme == "digits") {
    for (std::size_t i = 0; i < count; ++i) tags.identifiers.push_back(std::to_string(i));
  } else if (scheme == "letters") {
    if (count > 26) throw std::runtime_error("letter identifiers support at most 26 bins");
    for (std::size_t i = 0; i < count; ++i) tags.identifiers.push_back(std::string(1, static_cast<char>('a' + i)));
  } else {
    std::size_t start = 0;
    while (start <= scheme.size()) {
      std::size_t comma = scheme.find(',', start);
      tags.identifiers.push_back(scheme.substr(start, comma == std::string::npos ? comma : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (tags.identifiers.size() != count)
      throw std::runtime_error("identifier list has " + std::to_string(tags.identifiers.size()) +
                               " entries, expected " + std::to_string(count));
  }
  tags.validate();
  return tags;
}

inline std::string format_tag(const TagSet& tags, std::size_t bin) { return tags.token_for(bin); }

// Strips exactly one trailing tag token if present. Unregistered bracket
// tokens are left alone and reported as absent.
inline std::pair<std::optional<int>, TokenSeq> parse_tag(const TagSet& tags, const TokenSeq& tokens) {
  if (!tokens.empty()) {
    if (auto bin = tags.bin_for(tokens.back())) {
      TokenSeq stripped(tokens.begin(), tokens.end() - 1);
      return {bin, std::move(stripped)};
    }
  }
  return {std::nullopt, tokens};
}

// Cut-off points c_0..c_B (ascending) mapping scores onto B bins,
// bin i = [c_i, c_{i+1}), with total clamping outside the covered range.
struct BinTable {
  std::vector<double> cutpoints;  // size num_bins + 1
  TagSet tags;

  std::size_t num_bins() const { return tags.size(); }
};

// Equal-mass binning from order statistics: boundary i sits between sorted
// ranks floor(i*N/B)-1 and floor(i*N/B), so each bin holds floor(N/B) or
// ceil(N/B) of the inputs. Ties across a boundary collapse it (the tied value
// belongs to the higher bin); the resulting bins may then be uneven or empty.
inline BinTable fit_bins(const std::vector<double>& scores, std::size_t num_bins, const TagSet& identifiers) {
  if (num_bins < 1) throw std::runtime_error("fit_bins: need at least one bin");
  if (scores.size() < num_bins)
    throw std::runtime_error("fit_bins: more bins (" + std::to_string(num_bins) + ") than scores (" +
                             std::to_string(scores.size()) + ")");
  if (identifiers.size() != num_bins)
    throw std::runtime_error("fit_bins: identifier count does not match bin count");
  identifiers.validate();

  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  std::size_t distinct = 1;
  for (std::size_t i = 1; i < n; ++i)
    if (sorted[i] != sorted[i - 1]) ++distinct;
  if (distinct < num_bins)
    std::cerr << "warning: only " << distinct << " distinct scores for " << num_bins
              << " bins; some bins will be degenerate\n";

  BinTable table;
  table.tags = identifiers;
  table.cutpoints.resize(num_bins + 1);
  table.cutpoints.front() = sorted.front();
  table.cutpoints.back() = sorted.back();
  for (std::size_t i = 1; i < num_bins; ++i) {
    std::size_t k = i * n / num_bins;
    double lo = sorted[k - 1], hi = sorted[k];
    table.cutpoints[i] = lo < hi ? lo + (hi - lo) / 2.0 : hi;
  }
  return table;
}

// Unique i with c_i <= q < c_{i+1}; scores outside the covered range clamp to
// the extreme bins, so assignment is total.
inline int assign_bin(double score, const BinTable& table) {
  const auto& c = table.cutpoints;
  auto it = std::upper_bound(c.begin(), c.end(), score);
  long idx = static_cast<long>(it - c.begin()) - 1;
  idx = std::max(0L, std::min(idx, static_cast<long>(table.num_bins()) - 1));
  return static_cast<int>(idx);
}

enum class TagMode { Prompting, Prediction, Combined };

inline std::string tag_mode_name(TagMode m) {
  switch (m) {
    case TagMode::Prompting: return "prompting";
    case TagMode::Prediction: return "prediction";
    default: return "combined";
  }
}

inline TagMode tag_mode_from_name(const std::string& name) {
  if (name == "prompting") return TagMode::Prompting;
  if (name == "prediction") return TagMode::Prediction;
  if (name == "combined") return TagMode::Combined;
  throw std::runtime_error("unknown tag mode: '" + name + "'");
}

struct TagScheme {
  TagMode mode = TagMode::Prompting;
  BinTable prompt_table;   // used in prompting and combined modes
  BinTable predict_table;  // used in prediction and combined modes

  void validate() const {
    if (mode != TagMode::Prediction) prompt_table.tags.validate();
    if (mode != TagMode::Prompting) predict_table.tags.validate();
    if (mode == TagMode::Combined && predict_table.num_bins() % prompt_table.num_bins() != 0)
      throw std::runtime_error("combined mode requires the prediction bin count to be a multiple of the prompt bin count");
  }
};

// Appends the bin tag of each example's quality score: prompting tags the
// source, prediction tags the target, combined does both with its two
// tables. Re-tagging an already tagged corpus is an error.
inline std::vector<ParallelExample> tag_corpus(const std::vector<ParallelExample>& examples, const TagScheme& scheme) {
  scheme.validate();
  std::vector<ParallelExample> out;
  out.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    if (!ex.quality)
      throw std::runtime_error("tag_corpus: example " + std::to_string(i) + " has no quality score");
    ParallelExample tagged = ex;
    if (scheme.mode != TagMode::Prediction) {
      if (!tagged.source.empty() && is_tag_shaped(tagged.source.back()))
        throw std::runtime_error("tag_corpus: example " + std::to_string(i) + " source already tagged");
      int b = assign_bin(*ex.quality, scheme.prompt_table);
      tagged.source.push_back(scheme.prompt_table.tags.token_for(static_cast<std::size_t>(b)));
    }
    if (scheme.mode != TagMode::Prompting) {
      if (!tagged.target.empty() && is_tag_shaped(tagged.target.back()))
        throw std::runtime_error("tag_corpus: example " + std::to_string(i) + " target already tagged");
      int b = assign_bin(*ex.quality, scheme.predict_table);
      tagged.target.push_back(scheme.predict_table.tags.token_for(static_cast<std::size_t>(b)));
      tagged.bin = b;
    }
    if (scheme.mode == TagMode::Prompting) tagged.bin = assign_bin(*ex.quality, scheme.prompt_table);
    out.push_back(std::move(tagged));
  }
  return out;
}

// --- bin table file: first line B, then B+1 cutpoints, then B identifiers.

inline void write_bins(const BinTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << table.num_bins() << '\n';
  for (double c : table.cutpoints) out << format_double(c) << '\n';
  for (const auto& id : table.tags.identifiers) out << id << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline BinTable read_bins(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw std::runtime_error("bins file truncated: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  std::size_t b = static_cast<std::size_t>(std::stoul(next_line()));
  BinTable table;
  table.cutpoints.resize(b + 1);
  for (std::size_t i = 0; i <= b; ++i) table.cutpoints[i] = std::stod(next_line());
  for (std::size_t i = 0; i < b; ++i) table.tags.identifiers.push_back(next_line());
  table.tags.validate();
  if (!std::is_sorted(table.cutpoints.begin(), table.cutpoints.end()))
    throw std::runtime_error("bins file: cutpoints not ascending: " + path);
  return table;
}

}  // namespace qaware
