#pragma once

// Line-oriented JSON records for candidate lists and selection reports.
// A candidate whose tag fell back to the lowest bin serializes its
// bin_logprob as null (it is -inf in memory).

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qaware/decode.hpp"
#include "qaware/select.hpp"
#include "qaware/types.hpp"

namespace qaware {

inline nlohmann::json candidate_to_json(const Candidate& c) {
  nlohmann::json j;
  j["source_id"] = c.source_id;
  j["tokens"] = c.tokens;
  j["logprob"] = c.logprob;
  if (c.predicted_bin) {
    j["predicted_bin"] = *c.predicted_bin;
    if (c.bin_logprob && std::isfinite(*c.bin_logprob))
      j["bin_logprob"] = *c.bin_logprob;
    else
      j["bin_logprob"] = nullptr;
  }
  return j;
}

inline Candidate candidate_from_json(const nlohmann::json& j) {
  Candidate c;
  c.source_id = j.at("source_id").get<int>();
  c.tokens = j.at("tokens").get<TokenSeq>();
  c.logprob = j.at("logprob").get<double>();
  if (j.contains("predicted_bin")) {
    c.predicted_bin = j.at("predicted_bin").get<int>();
    if (j.contains("bin_logprob") && !j.at("bin_logprob").is_null())
      c.bin_logprob = j.at("bin_logprob").get<double>();
    else
      c.bin_logprob = -std::numeric_limits<double>::infinity();
  }
  return c;
}

inline void write_candidates(const std::vector<Candidate>& candidates, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& c : candidates) out << candidate_to_json(c).dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<Candidate> read_candidates(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<Candidate> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    try {
      out.push_back(candidate_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error("candidates file " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline nlohmann::json report_to_json(const SelectionReport& r) {
  nlohmann::json j;
  j["source_id"] = r.source_id;
  j["method"] = r.method;
  j["m"] = r.candidate_count;
  j["evaluations"] = r.evaluations;
  j["chosen"] = r.chosen.tokens;
  j["score"] = r.chosen_score;
  return j;
}

inline void write_reports(const std::vector<SelectionReport>& reports, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& r : reports) out << report_to_json(r).dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace qaware
