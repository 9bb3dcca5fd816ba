// qaware: batch driver for the quality-aware translation toolkit.
//
// Pipeline order: gen-data -> label -> fit-bins -> tag -> train ->
// {translate | sample -> mbr/rerank} -> sweep/eval. Every run writes a
// manifest next to its primary output; --from-manifest replays a run.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qaware/qaware.hpp"

using namespace qaware;
using nlohmann::json;

namespace {

// Sources: either plain token lines or corpus TSV (first field taken).
std::vector<TokenSeq> read_sources(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<TokenSeq> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::size_t tab = line.find('\t');
    out.push_back(split_tokens(tab == std::string::npos ? line : line.substr(0, tab)));
  }
  if (out.empty()) throw std::runtime_error("no sources in " + path);
  return out;
}

std::vector<double> read_score_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.push_back(parse_double_field(line, line_no));
  }
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t comma = csv.find(',', start);
    std::string item = csv.substr(start, comma == std::string::npos ? comma : comma - start);
    if (!item.empty()) out.push_back(std::stoul(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string> parse_string_list(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t comma = csv.find(',', start);
    std::string item = csv.substr(start, comma == std::string::npos ? comma : comma - start);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

// Decode-time prompt resolution: "auto" prompts the top quality level when
// the model was trained with prompting tags and stays unprompted otherwise.
std::optional<std::string> resolve_prompt(const LogLinearModel& model, const std::string& spec,
                                          const std::string& command) {
  if (spec == "none") return std::nullopt;
  const TagSet& tags = model.prompt_tags();
  if (spec == "auto") {
    if (tags.size() == 0) return std::nullopt;
    return tags.token_for(tags.size() - 1);
  }
  if (tags.size() == 0)
    throw std::runtime_error(command + ": --prompt-bin needs a model trained with prompting tags");
  std::size_t bin = spec == "max" ? tags.size() - 1 : std::stoul(spec);
  return tags.token_for(bin);
}

// Candidates grouped by source id, in first-appearance order.
std::vector<std::pair<int, std::vector<Candidate>>> group_by_source(const std::vector<Candidate>& cands) {
  std::vector<std::pair<int, std::vector<Candidate>>> groups;
  std::map<int, std::size_t> where;
  for (const auto& c : cands) {
    auto it = where.find(c.source_id);
    if (it == where.end()) {
      where[c.source_id] = groups.size();
      groups.push_back({c.source_id, {}});
      groups.back().second.push_back(c);
    } else {
      groups[it->second].second.push_back(c);
    }
  }
  return groups;
}

void emit_manifest(const std::string& command, const json& params, const std::vector<std::string>& inputs,
                   const std::vector<std::string>& outputs) {
  RunManifest m;
  m.command = command;
  m.params = params;
  m.inputs = inputs;
  m.outputs = outputs;
  if (outputs.empty()) throw std::runtime_error("internal: no outputs for manifest");
  write_manifest(m, outputs.front() + ".manifest.json");
}

// --- gen-data ---------------------------------------------------------------

struct GenDataParams {
  std::string out;
  std::string rule_out;
  std::string rule_file;  // reuse an existing rule instead of creating one
  std::string kind = "substitution-cipher";
  bool identity = false;
  std::size_t vocab_size = 12;
  std::size_t n = 10000;
  std::size_t min_len = 3;
  std::size_t max_len = 9;
  double sub_rate = 0.6;
  double del_rate = 0.1;
  double ins_rate = 0.1;
  std::string spread = "uniform";
  std::uint64_t seed = 1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GenDataParams, out, rule_out, rule_file, kind, identity, vocab_size, n, min_len,
                                   max_len, sub_rate, del_rate, ins_rate, spread, seed)

void run_gen_data(const GenDataParams& p) {
  TaskRule rule;
  std::vector<std::string> inputs, outputs = {p.out};
  if (!p.rule_file.empty()) {
    rule = read_rule(p.rule_file);
    inputs.push_back(p.rule_file);
  } else {
    rule = make_rule(rule_kind_from_name(p.kind), p.vocab_size, p.seed, p.identity);
  }
  NoiseConfig noise;
  noise.substitution_rate = p.sub_rate;
  noise.deletion_rate = p.del_rate;
  noise.insertion_rate = p.ins_rate;
  noise.spread = noise_spread_from_name(p.spread);
  noise.seed = p.seed;

  auto corpus = generate_corpus(rule, p.n, p.min_len, p.max_len, noise);
  write_corpus(corpus, p.out);
  if (!p.rule_out.empty()) {
    write_rule(rule, p.rule_out);
    outputs.push_back(p.rule_out);
  }
  emit_manifest("gen-data", json(p), inputs, outputs);
  std::cerr << "wrote " << corpus.size() << " examples to " << p.out << "\n";
}

// --- label -------------------------------------------------------------------

struct LabelParams {
  std::string in;
  std::string rule_file;
  std::string out;
  unsigned threads = 1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LabelParams, in, rule_file, out, threads)

void run_label(const LabelParams& p) {
  TaskRule rule = read_rule(p.rule_file);
  auto corpus = read_corpus(p.in);
  parallel_for(corpus.size(), p.threads, [&](std::size_t i) {
    corpus[i].quality = score_synthetic_qe(rule, corpus[i].source, corpus[i].target);
  });
  write_corpus(corpus, p.out);
  emit_manifest("label", json(p), {p.in, p.rule_file}, {p.out});
  std::cerr << "labeled " << corpus.size() << " examples\n";
}

// --- fit-bins ------------------------------------------------------------------

struct FitBinsParams {
  std::string in;
  std::size_t bins = 10;
  std::string identifiers = "digits";
  std::string out;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FitBinsParams, in, bins, identifiers, out)

void run_fit_bins(const FitBinsParams& p) {
  auto corpus = read_corpus(p.in);
  std::vector<double> scores;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].quality)
      throw std::runtime_error("fit-bins: example " + std::to_string(i) + " has no quality score (run label first)");
    scores.push_back(*corpus[i].quality);
  }
  BinTable table = fit_bins(scores, p.bins, make_identifiers(p.identifiers, p.bins));
  write_bins(table, p.out);
  emit_manifest("fit-bins", json(p), {p.in}, {p.out});
  std::cerr << "fit " << p.bins << " bins over " << scores.size() << " scores\n";
}

// --- tag -------------------------------------------------------------------------

struct TagParams {
  std::string in;
  std::string mode = "prompting";
  std::string bins_file;
  std::string predict_bins_file;  // combined mode only
  std::string out;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TagParams, in, mode, bins_file, predict_bins_file, out)

void run_tag(const TagParams& p) {
  auto corpus = read_corpus(p.in);
  TagScheme scheme;
  scheme.mode = tag_mode_from_name(p.mode);
  std::vector<std::string> inputs = {p.in, p.bins_file};
  if (scheme.mode == TagMode::Prompting) {
    scheme.prompt_table = read_bins(p.bins_file);
  } else if (scheme.mode == TagMode::Prediction) {
    scheme.predict_table = read_bins(p.bins_file);
  } else {
    if (p.predict_bins_file.empty())
      throw std::runtime_error("tag: combined mode needs --predict-bins-file");
    scheme.prompt_table = read_bins(p.bins_file);
    scheme.predict_table = read_bins(p.predict_bins_file);
    inputs.push_back(p.predict_bins_file);
  }
  auto tagged = tag_corpus(corpus, scheme);
  write_corpus(tagged, p.out);
  emit_manifest("tag", json(p), inputs, {p.out});
  std::cerr << "tagged " << tagged.size() << " examples (" << p.mode << ")\n";
}

// --- train -----------------------------------------------------------------------

struct TrainParams {
  std::string in;
  std::string mode = "plain";
  std::string bins_file;          // prompting/prediction: that side's table
  std::string predict_bins_file;  // combined mode only
  std::size_t epochs = 12;
  double lr = 0.2;
  std::size_t hash_dim = 1u << 20;
  double l2 = 0.0;
  std::uint64_t seed = 1;
  std::string out;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrainParams, in, mode, bins_file, predict_bins_file, epochs, lr, hash_dim, l2,
                                   seed, out)

void run_train(const TrainParams& p) {
  auto corpus = read_corpus(p.in);
  TrainConfig config;
  config.epochs = p.epochs;
  config.learning_rate = p.lr;
  config.hash_dim = p.hash_dim;
  config.l2 = p.l2;
  config.seed = p.seed;
  config.mode = model_mode_from_name(p.mode);

  std::vector<std::string> inputs = {p.in};
  auto tags_from = [&](const std::string& path) {
    if (path.empty())
      throw std::runtime_error("train: mode '" + p.mode + "' needs the bin table the corpus was tagged with");
    inputs.push_back(path);
    return read_bins(path).tags;
  };
  if (config.mode == ModelMode::Prompting) config.prompt_tags = tags_from(p.bins_file);
  if (config.mode == ModelMode::Prediction) config.predict_tags = tags_from(p.bins_file);
  if (config.mode == ModelMode::Combined) {
    config.prompt_tags = tags_from(p.bins_file);
    config.predict_tags = tags_from(p.predict_bins_file);
  }

  LogLinearModel model = train(corpus, config);
  for (std::size_t e = 0; e < model.epoch_losses().size(); ++e)
    std::cerr << "epoch " << e << " loss " << model.epoch_losses()[e] << "\n";
  save_model(model, p.out);
  emit_manifest("train", json(p), inputs, {p.out});
}

// --- translate ----------------------------------------------------------------------

struct TranslateParams {
  std::string model;
  std::string in;
  std::string prompt_bin = "auto";  // auto | none | max | <bin index>
  std::string decoder = "greedy";
  std::size_t beam_width = 4;
  std::size_t max_len = 0;
  unsigned threads = 1;
  std::string out;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TranslateParams, model, in, prompt_bin, decoder, beam_width, max_len, threads, out)

void run_translate(const TranslateParams& p) {
  LogLinearModel model = load_model(p.model);
  auto sources = read_sources(p.in);
  std::optional<std::string> prompt = resolve_prompt(model, p.prompt_bin, "translate");

  SampleConfig config;
  config.max_len = p.max_len;
  std::vector<Candidate> outputs(sources.size());
  parallel_for(sources.size(), p.threads, [&](std::size_t i) {
    TokenSeq input = sources[i];
    if (prompt) input.push_back(*prompt);
    outputs[i] = p.decoder == "beam" ? beam(model, input, p.beam_width, config) : greedy(model, input, config);
  });

  std::ofstream out(p.out, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + p.out);
  for (std::size_t i = 0; i < sources.size(); ++i)
    out << join_tokens(sources[i]) << '\t' << join_tokens(outputs[i].tokens) << '\n';
  emit_manifest("translate", json(p), {p.model, p.in}, {p.out});
  std::cerr << "translated " << sources.size() << " sentences\n";
}

// --- sample --------------------------------------------------------------------------

struct SampleParams {
  std::string model;
  std::string in;
  std::size_t n = 1024;
  double epsilon = 0.02;
  double temperature = 1.0;
  std::string prompt_bin = "auto";
  std::uint64_t seed = 1;
  std::size_t max_len = 0;
  unsigned threads = 1;
  std::string out;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SampleParams, model, in, n, epsilon, temperature, prompt_bin, seed, max_len,
                                   threads, out)

void run_sample(const SampleParams& p) {
  LogLinearModel model = load_model(p.model);
  auto sources = read_sources(p.in);
  std::optional<std::string> prompt = resolve_prompt(model, p.prompt_bin, "sample");

  std::vector<std::vector<Candidate>> per_source(sources.size());
  parallel_for(sources.size(), p.threads, [&](std::size_t i) {
    SampleConfig config;
    config.epsilon = p.epsilon;
    config.temperature = p.temperature;
    config.max_len = p.max_len;
    config.seed = splitmix64(p.seed ^ splitmix64(i));
    TokenSeq input = sources[i];
    if (prompt) input.push_back(*prompt);
    per_source[i] = sample_candidates(model, input, p.n, config);
    for (auto& c : per_source[i]) c.source_id = static_cast<int>(i);
  });

  std::vector<Candidate> flat;
  flat.reserve(sources.size() * p.n);
  for (auto& chunk : per_source)
    for (auto& c : chunk) flat.push_back(std::move(c));
  write_candidates(flat, p.out);
  emit_manifest("sample", json(p), {p.model, p.in}, {p.out});
  std::cerr << "sampled " << p.n << " candidates for " << sources.size() << " sentences\n";
}

// --- mbr ---------------------------------------------------------------------------------

struct MbrParams {
  std::string candidates;
  std::string metric = "chrf";
  std::size_t m = 50;
  std::size_t n = 0;  // expected pool size per sentence (0: whatever is there)
  std::string prune = "none";  // none | qa
  unsigned threads = 1;
  std::string out;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MbrParams, candidates, metric, m, n, prune, threads, out)

void run_mbr(const MbrParams& p) {
  if (p.prune != "none" && p.prune != "qa") throw std::runtime_error("mbr: --prune must be none or qa");
  auto groups = group_by_source(read_candidates(p.candidates));
  UtilityMetric metric = utility_metric(p.metric);

  std::vector<SelectionReport> reports(groups.size());
  parallel_for(groups.size(), p.threads, [&](std::size_t g) {
    const auto& [source_id, pool] = groups[g];
    if (p.n > 0 && pool.size() != p.n)
      throw std::runtime_error("mbr: source " + std::to_string(source_id) + " has " + std::to_string(pool.size()) +
                               " candidates, expected " + std::to_string(p.n));
    if (pool.size() < p.m)
      throw std::runtime_error("mbr: source " + std::to_string(source_id) + " has fewer candidates than M");
    SelectionReport report;
    if (p.prune == "qa") {
      report = prune_then_mbr(pool, p.m, metric, 1, "qa-prune-mbr");
    } else {
      std::vector<Candidate> first(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(p.m));
      report = mbr_select(first, metric, 1, "mbr");
    }
    report.source_id = source_id;
    reports[g] = std::move(report);
  });

  write_reports(reports, p.out);
  emit_manifest("mbr", json(p), {p.candidates}, {p.out});
  std::cerr << "selected " << reports.size() << " hypotheses (" << (p.prune == "qa" ? "qa-prune-mbr" : "mbr")
            << ", m=" << p.m << ")\n";
}

// --- rerank -------------------------------------------------------------------------------

struct RerankParams {
  std::string candidates;
  std::string method = "qa";  // qa | qe
  std::string rule_file;      // qe only
  std::string sources;        // qe only
  unsigned threads = 1;
  std::string out;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RerankParams, candidates, method, rule_file, sources, threads, out)

void run_rerank(const RerankParams& p) {
  auto groups = group_by_source(read_candidates(p.candidates));
  std::vector<SelectionReport> reports(groups.size());
  std::vector<std::string> inputs = {p.candidates};

  if (p.method == "qa") {
    parallel_for(groups.size(), p.threads, [&](std::size_t g) {
      reports[g] = qa_rerank_top(groups[g].second);
      reports[g].source_id = groups[g].first;
    });
  } else if (p.method == "qe") {
    if (p.rule_file.empty() || p.sources.empty())
      throw std::runtime_error("rerank: --method qe needs --rule-file and --sources");
    TaskRule rule = read_rule(p.rule_file);
    auto sources = read_sources(p.sources);
    inputs.push_back(p.rule_file);
    inputs.push_back(p.sources);
    parallel_for(groups.size(), p.threads, [&](std::size_t g) {
      int sid = groups[g].first;
      if (sid < 0 || static_cast<std::size_t>(sid) >= sources.size())
        throw std::runtime_error("rerank: candidate source id " + std::to_string(sid) + " not in --sources");
      reports[g] = qe_rerank(groups[g].second, sources[static_cast<std::size_t>(sid)],
                             [&](const TokenSeq& src, const TokenSeq& hyp) {
                               return score_synthetic_qe(rule, src, hyp);
                             });
      reports[g].source_id = sid;
    });
  } else {
    throw std::runtime_error("rerank: --method must be qa or qe");
  }

  write_reports(reports, p.out);
  emit_manifest("rerank", json(p), inputs, {p.out});
  std::cerr << "reranked " << reports.size() << " candidate lists (" << p.method << ")\n";
}

// --- sweep ---------------------------------------------------------------------------------

struct SweepParams {
  std::string sources;
  std::string rule_file;
  std::string baseline_model;
  std::string prompt_model;
  std::string predict_model;
  std::string ms = "2,5,10,20,50";
  std::string methods = "map,baseline-mbr,qa-prompt-mbr,qa-predict-prune-mbr,qe-rerank";
  std::size_t n_pool = 1024;
  std::string metric = "chrf";
  double epsilon = 0.02;
  double temperature = 1.0;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out;
  std::string per_segment_out;  // optional per-segment utility dump
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SweepParams, sources, rule_file, baseline_model, prompt_model, predict_model, ms,
                                   methods, n_pool, metric, epsilon, temperature, seed, threads, out, per_segment_out)

void run_sweep(const SweepParams& p) {
  TaskRule rule = read_rule(p.rule_file);
  auto sources = read_sources(p.sources);
  std::vector<std::string> inputs = {p.sources, p.rule_file};

  std::optional<LogLinearModel> baseline, prompt, predict;
  SweepModels models;
  if (!p.baseline_model.empty()) {
    baseline = load_model(p.baseline_model);
    models.baseline = &*baseline;
    inputs.push_back(p.baseline_model);
  }
  if (!p.prompt_model.empty()) {
    prompt = load_model(p.prompt_model);
    models.prompt = &*prompt;
    inputs.push_back(p.prompt_model);
  }
  if (!p.predict_model.empty()) {
    predict = load_model(p.predict_model);
    models.predict = &*predict;
    inputs.push_back(p.predict_model);
  }

  SweepOptions options;
  options.ms = parse_size_list(p.ms);
  options.methods = parse_string_list(p.methods);
  options.n_pool = p.n_pool;
  options.metric = p.metric;
  options.sample.epsilon = p.epsilon;
  options.sample.temperature = p.temperature;
  options.sample.seed = p.seed;
  options.threads = p.threads;

  SweepSegmentScores per_segment;
  auto rows = mbr_sweep(models, rule, sources, options, &per_segment);
  write_sweep_csv(rows, p.out);
  std::vector<std::string> outputs = {p.out};

  if (!p.per_segment_out.empty()) {
    std::ofstream seg(p.per_segment_out, std::ios::binary);
    if (!seg) throw std::runtime_error("cannot open for writing: " + p.per_segment_out);
    seg << "method,m,segment,utility\n";
    for (const auto& [key, utilities] : per_segment)
      for (std::size_t s = 0; s < utilities.size(); ++s)
        seg << key.first << ',' << key.second << ',' << s << ',' << format_double(utilities[s]) << '\n';
    outputs.push_back(p.per_segment_out);
  }

  emit_manifest("sweep", json(p), inputs, outputs);
  for (const auto& row : rows)
    std::cerr << row.method << " m=" << row.m << " utility=" << row.mean_utility
              << " qe=" << row.mean_synthetic_qe << " evals=" << row.total_evaluations << "\n";
}

// --- eval ----------------------------------------------------------------------------------

struct EvalCorrelationParams {
  std::string model;
  std::string in;  // labeled eval corpus
  std::size_t systems = 10;
  unsigned threads = 1;
  std::string out;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EvalCorrelationParams, model, in, systems, threads, out)

void run_eval_correlation(const EvalCorrelationParams& p) {
  LogLinearModel model = load_model(p.model);
  auto corpus = read_corpus(p.in);
  auto report = correlation_report(model, corpus, p.systems, p.threads);
  write_correlation_csv(report, p.out);
  emit_manifest("eval correlation", json(p), {p.model, p.in}, {p.out});
  std::cerr << "pearson sys=" << report.pearson_system << " seg=" << report.pearson_segment
            << " spearman=" << report.spearman << " acc=" << report.pairwise_accuracy << "\n";
}

struct EvalControllabilityParams {
  std::string model;
  std::string in;  // sources
  std::string rule_file;
  std::string bins_file;
  std::size_t samples = 4;
  double epsilon = 0.02;
  double temperature = 1.0;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EvalControllabilityParams, model, in, rule_file, bins_file, samples, epsilon,
                                   temperature, seed, threads, out)

void run_eval_controllability(const EvalControllabilityParams& p) {
  LogLinearModel model = load_model(p.model);
  TaskRule rule = read_rule(p.rule_file);
  BinTable table = read_bins(p.bins_file);
  auto sources = read_sources(p.in);

  SampleConfig config;
  config.epsilon = p.epsilon;
  config.temperature = p.temperature;
  config.seed = p.seed;
  auto rows = controllability_sweep(model, rule, sources, table, config, p.samples, p.threads);
  write_controllability_csv(rows, p.out);

  std::vector<double> bins, means;
  for (const auto& r : rows) {
    bins.push_back(r.bin);
    means.push_back(r.mean_qe);
  }
  emit_manifest("eval controllability", json(p), {p.model, p.in, p.rule_file, p.bins_file}, {p.out});
  std::cerr << "controllability spearman=" << spearman(bins, means) << " top-bottom gap="
            << means.back() - means.front() << "\n";
}

struct EvalAlignmentParams {
  std::string model;
  std::string in;  // sources
  std::string rule_file;
  std::size_t samples = 4;
  double epsilon = 0.02;
  double temperature = 1.0;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EvalAlignmentParams, model, in, rule_file, samples, epsilon, temperature, seed,
                                   threads, out)

void run_eval_alignment(const EvalAlignmentParams& p) {
  LogLinearModel model = load_model(p.model);
  TaskRule rule = read_rule(p.rule_file);
  auto sources = read_sources(p.in);

  SampleConfig config;
  config.epsilon = p.epsilon;
  config.temperature = p.temperature;
  config.seed = p.seed;
  auto rows = alignment_report(model, rule, sources, config, p.samples, p.threads);
  write_alignment_csv(rows, p.out);
  emit_manifest("eval alignment", json(p), {p.model, p.in, p.rule_file}, {p.out});
  for (const auto& r : rows)
    std::cerr << "bin " << r.bin << ": n=" << r.count << " median=" << r.actual.median << "\n";
}

struct EvalCompareParams {
  std::string scores_a;
  std::string scores_b;
  std::size_t iterations = 10000;
  std::uint64_t seed = 1;
  std::string out;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EvalCompareParams, scores_a, scores_b, iterations, seed, out)

void run_eval_compare(const EvalCompareParams& p) {
  auto a = read_score_file(p.scores_a);
  auto b = read_score_file(p.scores_b);
  double pvalue = permutation_test(a, b, p.iterations, p.seed);
  std::ofstream out(p.out, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + p.out);
  out << format_double(pvalue) << '\n';
  emit_manifest("eval compare", json(p), {p.scores_a, p.scores_b}, {p.out});
  std::cerr << "p=" << pvalue << (pvalue < 0.05 ? " (significant at p<0.05)" : "") << "\n";
}

// --- manifest replay --------------------------------------------------------------------------

void dispatch_manifest(const RunManifest& m) {
  const json& j = m.params;
  if (m.command == "gen-data") return run_gen_data(j.get<GenDataParams>());
  if (m.command == "label") return run_label(j.get<LabelParams>());
  if (m.command == "fit-bins") return run_fit_bins(j.get<FitBinsParams>());
  if (m.command == "tag") return run_tag(j.get<TagParams>());
  if (m.command == "train") return run_train(j.get<TrainParams>());
  if (m.command == "translate") return run_translate(j.get<TranslateParams>());
  if (m.command == "sample") return run_sample(j.get<SampleParams>());
  if (m.command == "mbr") return run_mbr(j.get<MbrParams>());
  if (m.command == "rerank") return run_rerank(j.get<RerankParams>());
  if (m.command == "sweep") return run_sweep(j.get<SweepParams>());
  if (m.command == "eval correlation") return run_eval_correlation(j.get<EvalCorrelationParams>());
  if (m.command == "eval controllability") return run_eval_controllability(j.get<EvalControllabilityParams>());
  if (m.command == "eval alignment") return run_eval_alignment(j.get<EvalAlignmentParams>());
  if (m.command == "eval compare") return run_eval_compare(j.get<EvalCompareParams>());
  throw std::runtime_error("manifest names unknown command: '" + m.command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quality-aware translation toolkit"};
  app.set_version_flag("--version", kToolkitVersion);
  app.require_subcommand(0, 1);

  std::string manifest_path;
  app.add_option("--from-manifest", manifest_path, "replay a run recorded in a manifest file");

  GenDataParams gen;
  auto* cmd_gen = app.add_subcommand("gen-data", "generate a synthetic parallel corpus and its task rule");
  cmd_gen->add_option("--out", gen.out, "corpus output path (TSV)")->required();
  cmd_gen->add_option("--rule-out", gen.rule_out, "where to write the task rule");
  cmd_gen->add_option("--rule-file", gen.rule_file, "reuse an existing task rule");
  cmd_gen->add_option("--kind", gen.kind, "substitution-cipher | word-mapping-with-reversal");
  cmd_gen->add_flag("--identity", gen.identity, "identity mapping (source tokens map to themselves)");
  cmd_gen->add_option("--vocab-size", gen.vocab_size, "task vocabulary size (default 12)");
  cmd_gen->add_option("--n", gen.n, "number of examples (default 10000)");
  cmd_gen->add_option("--min-len", gen.min_len, "minimum source length (default 3)");
  cmd_gen->add_option("--max-len", gen.max_len, "maximum source length (default 9)");
  cmd_gen->add_option("--sub-rate", gen.sub_rate, "base substitution rate (default 0.6)");
  cmd_gen->add_option("--del-rate", gen.del_rate, "base deletion rate (default 0.1)");
  cmd_gen->add_option("--ins-rate", gen.ins_rate, "base insertion rate (default 0.1)");
  cmd_gen->add_option("--spread", gen.spread, "per-example noise level law: uniform | constant | graded");
  cmd_gen->add_option("--seed", gen.seed, "random seed");

  LabelParams label;
  auto* cmd_label = app.add_subcommand("label", "score each example with the synthetic QE oracle");
  cmd_label->add_option("--in", label.in, "corpus to label")->required();
  cmd_label->add_option("--rule-file", label.rule_file, "task rule")->required();
  cmd_label->add_option("--out", label.out, "labeled corpus output")->required();
  cmd_label->add_option("--threads", label.threads, "worker threads");

  FitBinsParams fitb;
  auto* cmd_fitb = app.add_subcommand("fit-bins", "fit equal-mass quality bins over a labeled corpus");
  cmd_fitb->add_option("--in", fitb.in, "labeled corpus")->required();
  cmd_fitb->add_option("--bins", fitb.bins, "number of bins (default 10)");
  cmd_fitb->add_option("--identifiers", fitb.identifiers, "digits | letters | comma-separated list");
  cmd_fitb->add_option("--out", fitb.out, "bin table output")->required();

  TagParams tag;
  auto* cmd_tag = app.add_subcommand("tag", "append quality tags to the source and/or target side");
  cmd_tag->add_option("--in", tag.in, "labeled corpus")->required();
  cmd_tag->add_option("--mode", tag.mode, "prompting | prediction | combined");
  cmd_tag->add_option("--bins-file", tag.bins_file, "bin table (prompt side in combined mode)")->required();
  cmd_tag->add_option("--predict-bins-file", tag.predict_bins_file, "prediction-side bin table (combined mode)");
  cmd_tag->add_option("--out", tag.out, "tagged corpus output")->required();

  TrainParams tr;
  auto* cmd_train = app.add_subcommand("train", "train the log-linear next-token model");
  cmd_train->add_option("--in", tr.in, "(tagged) training corpus")->required();
  cmd_train->add_option("--mode", tr.mode, "plain | prompting | prediction | combined");
  cmd_train->add_option("--bins-file", tr.bins_file, "bin table the corpus was tagged with");
  cmd_train->add_option("--predict-bins-file", tr.predict_bins_file, "prediction-side bin table (combined mode)");
  cmd_train->add_option("--epochs", tr.epochs, "training epochs (default 12)");
  cmd_train->add_option("--lr", tr.lr, "learning rate (default 0.2)");
  cmd_train->add_option("--hash-dim", tr.hash_dim, "feature hash space size (default 1048576)");
  cmd_train->add_option("--l2", tr.l2, "L2 regularization strength (default 0)");
  cmd_train->add_option("--seed", tr.seed, "random seed");
  cmd_train->add_option("--out", tr.out, "model checkpoint output")->required();

  TranslateParams trl;
  auto* cmd_translate = app.add_subcommand("translate", "MAP-decode sources, optionally quality-prompted");
  cmd_translate->add_option("--model", trl.model, "model checkpoint")->required();
  cmd_translate->add_option("--in", trl.in, "sources (token lines or corpus TSV)")->required();
  cmd_translate->add_option("--prompt-bin", trl.prompt_bin,
                            "auto | none | max | <bin index>; auto prompts the top bin when available");
  cmd_translate->add_option("--decoder", trl.decoder, "greedy | beam");
  cmd_translate->add_option("--beam-width", trl.beam_width, "beam width (default 4)");
  cmd_translate->add_option("--max-len", trl.max_len, "hard target length cap (0: source length + 8)");
  cmd_translate->add_option("--threads", trl.threads, "worker threads");
  cmd_translate->add_option("--out", trl.out, "translations output (source TAB hypothesis)")->required();

  SampleParams smp;
  auto* cmd_sample = app.add_subcommand("sample", "epsilon-sample a candidate list per source");
  cmd_sample->add_option("--model", smp.model, "model checkpoint")->required();
  cmd_sample->add_option("--in", smp.in, "sources")->required();
  cmd_sample->add_option("--n", smp.n, "candidates per source (default 1024)");
  cmd_sample->add_option("--epsilon", smp.epsilon, "epsilon threshold (default 0.02)");
  cmd_sample->add_option("--temperature", smp.temperature, "sampling temperature (default 1.0)");
  cmd_sample->add_option("--prompt-bin", smp.prompt_bin,
                         "auto | none | max | <bin index>; auto prompts the top bin when available");
  cmd_sample->add_option("--seed", smp.seed, "random seed");
  cmd_sample->add_option("--max-len", smp.max_len, "hard target length cap (0: source length + 8)");
  cmd_sample->add_option("--threads", smp.threads, "worker threads");
  cmd_sample->add_option("--out", smp.out, "candidate list output (JSONL)")->required();

  MbrParams mbrp;
  auto* cmd_mbr = app.add_subcommand("mbr", "MBR-select from candidate lists, optionally QA-pruned");
  cmd_mbr->add_option("--candidates", mbrp.candidates, "candidate list (JSONL)")->required();
  cmd_mbr->add_option("--metric", mbrp.metric, "utility metric: chrf | bleu | edit (default chrf)");
  cmd_mbr->add_option("--m", mbrp.m, "candidate list size M (default 50)");
  cmd_mbr->add_option("--n", mbrp.n, "expected pool size per sentence (0: skip check)");
  cmd_mbr->add_option("--prune", mbrp.prune, "none | qa (rank by predicted quality, keep top M)");
  cmd_mbr->add_option("--threads", mbrp.threads, "worker threads");
  cmd_mbr->add_option("--out", mbrp.out, "selection reports output (JSONL)")->required();

  RerankParams rrk;
  auto* cmd_rerank = app.add_subcommand("rerank", "pick the top candidate by QA self-rank or external QE");
  cmd_rerank->add_option("--candidates", rrk.candidates, "candidate list (JSONL)")->required();
  cmd_rerank->add_option("--method", rrk.method, "qa | qe");
  cmd_rerank->add_option("--rule-file", rrk.rule_file, "task rule (qe method)");
  cmd_rerank->add_option("--sources", rrk.sources, "sources file (qe method)");
  cmd_rerank->add_option("--threads", rrk.threads, "worker threads");
  cmd_rerank->add_option("--out", rrk.out, "selection reports output (JSONL)")->required();

  SweepParams swp;
  auto* cmd_sweep = app.add_subcommand("sweep", "cost/quality sweep over methods and candidate sizes");
  cmd_sweep->add_option("--sources", swp.sources, "evaluation sources")->required();
  cmd_sweep->add_option("--rule-file", swp.rule_file, "task rule")->required();
  cmd_sweep->add_option("--baseline-model", swp.baseline_model, "plain model (map/baseline-mbr/qe-rerank)");
  cmd_sweep->add_option("--prompt-model", swp.prompt_model, "prompting model (qa-prompt-mbr)");
  cmd_sweep->add_option("--predict-model", swp.predict_model, "prediction model (qa-predict-prune-mbr)");
  cmd_sweep->add_option("--ms", swp.ms, "comma-separated candidate sizes (default 2,5,10,20,50)");
  cmd_sweep->add_option("--methods", swp.methods, "comma-separated method list");
  cmd_sweep->add_option("--n-pool", swp.n_pool, "sampling pool for qa-predict-prune-mbr (default 1024)");
  cmd_sweep->add_option("--metric", swp.metric, "utility metric (default chrf)");
  cmd_sweep->add_option("--epsilon", swp.epsilon, "epsilon threshold (default 0.02)");
  cmd_sweep->add_option("--temperature", swp.temperature, "sampling temperature (default 1.0)");
  cmd_sweep->add_option("--seed", swp.seed, "random seed");
  cmd_sweep->add_option("--threads", swp.threads, "worker threads");
  cmd_sweep->add_option("--out", swp.out, "sweep table output (CSV)")->required();
  cmd_sweep->add_option("--per-segment-out", swp.per_segment_out, "per-segment utilities output (CSV)");

  auto* cmd_eval = app.add_subcommand("eval", "reports: correlation, controllability, alignment, compare");
  cmd_eval->require_subcommand(1);

  EvalCorrelationParams ecr;
  auto* cmd_ecr = cmd_eval->add_subcommand("correlation", "self-predicted quality vs oracle scores");
  cmd_ecr->add_option("--model", ecr.model, "prediction-mode model")->required();
  cmd_ecr->add_option("--in", ecr.in, "labeled evaluation corpus")->required();
  cmd_ecr->add_option("--systems", ecr.systems, "pseudo-system block count (default 10)");
  cmd_ecr->add_option("--threads", ecr.threads, "worker threads");
  cmd_ecr->add_option("--out", ecr.out, "correlation report output (CSV)")->required();

  EvalControllabilityParams ect;
  auto* cmd_ect = cmd_eval->add_subcommand("controllability", "output quality per prompted bin");
  cmd_ect->add_option("--model", ect.model, "prompting-mode model")->required();
  cmd_ect->add_option("--in", ect.in, "sources")->required();
  cmd_ect->add_option("--rule-file", ect.rule_file, "task rule")->required();
  cmd_ect->add_option("--bins-file", ect.bins_file, "bin table with the prompt tags")->required();
  cmd_ect->add_option("--samples", ect.samples, "samples per source per bin (default 4)");
  cmd_ect->add_option("--epsilon", ect.epsilon, "epsilon threshold (default 0.02)");
  cmd_ect->add_option("--temperature", ect.temperature, "sampling temperature (default 1.0)");
  cmd_ect->add_option("--seed", ect.seed, "random seed");
  cmd_ect->add_option("--threads", ect.threads, "worker threads");
  cmd_ect->add_option("--out", ect.out, "controllability table output (CSV)")->required();

  EvalAlignmentParams eal;
  auto* cmd_eal = cmd_eval->add_subcommand("alignment", "actual score distribution per predicted bin");
  cmd_eal->add_option("--model", eal.model, "prediction-mode model")->required();
  cmd_eal->add_option("--in", eal.in, "sources")->required();
  cmd_eal->add_option("--rule-file", eal.rule_file, "task rule")->required();
  cmd_eal->add_option("--samples", eal.samples, "samples per source (default 4)");
  cmd_eal->add_option("--epsilon", eal.epsilon, "epsilon threshold (default 0.02)");
  cmd_eal->add_option("--temperature", eal.temperature, "sampling temperature (default 1.0)");
  cmd_eal->add_option("--seed", eal.seed, "random seed");
  cmd_eal->add_option("--threads", eal.threads, "worker threads");
  cmd_eal->add_option("--out", eal.out, "alignment table output (CSV)")->required();

  EvalCompareParams ecm;
  auto* cmd_ecm = cmd_eval->add_subcommand("compare", "paired permutation significance test");
  cmd_ecm->add_option("--scores-a", ecm.scores_a, "per-segment scores, system A")->required();
  cmd_ecm->add_option("--scores-b", ecm.scores_b, "per-segment scores, system B")->required();
  cmd_ecm->add_option("--iterations", ecm.iterations, "permutation iterations (default 10000)");
  cmd_ecm->add_option("--seed", ecm.seed, "random seed");
  cmd_ecm->add_option("--out", ecm.out, "p-value output")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (!manifest_path.empty()) {
      dispatch_manifest(read_manifest(manifest_path));
      return 0;
    }
    if (cmd_gen->parsed()) run_gen_data(gen);
    else if (cmd_label->parsed()) run_label(label);
    else if (cmd_fitb->parsed()) run_fit_bins(fitb);
    else if (cmd_tag->parsed()) run_tag(tag);
    else if (cmd_train->parsed()) run_train(tr);
    else if (cmd_translate->parsed()) run_translate(trl);
    else if (cmd_sample->parsed()) run_sample(smp);
    else if (cmd_mbr->parsed()) run_mbr(mbrp);
    else if (cmd_rerank->parsed()) run_rerank(rrk);
    else if (cmd_sweep->parsed()) run_sweep(swp);
    else if (cmd_eval->parsed()) {
      if (cmd_ecr->parsed()) run_eval_correlation(ecr);
      else if (cmd_ect->parsed()) run_eval_controllability(ect);
      else if (cmd_eal->parsed()) run_eval_alignment(eal);
      else if (cmd_ecm->parsed()) run_eval_compare(ecm);
    } else {
      std::cerr << app.help() << "\n";
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
