#pragma once

// Conditional next-token model P(y_t | x, y_<t) and its trainer.
//
// The model is log-linear over hashed features of the aligned source window,
// the recent target prefix and (when present) the source-side quality tag.
// Candidate tokens that are quality tags additionally see source/target pair
// agreement features over the whole prefix, which is what lets a prediction
// model rate the quality of its own output. Feature hashing is fixed and
// documented in FORMATS.md so checkpoints are reproducible.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "qaware/quality.hpp"
#include "qaware/types.hpp"
#include "qaware/util.hpp"

namespace qaware {

class Vocabulary {
 public:
  Vocabulary() = default;

  // Token 0 is always the end-of-sequence marker.
  explicit Vocabulary(const std::set<std::string>& tokens) {
    tokens_.push_back(kEos);
    index_[kEos] = 0;
    for (const auto& t : tokens) {
      if (t == kEos) throw std::runtime_error("vocabulary: '" + t + "' is reserved");
      index_[t] = static_cast<int>(tokens_.size());
      tokens_.push_back(t);
    }
  }

  // Index order taken verbatim (checkpoint loading).
  explicit Vocabulary(const std::vector<std::string>& ordered) {
    if (ordered.empty() || ordered.front() != kEos)
      throw std::runtime_error("vocabulary: first entry must be " + std::string(kEos));
    for (const auto& t : ordered) {
      if (index_.count(t)) throw std::runtime_error("vocabulary: duplicate token '" + t + "'");
      index_[t] = static_cast<int>(tokens_.size());
      tokens_.push_back(t);
    }
  }

  static constexpr const char* kEos = "</s>";

  std::size_t size() const { return tokens_.size(); }
  int eos() const { return 0; }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  int index_of(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) throw std::runtime_error("token outside vocabulary: '" + token + "'");
    return it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) > 0; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct SequenceModel {
  virtual ~SequenceModel() = default;
  virtual const Vocabulary& vocab() const = 0;
  // Probability vector over the vocabulary; nonnegative, sums to 1.
  virtual std::vector<double> next_distribution(const TokenSeq& source, const TokenSeq& prefix) const = 0;
  // Bin index of a prediction-side tag token emitted by this model, if any.
  virtual std::optional<int> tag_bin(const std::string&) const { return std::nullopt; }
};

enum class ModelMode { Plain, Prompting, Prediction, Combined };

inline std::string model_mode_name(ModelMode m) {
  switch (m) {
    case ModelMode::Plain: return "plain";
    case ModelMode::Prompting: return "prompting";
    case ModelMode::Prediction: return "prediction";
    default: return "combined";
  }
}

inline ModelMode model_mode_from_name(const std::string& s) {
  if (s == "plain") return ModelMode::Plain;
  if (s == "prompting") return ModelMode::Prompting;
  if (s == "prediction") return ModelMode::Prediction;
  if (s == "combined") return ModelMode::Combined;
  throw std::runtime_error("unknown model mode: '" + s + "'");
}

struct TrainConfig {
  std::size_t epochs = 12;
  double learning_rate = 0.2;
  std::size_t hash_dim = 1u << 20;
  double l2 = 0.0;
  std::uint64_t seed = 1;
  ModelMode mode = ModelMode::Plain;
  TagSet prompt_tags;   // bin-ordered identifiers; prompting/combined only
  TagSet predict_tags;  // prediction/combined only

  void validate() const {
    if (epochs < 1) throw std::runtime_error("train config: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw std::runtime_error("train config: learning_rate must be > 0");
    if (hash_dim < 2) throw std::runtime_error("train config: hash_dim too small");
    if (l2 < 0.0) throw std::runtime_error("train config: l2 must be >= 0");
    if ((mode == ModelMode::Prompting || mode == ModelMode::Combined) && prompt_tags.size() == 0)
      throw std::runtime_error("train config: prompting mode needs prompt tag identifiers");
    if ((mode == ModelMode::Prediction || mode == ModelMode::Combined) && predict_tags.size() == 0)
      throw std::runtime_error("train config: prediction mode needs predict tag identifiers");
  }
};

namespace detail {

inline constexpr std::uint64_t kBosHash = 0x426f535f6d61726bULL;

inline std::uint64_t fold(std::uint64_t h, std::uint64_t c) { return splitmix64(h ^ c); }

template <typename... Parts>
inline std::uint64_t feature_index(std::size_t hash_dim, std::uint64_t tmpl, Parts... parts) {
  std::uint64_t h = splitmix64(kGolden ^ tmpl);
  ((h = fold(h, parts)), ...);
  return h % hash_dim;
}

// Per-step view of the decoding state: source surface hashes (prompt tag
// stripped), optional prompt hash, prefix hashes, current position t.
struct StepContext {
  const std::vector<std::uint64_t>* src = nullptr;
  std::size_t n = 0;
  bool has_prompt = false;
  std::uint64_t prompt = 0;
  const std::vector<std::uint64_t>* prefix = nullptr;
  std::size_t t = 0;
};

template <typename Emit>
inline void emit_features(const StepContext& c, std::size_t hash_dim, std::uint64_t v, bool v_is_tag, Emit&& emit) {
  const auto& src = *c.src;
  const auto& pre = *c.prefix;
  const std::size_t n = c.n, t = c.t;

  emit(feature_index(hash_dim, 1, v));
  if (t < n) {
    emit(feature_index(hash_dim, 2, src[t], v));
    emit(feature_index(hash_dim, 3, src[n - 1 - t], v));
  }
  if (t >= 1 && t - 1 < n) emit(feature_index(hash_dim, 4, src[t - 1], v));
  if (t + 1 < n) emit(feature_index(hash_dim, 5, src[t + 1], v));
  emit(feature_index(hash_dim, 6, t >= 1 ? pre[t - 1] : kBosHash, v));
  emit(feature_index(hash_dim, 7, t >= 2 ? pre[t - 2] : kBosHash, v));
  long rel = std::clamp<long>(static_cast<long>(t) - static_cast<long>(n), -4, 4);
  emit(feature_index(hash_dim, 8, static_cast<std::uint64_t>(rel + 8), v));
  if (c.has_prompt) {
    emit(feature_index(hash_dim, 9, c.prompt, v));
    if (t < n) {
      emit(feature_index(hash_dim, 10, c.prompt, src[t], v));
      emit(feature_index(hash_dim, 11, c.prompt, src[n - 1 - t], v));
    }
  }
  if (v_is_tag) {
    const std::size_t lim = std::min(t, n);
    for (std::size_t j = 0; j < lim; ++j) {
      emit(feature_index(hash_dim, 12, src[j], pre[j], v));
      emit(feature_index(hash_dim, 13, src[n - 1 - j], pre[j], v));
    }
  }
}

inline std::vector<std::uint64_t> hash_tokens(const TokenSeq& seq) {
  std::vector<std::uint64_t> out;
  out.reserve(seq.size());
  for (const auto& t : seq) out.push_back(token_hash(t));
  return out;
}

}  // namespace detail

class LogLinearModel : public SequenceModel {
 public:
  static constexpr double kSmoothing = 1e-6;
  static constexpr std::size_t kMaxExtraLength = 8;  // target length cap: |source| + 8

  LogLinearModel() = default;
  LogLinearModel(Vocabulary vocab, std::size_t hash_dim, ModelMode mode, TagSet prompt_tags, TagSet predict_tags)
      : vocab_(std::move(vocab)),
        hash_dim_(hash_dim),
        mode_(mode),
        prompt_tags_(std::move(prompt_tags)),
        predict_tags_(std::move(predict_tags)),
        weights_(hash_dim, 0.0) {
    rebuild_caches();
  }

  const Vocabulary& vocab() const override { return vocab_; }
  ModelMode mode() const { return mode_; }
  std::size_t hash_dim() const { return hash_dim_; }
  const TagSet& prompt_tags() const { return prompt_tags_; }
  const TagSet& predict_tags() const { return predict_tags_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight_at(std::size_t i) const { return weights_.at(i); }
  void set_weight(std::size_t i, double v) { weights_.at(i) = v; }

  std::optional<int> tag_bin(const std::string& token) const override { return predict_tags_.bin_for(token); }

  // Raw feature scores for every vocabulary entry.
  std::vector<double> logits(const TokenSeq& source, const TokenSeq& prefix) const {
    detail::StepContext ctx;
    std::vector<std::uint64_t> src_h;
    context_source(source, src_h, ctx);
    auto pre_h = detail::hash_tokens(prefix);
    ctx.prefix = &pre_h;
    ctx.t = pre_h.size();
    std::vector<double> scores(vocab_.size(), 0.0);
    for (std::size_t v = 0; v < vocab_.size(); ++v) {
      double s = 0.0;
      detail::emit_features(ctx, hash_dim_, vocab_hashes_[v], is_predict_tag_[v] != 0,
                            [&](std::uint64_t f) { s += weights_[f]; });
      scores[v] = s;
    }
    return scores;
  }

  // Softmax of the logits with additive smoothing mass kSmoothing, so every
  // token (end-of-sequence in particular) keeps nonzero probability.
  std::vector<double> next_distribution(const TokenSeq& source, const TokenSeq& prefix) const override {
    std::vector<double> p = logits(source, prefix);
    softmax_inplace(p);
    const double denom = 1.0 + kSmoothing * static_cast<double>(p.size());
    for (double& x : p) x = (x + kSmoothing) / denom;
    return p;
  }

  static void softmax_inplace(std::vector<double>& scores) {
    double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double& s : scores) {
      s = std::exp(s - mx);
      z += s;
    }
    for (double& s : scores) s /= z;
  }

  // --- training -----------------------------------------------------------

  // Per-token cross entropy of one example under the current weights
  // (pure softmax, no smoothing; this is the trained objective).
  double example_loss(const ParallelExample& ex) const {
    double loss = 0.0;
    walk_positions(ex, [&](const std::vector<double>& probs, int gold, const std::vector<std::vector<std::uint64_t>>&) {
      loss -= std::log(std::max(probs[static_cast<std::size_t>(gold)], 1e-300));
    });
    return loss;
  }

  // Dedup'd sparse gradient of example_loss w.r.t. the weights.
  std::vector<std::pair<std::uint64_t, double>> example_gradient(const ParallelExample& ex) const {
    std::unordered_map<std::uint64_t, double> grad;
    walk_positions(ex, [&](const std::vector<double>& probs, int gold, const std::vector<std::vector<std::uint64_t>>& feats) {
      for (std::size_t v = 0; v < probs.size(); ++v) {
        double coef = probs[v] - (static_cast<int>(v) == gold ? 1.0 : 0.0);
        for (std::uint64_t f : feats[v]) grad[f] += coef;
      }
    });
    std::vector<std::pair<std::uint64_t, double>> out(grad.begin(), grad.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<double>& mutable_weights() { return weights_; }
  const std::vector<double>& epoch_losses() const { return epoch_losses_; }
  std::vector<double>& mutable_epoch_losses() { return epoch_losses_; }

  // Forward pass over the positions of a training example (gold target plus
  // end-of-sequence). fn(probs, gold_index, per_candidate_features).
  template <typename Fn>
  void walk_positions(const ParallelExample& ex, Fn&& fn) const {
    detail::StepContext ctx;
    std::vector<std::uint64_t> src_h;
    context_source(ex.source, src_h, ctx);
    std::vector<std::uint64_t> pre_h;
    pre_h.reserve(ex.target.size());
    ctx.prefix = &pre_h;

    const std::size_t vocab_size = vocab_.size();
    std::vector<std::vector<std::uint64_t>> feats(vocab_size);
    std::vector<double> scores(vocab_size);

    for (std::size_t t = 0; t <= ex.target.size(); ++t) {
      ctx.t = t;
      int gold = t < ex.target.size() ? vocab_.index_of(ex.target[t]) : vocab_.eos();
      for (std::size_t v = 0; v < vocab_size; ++v) {
        feats[v].clear();
        detail::emit_features(ctx, hash_dim_, vocab_hashes_[v], is_predict_tag_[v] != 0,
                              [&](std::uint64_t f) { feats[v].push_back(f); });
        double s = 0.0;
        for (std::uint64_t f : feats[v]) s += weights_[f];
        scores[v] = s;
      }
      softmax_inplace(scores);
      fn(scores, gold, feats);
      if (t < ex.target.size()) pre_h.push_back(token_hash(ex.target[t]));
    }
  }

  friend void save_model(const LogLinearModel& model, const std::string& path);
  friend LogLinearModel load_model(const std::string& path);

 private:
  // Splits a trailing source-side tag into the prompt slot and fills src_h
  // with the surface token hashes the context points into.
  void context_source(const TokenSeq& source, std::vector<std::uint64_t>& src_h, detail::StepContext& ctx) const {
    src_h.clear();
    std::size_t n = source.size();
    if (n > 0 && is_tag_shaped(source.back())) {
      ctx.has_prompt = true;
      ctx.prompt = token_hash(source.back());
      --n;
    }
    src_h.reserve(n);
    for (std::size_t i = 0; i < n; ++i) src_h.push_back(token_hash(source[i]));
    ctx.src = &src_h;
    ctx.n = n;
  }

  void rebuild_caches() {
    vocab_hashes_.clear();
    is_predict_tag_.clear();
    for (std::size_t v = 0; v < vocab_.size(); ++v) {
      vocab_hashes_.push_back(token_hash(vocab_.token(v)));
      is_predict_tag_.push_back(predict_tags_.bin_for(vocab_.token(v)) ? 1 : 0);
    }
  }

  Vocabulary vocab_;
  std::size_t hash_dim_ = 0;
  ModelMode mode_ = ModelMode::Plain;
  TagSet prompt_tags_;
  TagSet predict_tags_;
  std::vector<double> weights_;
  std::vector<std::uint64_t> vocab_hashes_;
  std::vector<char> is_predict_tag_;
  std::vector<double> epoch_losses_;  // transient, not serialized
};

namespace detail {

inline void check_tagging(const std::vector<ParallelExample>& corpus, const TrainConfig& config) {
  const bool want_prompt = config.mode == ModelMode::Prompting || config.mode == ModelMode::Combined;
  const bool want_predict = config.mode == ModelMode::Prediction || config.mode == ModelMode::Combined;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& ex = corpus[i];
    bool src_tagged = !ex.source.empty() && is_tag_shaped(ex.source.back());
    bool tgt_tagged = !ex.target.empty() && is_tag_shaped(ex.target.back());
    if (want_prompt && (!src_tagged || !config.prompt_tags.bin_for(ex.source.back())))
      throw std::runtime_error("train: example " + std::to_string(i) + " lacks a source-side prompt tag");
    if (want_predict && (!tgt_tagged || !config.predict_tags.bin_for(ex.target.back())))
      throw std::runtime_error("train: example " + std::to_string(i) + " lacks a target-side prediction tag");
    if (!want_prompt && src_tagged)
      throw std::runtime_error("train: example " + std::to_string(i) + " has a source tag but mode is " +
                               model_mode_name(config.mode));
    if (!want_predict && tgt_tagged)
      throw std::runtime_error("train: example " + std::to_string(i) + " has a target tag but mode is " +
                               model_mode_name(config.mode));
  }
}

}  // namespace detail

// Stochastic gradient descent on per-token softmax cross entropy.
// Deterministic for a fixed seed: example order, updates and hashing all
// derive from the config.
inline LogLinearModel train(const std::vector<ParallelExample>& corpus, const TrainConfig& config) {
  config.validate();
  if (corpus.empty()) throw std::runtime_error("train: empty corpus");
  detail::check_tagging(corpus, config);

  std::set<std::string> target_tokens;
  for (const auto& ex : corpus)
    for (const auto& t : ex.target) target_tokens.insert(t);
  LogLinearModel model(Vocabulary(target_tokens), config.hash_dim, config.mode, config.prompt_tags,
                       config.predict_tags);

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto& weights = model.mutable_weights();
  const double lr = config.learning_rate;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = substream(config.seed, 0x0e0c'0000ULL + epoch);
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t token_count = 0;

    for (std::size_t idx : order) {
      const auto& ex = corpus[idx];
      if (config.l2 > 0.0) {
        auto grad = model.example_gradient(ex);
        loss_sum += model.example_loss(ex);
        for (const auto& [f, g] : grad) weights[f] -= lr * (g + config.l2 * weights[f]);
      } else {
        model.walk_positions(ex, [&](const std::vector<double>& probs, int gold,
                                     const std::vector<std::vector<std::uint64_t>>& feats) {
          loss_sum -= std::log(std::max(probs[static_cast<std::size_t>(gold)], 1e-300));
          for (std::size_t v = 0; v < probs.size(); ++v) {
            double coef = probs[v] - (static_cast<int>(v) == gold ? 1.0 : 0.0);
            if (coef == 0.0) continue;
            const double step = lr * coef;
            for (std::uint64_t f : feats[v]) weights[f] -= step;
          }
        });
      }
      token_count += ex.target.size() + 1;
    }
    model.mutable_epoch_losses().push_back(loss_sum / static_cast<double>(token_count));
  }
  return model;
}

// --- checkpoint: text header, then hash_dim little-endian float64 weights.

inline void save_model(const LogLinearModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "qaware-model 1\n";
  out << "mode " << model_mode_name(model.mode_) << '\n';
  out << "hash_dim " << model.hash_dim_ << '\n';
  out << "vocab " << model.vocab_.size() << '\n';
  for (const auto& t : model.vocab_.tokens()) out << t << '\n';
  out << "prompt_tags " << model.prompt_tags_.size() << '\n';
  for (const auto& id : model.prompt_tags_.identifiers) out << id << '\n';
  out << "predict_tags " << model.predict_tags_.size() << '\n';
  for (const auto& id : model.predict_tags_.identifiers) out << id << '\n';
  out << "weights " << model.weights_.size() << '\n';
  for (double w : model.weights_) {
    std::uint64_t bits;
    std::memcpy(&bits, &w, 8);
    char buf[8];
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    out.write(buf, 8);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline LogLinearModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw std::runtime_error("model file truncated: " + path);
    return line;
  };
  auto expect_field = [&](const std::string& key) {
    std::string l = next_line();
    if (l.rfind(key + " ", 0) != 0) throw std::runtime_error("model file: expected '" + key + "' in " + path);
    return l.substr(key.size() + 1);
  };

  if (next_line() != "qaware-model 1") throw std::runtime_error("model file: bad header in " + path);
  ModelMode mode = model_mode_from_name(expect_field("mode"));
  std::size_t hash_dim = std::stoul(expect_field("hash_dim"));
  std::size_t vocab_size = std::stoul(expect_field("vocab"));
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < vocab_size; ++i) tokens.push_back(next_line());

  TagSet prompt_tags, predict_tags;
  std::size_t np = std::stoul(expect_field("prompt_tags"));
  for (std::size_t i = 0; i < np; ++i) prompt_tags.identifiers.push_back(next_line());
  std::size_t nq = std::stoul(expect_field("predict_tags"));
  for (std::size_t i = 0; i < nq; ++i) predict_tags.identifiers.push_back(next_line());

  std::size_t n_weights = std::stoul(expect_field("weights"));
  if (n_weights != hash_dim) throw std::runtime_error("model file: weight count does not match hash_dim");

  LogLinearModel model(Vocabulary(tokens), hash_dim, mode, prompt_tags, predict_tags);
  for (std::size_t i = 0; i < n_weights; ++i) {
    char buf[8];
    in.read(buf, 8);
    if (!in) throw std::runtime_error("model file truncated: " + path);
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[b])) << (8 * b);
    double w;
    std::memcpy(&w, &bits, 8);
    model.weights_[i] = w;
  }
  return model;
}

}  // namespace qaware
