// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "detqe/adam.hpp"
#include "detqe/data.hpp"
#include "detqe/model.hpp"

namespace detqe {

// A reference sentence with some token positions hidden behind MASK. The
// rewriter is trained to put the originals back; pseudo-data generation
// resamples them instead.
struct MaskedSample {
  std::vector<int> masked_ref;
  std::vector<int> mask_positions;  // ascending
  std::vector<int> originals;       // aligned with mask_positions
};

// Chooses ceil(ratio * len) positions uniformly without replacement, at
// least one per sentence so every sample carries a training signal.
inline MaskedSample mask_reference(const std::vector<int>& ref, double ratio, Rng& rng) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw config_error("mask ratio must be in (0,1)");
  if (ref.empty()) throw input_error("mask_reference: empty reference");
  const int len = static_cast<int>(ref.size());
  int n_mask = static_cast<int>(std::ceil(ratio * len));
  n_mask = std::max(1, std::min(n_mask, len));

  // partial Fisher-Yates over the position array
  std::vector<int> order(ref.size());
  for (int i = 0; i < len; ++i) order[static_cast<size_t>(i)] = i;
  for (int i = 0; i < n_mask; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<uint64_t>(len - i)));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  MaskedSample out;
  out.mask_positions.assign(order.begin(), order.begin() + n_mask);
  std::sort(out.mask_positions.begin(), out.mask_positions.end());
  out.masked_ref = ref;
  out.originals.reserve(static_cast<size_t>(n_mask));
  for (int pos : out.mask_positions) {
    out.originals.push_back(ref[static_cast<size_t>(pos)]);
    out.masked_ref[static_cast<size_t>(pos)] = Vocab::kMask;
  }
  return out;
}

// How replacement tokens are drawn at masked positions. Special ids are
// never candidates: a pseudo translation must stay ordinary text, and the
// pseudo-label equality test only compares content tokens.
struct SamplingStrategy {
  enum class Kind { kSample, kTopK, kGreedy, kRandom };
  Kind kind = Kind::kSample;
  double temperature = 1.0;  // Sample only
  int k = 1;                 // TopK only

  void validate(int vocab_size) const {
    if (kind == Kind::kSample &&
        (!(temperature > 0.0) || !std::isfinite(temperature)))
      throw config_error("sampling temperature must be finite and positive");
    if (kind == Kind::kTopK && (k < 1 || k > vocab_size))
      throw config_error("top-k must be in [1, vocab_size]");
  }

  std::string describe() const {
    switch (kind) {
      case Kind::kSample: return "sample(t=" + format_double(temperature, 3) + ")";
      case Kind::kTopK: return "topk(k=" + std::to_string(k) + ")";
      case Kind::kGreedy: return "greedy";
      case Kind::kRandom: return "random";
    }
    return "?";
  }
};

// Draws one replacement per logits row. Rows align with mask positions.
// Greedy consumes no randomness, so it is a pure function of the logits.
inline std::vector<int> sample_replacements(const Matd& logits, const SamplingStrategy& strategy,
                                            Rng& rng) {
  const int vocab = static_cast<int>(logits.cols());
  strategy.validate(vocab);
  const int first = Vocab::kNumSpecial;
  if (vocab <= first) throw config_error("sample_replacements: vocabulary has no content tokens");
  const int n_content = vocab - first;

  std::vector<int> out;
  out.reserve(static_cast<size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    int picked = first;
    switch (strategy.kind) {
      case SamplingStrategy::Kind::kRandom:
        picked = first + static_cast<int>(rng.below(static_cast<uint64_t>(n_content)));
        break;
      case SamplingStrategy::Kind::kGreedy: {
        picked = first;
        for (int c = first + 1; c < vocab; ++c)
          if (row(c) > row(picked)) picked = c;
        break;
      }
      case SamplingStrategy::Kind::kTopK: {
        std::vector<int> ids(static_cast<size_t>(n_content));
        for (int i = 0; i < n_content; ++i) ids[static_cast<size_t>(i)] = first + i;
        const int kk = std::min(strategy.k, n_content);
        // highest logit first; equal logits keep the lower id first
        std::partial_sort(ids.begin(), ids.begin() + kk, ids.end(), [&row](int a, int b) {
          if (row(a) != row(b)) return row(a) > row(b);
          return a < b;
        });
        picked = kk == 1 ? ids[0]
                         : ids[static_cast<size_t>(rng.below(static_cast<uint64_t>(kk)))];
        break;
      }
      case SamplingStrategy::Kind::kSample: {
        const double tau = strategy.temperature;
        double mx = row(first);
        for (int c = first + 1; c < vocab; ++c) mx = std::max(mx, row(c));
        double z = 0.0;
        std::vector<double> p(static_cast<size_t>(n_content));
        for (int i = 0; i < n_content; ++i) {
          p[static_cast<size_t>(i)] = std::exp((row(first + i) - mx) / tau);
          z += p[static_cast<size_t>(i)];
        }
        const double u = rng.uniform() * z;
        double acc = 0.0;
        picked = vocab - 1;
        for (int i = 0; i < n_content; ++i) {
          acc += p[static_cast<size_t>(i)];
          if (u < acc) {
            picked = first + i;
            break;
          }
        }
        break;
      }
    }
    out.push_back(picked);
  }
  return out;
}

// Applies the pseudo-label rule: a position is OK exactly when the final
// token equals the original, so a mask that resamples its own token stays
// OK, and the sentence score is one minus the OK fraction.
inline PseudoQERecord make_pseudo_record(const ParallelPair& pair, const MaskedSample& masked,
                                         const std::vector<int>& replacements) {
  if (replacements.size() != masked.mask_positions.size())
    throw state_error("make_pseudo_record: replacements do not align with mask positions");
  if (masked.masked_ref.size() != pair.ref.size())
    throw state_error("make_pseudo_record: masked sample does not match the pair");

  PseudoQERecord rec;
  rec.src = pair.src;
  rec.src_words = pair.src_words;
  rec.ref_words = pair.ref_words;
  rec.pseudo = pair.ref;
  for (size_t i = 0; i < replacements.size(); ++i)
    rec.pseudo[static_cast<size_t>(masked.mask_positions[i])] = replacements[i];

  const size_t len = rec.pseudo.size();
  long ok = 0;
  rec.tags.resize(len);
  for (size_t j = 0; j < len; ++j) {
    rec.tags[j] = rec.pseudo[j] == pair.ref[j] ? 1 : 0;
    ok += rec.tags[j];
  }
  rec.score = 1.0 - static_cast<double>(ok) / static_cast<double>(len);
  return rec;
}

// Masked rewriter: transformer trunk plus a projection back to the
// vocabulary. Predicts the hidden original at every masked position given
// the source and the surrounding reference.
template <typename T>
class GeneratorModel {
 public:
  using Node = typename Tape<T>::Node;

  explicit GeneratorModel(const ModelConfig& config) : trunk_(config) {
    trunk_.store().create("lm.w", config.hidden, config.vocab_size, Init::kFanInRows);
    trunk_.store().create("lm.b", 1, config.vocab_size, Init::kZero);
  }

  const ModelConfig& config() const { return trunk_.config(); }
  ParamStore<T>& store() { return trunk_.store(); }
  Transformer<T>& trunk() { return trunk_; }

  void init(uint64_t seed) {
    Rng rng(seed);
    trunk_.store().init_params(rng);
  }

  Node* logits(Tape<T>& tape, const std::vector<int>& src, const std::vector<int>& masked_ref,
               Rng* drop_rng = nullptr) {
    Node* dec = trunk_.forward(tape, src, masked_ref, nullptr, drop_rng);
    return tape.add_rowvec(tape.matmul(dec, tape.param(store().at("lm.w"))),
                           tape.param(store().at("lm.b")));
  }

  // Cross-entropy on the masked positions only.
  Node* loss(Tape<T>& tape, const std::vector<int>& src, const MaskedSample& masked,
             Rng* drop_rng = nullptr) {
    std::vector<int> targets(masked.masked_ref.size(), 0);
    std::vector<char> rows(masked.masked_ref.size(), 0);
    for (size_t i = 0; i < masked.mask_positions.size(); ++i) {
      targets[static_cast<size_t>(masked.mask_positions[i])] = masked.originals[i];
      rows[static_cast<size_t>(masked.mask_positions[i])] = 1;
    }
    return tape.masked_cross_entropy(logits(tape, src, masked.masked_ref), targets, rows);
  }

  // Inference: logit rows for the masked positions, in mask order.
  Matd masked_logits(const std::vector<int>& src, const MaskedSample& masked) {
    Tape<T> tape;
    Node* lg = logits(tape, src, masked.masked_ref);
    Matd out(static_cast<Eigen::Index>(masked.mask_positions.size()), lg->value.cols());
    for (size_t i = 0; i < masked.mask_positions.size(); ++i)
      out.row(static_cast<Eigen::Index>(i)) =
          lg->value.row(masked.mask_positions[i]).template cast<double>();
    return out;
  }

 private:
  Transformer<T> trunk_;
};

struct TrainCurvePoint {
  long step = 0;
  double value = 0.0;
};

struct GeneratorTrainConfig {
  AdamConfig adam;
  int steps = 2000;
  int batch_size = 16;
  double mask_ratio = 0.15;
  int heldout_pairs = 200;  // split off for model selection
  int eval_every = 100;
  uint64_t seed = 1;
};

struct GeneratorTrainResult {
  double best_heldout_loss = 0.0;
  long best_step = -1;
  double heldout_accuracy = 0.0;  // masked-token recovery at the best step
  std::vector<TrainCurvePoint> train_curve;
  std::vector<TrainCurvePoint> heldout_curve;
};

// Trains the rewriter on fresh random masks each step and keeps the
// parameters of the best held-out evaluation. Held-out masks are fixed per
// pair so successive evaluations are comparable. A non-finite training loss
// aborts after restoring the best parameters seen.
template <typename T>
GeneratorTrainResult train_generator(GeneratorModel<T>& model, const ParallelCorpus& corpus,
                                     const GeneratorTrainConfig& cfg) {
  if (cfg.steps < 0) throw config_error("train_generator: negative step count");
  if (cfg.batch_size < 1) throw config_error("train_generator: batch_size must be >= 1");
  if (cfg.heldout_pairs < 1 ||
      static_cast<size_t>(cfg.heldout_pairs) >= corpus.size())
    throw config_error("train_generator: heldout_pairs must leave a nonempty training pool");

  Rng split_rng(derive_seed(cfg.seed, "gen.split"));
  std::vector<size_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (size_t i = 0; i + 1 < order.size(); ++i) {
    const size_t j = i + split_rng.below(order.size() - i);
    std::swap(order[i], order[j]);
  }
  const std::vector<size_t> heldout(order.begin(),
                                    order.begin() + cfg.heldout_pairs);
  const std::vector<size_t> pool(order.begin() + cfg.heldout_pairs, order.end());

  // fixed evaluation masks, one rng stream per held-out pair
  std::vector<MaskedSample> heldout_masks;
  heldout_masks.reserve(heldout.size());
  for (size_t i = 0; i < heldout.size(); ++i) {
    Rng mask_rng(derive_seed(cfg.seed, "gen.heldout_mask", i));
    heldout_masks.push_back(mask_reference(corpus[heldout[i]].ref, cfg.mask_ratio, mask_rng));
  }

  auto eval_heldout = [&](double* accuracy) {
    double total = 0.0;
    long positions = 0, correct = 0;
    for (size_t i = 0; i < heldout.size(); ++i) {
      Tape<T> tape;
      auto* l = model.loss(tape, corpus[heldout[i]].src, heldout_masks[i]);
      total += static_cast<double>(l->value(0, 0));
      if (accuracy) {
        Matd lg = model.masked_logits(corpus[heldout[i]].src, heldout_masks[i]);
        for (Eigen::Index r = 0; r < lg.rows(); ++r) {
          Eigen::Index best = 0;
          lg.row(r).maxCoeff(&best);
          ++positions;
          if (static_cast<int>(best) == heldout_masks[i].originals[static_cast<size_t>(r)])
            ++correct;
        }
      }
    }
    if (accuracy)
      *accuracy = positions == 0 ? 0.0
                                 : static_cast<double>(correct) / static_cast<double>(positions);
    return total / static_cast<double>(heldout.size());
  };

  GeneratorTrainResult result;
  std::vector<Mat<T>> best_values;
  auto snapshot_best = [&]() {
    best_values.clear();
    for (size_t i = 0; i < model.store().size(); ++i)
      best_values.push_back(model.store()[i].value);
  };
  auto restore_best = [&]() {
    if (best_values.empty()) return;
    for (size_t i = 0; i < model.store().size(); ++i)
      model.store()[i].value = best_values[i];
  };
  auto record_eval = [&](long step) {
    const double h = eval_heldout(nullptr);
    result.heldout_curve.push_back({step, h});
    if (result.best_step < 0 || h < result.best_heldout_loss) {
      result.best_heldout_loss = h;
      result.best_step = step;
      snapshot_best();
    }
  };

  record_eval(0);

  Adam<T> opt(cfg.adam);
  Rng train_rng(derive_seed(cfg.seed, "gen.train"));
  Rng drop_rng(derive_seed(cfg.seed, "gen.dropout"));
  const bool use_dropout = model.config().dropout > 0.0;
  for (long step = 1; step <= cfg.steps; ++step) {
    model.store().zero_grads();
    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const ParallelPair& pair = corpus[pool[train_rng.below(pool.size())]];
      MaskedSample masked = mask_reference(pair.ref, cfg.mask_ratio, train_rng);
      Tape<T> tape;
      auto* l = model.loss(tape, pair.src, masked, use_dropout ? &drop_rng : nullptr);
      auto* scaled = tape.mul_scalar(l, 1.0 / cfg.batch_size);
      batch_loss += static_cast<double>(l->value(0, 0)) / cfg.batch_size;
      tape.backward(scaled);
    }
    if (!std::isfinite(batch_loss)) {
      restore_best();
      throw state_error("generator training diverged at step " + std::to_string(step) +
                       "; parameters restored to best step " + std::to_string(result.best_step));
    }
    result.train_curve.push_back({step, batch_loss});
    try {
      opt.step(model.store());
    } catch (const state_error& e) {
      restore_best();
      throw state_error(std::string(e.what()) + " at step " + std::to_string(step) +
                        "; parameters restored to best step " + std::to_string(result.best_step));
    }
    if (cfg.eval_every > 0 && (step % cfg.eval_every == 0 || step == cfg.steps))
      record_eval(step);
  }

  restore_best();
  result.best_heldout_loss = eval_heldout(&result.heldout_accuracy);
  return result;
}

// One pseudo record per pair: fresh masks, generator proposals, strategy
// sampling. The caller hands a per-batch rng stream so every pass over the
// corpus corrupts differently.
template <typename T>
std::vector<PseudoQERecord> generate_batch(GeneratorModel<T>& model,
                                           const std::vector<const ParallelPair*>& pairs,
                                           const SamplingStrategy& strategy, double mask_ratio,
                                           Rng& rng) {
  strategy.validate(model.config().vocab_size);
  std::vector<PseudoQERecord> out;
  out.reserve(pairs.size());
  for (const ParallelPair* pair : pairs) {
    MaskedSample masked = mask_reference(pair->ref, mask_ratio, rng);
    Matd logits = model.masked_logits(pair->src, masked);
    std::vector<int> repl = sample_replacements(logits, strategy, rng);
    out.push_back(make_pseudo_record(*pair, masked, repl));
  }
  return out;
}

struct PseudoDevSplit {
  ParallelCorpus pool;                // pretraining pairs, dev pairs removed
  std::vector<PseudoQERecord> dev;    // frozen pseudo dev set
};

// Cuts `n` pairs out of the corpus and corrupts them once with the Sample
// strategy; the result is frozen for model selection while the remaining
// pool feeds pretraining.
template <typename T>
PseudoDevSplit build_pseudo_dev(GeneratorModel<T>& model, const ParallelCorpus& corpus, int n,
                                double mask_ratio, double temperature, uint64_t seed) {
  if (n < 1 || static_cast<size_t>(n) >= corpus.size())
    throw config_error("build_pseudo_dev: dev size must leave a nonempty pretraining pool");

  Rng rng(derive_seed(seed, "pseudo_dev"));
  std::vector<size_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (size_t i = 0; i + 1 < order.size(); ++i) {
    const size_t j = i + rng.below(order.size() - i);
    std::swap(order[i], order[j]);
  }

  SamplingStrategy strategy;
  strategy.kind = SamplingStrategy::Kind::kSample;
  strategy.temperature = temperature;

  PseudoDevSplit split;
  std::vector<const ParallelPair*> dev_pairs;
  dev_pairs.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) dev_pairs.push_back(&corpus[order[static_cast<size_t>(i)]]);
  split.dev = generate_batch(model, dev_pairs, strategy, mask_ratio, rng);
  split.pool.reserve(corpus.size() - static_cast<size_t>(n));
  for (size_t i = static_cast<size_t>(n); i < order.size(); ++i)
    split.pool.push_back(corpus[order[i]]);
  return split;
}

// Mirrors the real QE file layout (word-level tags, decimal score) so the
// detector and the metrics tooling read pseudo and real data identically.
inline void write_pseudo_dataset(const Vocab& vocab, const std::vector<PseudoQERecord>& records,
                                 const std::string& src_path, const std::string& mt_path,
                                 const std::string& tags_path, const std::string& score_path) {
  std::vector<std::string> src_lines, mt_lines, tag_lines, score_lines;
  src_lines.reserve(records.size());
  for (const PseudoQERecord& rec : records) {
    src_lines.push_back(decode(vocab, rec.src, rec.src_words));
    mt_lines.push_back(decode(vocab, rec.pseudo, rec.ref_words));
    std::vector<int> word_tags;
    word_tags.reserve(rec.ref_words.size());
    for (const auto& [begin, end] : rec.ref_words) {
      int tag = 1;
      for (int t = begin; t < end; ++t)
        if (rec.tags[static_cast<size_t>(t)] == 0) tag = 0;
      word_tags.push_back(tag);
    }
    std::string tags_text;
    for (size_t w = 0; w < word_tags.size(); ++w) {
      if (w) tags_text += ' ';
      tags_text += word_tags[w] ? "OK" : "BAD";
    }
    tag_lines.push_back(std::move(tags_text));
    score_lines.push_back(format_double(rec.score, 6));
  }
  write_lines(src_path, src_lines);
  write_lines(mt_path, mt_lines);
  write_lines(tags_path, tag_lines);
  write_lines(score_path, score_lines);
}

}  // namespace detqe
