// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "detqe/generator.hpp"
#include "detqe/metrics.hpp"

namespace detqe {

// Quality estimates for one sentence pair: per-token OK probabilities for
// the translation and a predicted error score in [0,1].
struct DetectorOutput {
  std::vector<double> word_probs;
  double sentence_score = 0.0;
  LayerStates states;  // filled only when requested
};

inline std::vector<int> with_ratio(const std::vector<int>& tgt) {
  std::vector<int> out;
  out.reserve(tgt.size() + 1);
  out.push_back(Vocab::kRatio);
  out.insert(out.end(), tgt.begin(), tgt.end());
  return out;
}

// Detector: transformer trunk with two sigmoid heads on the final decoder
// states. The translation is prepended with the RATIO token; its state at
// position 0 carries the sentence score, positions 1..n score the tokens.
// The decoder is bidirectional: quality judgment sees the whole sentence.
//
// Heads start at zero, so an untrained detector answers 0.5 everywhere.
template <typename T>
class DetectorModel {
 public:
  using Node = typename Tape<T>::Node;

  struct Logits {
    Node* word = nullptr;  // n x 1, positions 1..n
    Node* sent = nullptr;  // 1 x 1, RATIO position
  };

  explicit DetectorModel(const ModelConfig& config) : trunk_(config) {
    if (config.causal_decoder)
      throw config_error("detector decoder must be bidirectional (causal_decoder off)");
    trunk_.store().create("word_head.w", config.hidden, 1, Init::kZero);
    trunk_.store().create("word_head.b", 1, 1, Init::kZero);
    trunk_.store().create("sent_head.w", config.hidden, 1, Init::kZero);
    trunk_.store().create("sent_head.b", 1, 1, Init::kZero);
  }

  const ModelConfig& config() const { return trunk_.config(); }
  ParamStore<T>& store() { return trunk_.store(); }
  Transformer<T>& trunk() { return trunk_; }

  void init(uint64_t seed) {
    Rng rng(seed);
    trunk_.store().init_params(rng);
  }

  Logits logits(Tape<T>& tape, const std::vector<int>& src,
                const std::vector<int>& tgt_with_ratio, LayerStates* states = nullptr,
                Rng* drop_rng = nullptr) {
    if (tgt_with_ratio.empty() || tgt_with_ratio[0] != Vocab::kRatio)
      throw input_error("detector target must start with the RATIO token");
    if (tgt_with_ratio.size() < 2)
      throw input_error("detector target has no content positions");
    Node* dec = trunk_.forward(tape, src, tgt_with_ratio, states, drop_rng);
    const int n = static_cast<int>(tgt_with_ratio.size()) - 1;
    Logits lg;
    lg.word = tape.add_rowvec(tape.matmul(tape.slice_rows(dec, 1, n),
                                          tape.param(store().at("word_head.w"))),
                              tape.param(store().at("word_head.b")));
    lg.sent = tape.add_rowvec(tape.matmul(tape.slice_rows(dec, 0, 1),
                                          tape.param(store().at("sent_head.w"))),
                              tape.param(store().at("sent_head.b")));
    return lg;
  }

  // Inference: probabilities, no gradients.
  DetectorOutput output(const std::vector<int>& src, const std::vector<int>& tgt_with_ratio,
                        bool collect_states = false) {
    Tape<T> tape;
    DetectorOutput out;
    Logits lg = logits(tape, src, tgt_with_ratio, collect_states ? &out.states : nullptr);
    out.word_probs.reserve(static_cast<size_t>(lg.word->value.rows()));
    for (Eigen::Index r = 0; r < lg.word->value.rows(); ++r)
      out.word_probs.push_back(
          1.0 / (1.0 + std::exp(-static_cast<double>(lg.word->value(r, 0)))));
    out.sentence_score = 1.0 / (1.0 + std::exp(-static_cast<double>(lg.sent->value(0, 0))));
    return out;
  }

 private:
  Transformer<T> trunk_;
};

// Joint objective: mean binary cross-entropy of the token tags plus squared
// error of the sentence score, each with its own weight. A weight of exactly
// zero skips its branch, so the corresponding head receives no gradient at
// all. Pretraining and finetuning both go through this one function.
template <typename T>
typename Tape<T>::Node* qe_loss(Tape<T>& tape, const typename DetectorModel<T>::Logits& lg,
                                const std::vector<int>& tags, double score, double w_word,
                                double w_sent) {
  if (static_cast<Eigen::Index>(tags.size()) != lg.word->value.rows())
    throw input_error("qe_loss: tag count does not match the token positions");
  if (!(score >= 0.0 && score <= 1.0))
    throw input_error("qe_loss: sentence score must be in [0,1]");

  std::vector<double> labels(tags.size());
  for (size_t i = 0; i < tags.size(); ++i) labels[i] = tags[i] ? 1.0 : 0.0;
  typename Tape<T>::Node* loss = tape.mul_scalar(tape.bce_with_logits(lg.word, labels), w_word);
  if (w_sent != 0.0) {
    typename Tape<T>::Node* diff = tape.sub_scalar(tape.sigmoid(lg.sent), score);
    loss = tape.add(loss, tape.mul_scalar(tape.square(diff), w_sent));
  }
  return loss;
}

// One evaluation of the frozen dev set: token F1-MULT, sentence Pearson, and
// their weighted combination used for model selection.
struct EvalPoint {
  long step = 0;
  double f1_mult = 0.0;
  double pearson = 0.0;
  double selection = 0.0;
};

struct PretrainConfig {
  AdamConfig adam;
  SamplingStrategy strategy;
  int steps = 2000;
  int batch_size = 16;
  double mask_ratio = 0.15;
  double w_word = 1.0;
  double w_sent = 1.0;
  bool sentence_objective = true;  // false reproduces the word-only ablation
  double sel_w_f1 = 0.5;
  double sel_w_pearson = 0.5;
  int eval_every = 100;
  uint64_t seed = 1;
  // When set, batches come from this frozen set and nothing is regenerated.
  const std::vector<PseudoQERecord>* static_dataset = nullptr;
};

struct DetectorTrainResult {
  double best_selection = 0.0;
  long best_step = -1;
  std::vector<EvalPoint> curve;
  std::vector<TrainCurvePoint> train_curve;
};

namespace detail {

// Shared pretrain/finetune scaffolding: evaluate, keep the best parameters,
// step the optimizer, abort cleanly when training blows up.
template <typename T>
class TrainDriver {
 public:
  TrainDriver(DetectorModel<T>& model, const AdamConfig& adam) : model_(model), opt_(adam) {}

  DetectorTrainResult& result() { return result_; }

  double record_eval(long step, const EvalPoint& point) {
    EvalPoint p = point;
    p.step = step;
    result_.curve.push_back(p);
    if (result_.best_step < 0 || p.selection > result_.best_selection) {
      result_.best_selection = p.selection;
      result_.best_step = step;
      snapshot();
      improved_ = true;
    } else {
      improved_ = false;
    }
    return p.selection;
  }
  bool improved_last_eval() const { return improved_; }

  void train_step(long step, double batch_loss) {
    if (!std::isfinite(batch_loss)) {
      restore();
      throw state_error("detector training diverged at step " + std::to_string(step) +
                        "; parameters restored to best step " +
                        std::to_string(result_.best_step));
    }
    result_.train_curve.push_back({step, batch_loss});
    try {
      opt_.step(model_.store());
    } catch (const state_error& e) {
      restore();
      throw state_error(std::string(e.what()) + " at step " + std::to_string(step) +
                        "; parameters restored to best step " +
                        std::to_string(result_.best_step));
    }
  }

  void finish() { restore(); }

 private:
  void snapshot() {
    best_.clear();
    for (size_t i = 0; i < model_.store().size(); ++i)
      best_.push_back(model_.store()[i].value);
  }
  void restore() {
    if (best_.empty()) return;
    for (size_t i = 0; i < model_.store().size(); ++i) model_.store()[i].value = best_[i];
  }

  DetectorModel<T>& model_;
  Adam<T> opt_;
  DetectorTrainResult result_;
  std::vector<Mat<T>> best_;
  bool improved_ = false;
};

// Pearson degenerates to undefined when either vector is constant; for
// selection purposes a constant predictor earns zero correlation credit.
inline double pearson_or_zero(const std::vector<double>& pred, const std::vector<double>& gold) {
  try {
    return pearson(pred, gold);
  } catch (const input_error&) {
    return 0.0;
  }
}

}  // namespace detail

// Evaluates the detector on frozen pseudo records at the token level.
template <typename T>
EvalPoint eval_pseudo_dev(DetectorModel<T>& model, const std::vector<PseudoQERecord>& dev,
                          double sel_w_f1, double sel_w_pearson) {
  std::vector<std::vector<int>> pred_tags, gold_tags;
  std::vector<double> pred_scores, gold_scores;
  for (const PseudoQERecord& rec : dev) {
    DetectorOutput out = model.output(rec.src, with_ratio(rec.pseudo));
    std::vector<int> tags(out.word_probs.size());
    for (size_t i = 0; i < tags.size(); ++i) tags[i] = out.word_probs[i] >= 0.5 ? 1 : 0;
    pred_tags.push_back(std::move(tags));
    gold_tags.push_back(rec.tags);
    pred_scores.push_back(out.sentence_score);
    gold_scores.push_back(rec.score);
  }
  EvalPoint p;
  p.f1_mult = f1_mult(pred_tags, gold_tags).f1_mult;
  p.pearson = detail::pearson_or_zero(pred_scores, gold_scores);
  p.selection = sel_w_f1 * p.f1_mult + sel_w_pearson * p.pearson;
  return p;
}

// Evaluates on real QE records at the word level: token probabilities are
// thresholded and merged to word tags before scoring.
template <typename T>
EvalPoint eval_real_dev(DetectorModel<T>& model, const std::vector<QERecord>& dev,
                        double sel_w_f1, double sel_w_pearson, double threshold = 0.5) {
  std::vector<std::vector<int>> pred_tags, gold_tags;
  std::vector<double> pred_scores, gold_scores;
  for (const QERecord& rec : dev) {
    DetectorOutput out = model.output(rec.src, with_ratio(rec.mt));
    std::vector<int> tags(out.word_probs.size());
    for (size_t i = 0; i < tags.size(); ++i) tags[i] = out.word_probs[i] >= threshold ? 1 : 0;
    pred_tags.push_back(merge_subtokens(tags, rec.mt_words));
    gold_tags.push_back(rec.word_tags);
    pred_scores.push_back(out.sentence_score);
    gold_scores.push_back(rec.hter);
  }
  EvalPoint p;
  p.f1_mult = f1_mult(pred_tags, gold_tags).f1_mult;
  p.pearson = detail::pearson_or_zero(pred_scores, gold_scores);
  p.selection = sel_w_f1 * p.f1_mult + sel_w_pearson * p.pearson;
  return p;
}

// Pretrains the detector on pseudo QE data. In the default dynamic mode
// every minibatch is corrupted afresh by the generator, which is read but
// never updated; with a static dataset the batches are drawn from that
// frozen set instead. Selection tracks the pseudo-dev metric and the best
// parameters are restored at the end.
template <typename T>
DetectorTrainResult pretrain_detector(DetectorModel<T>& det, GeneratorModel<T>& gen,
                                      const ParallelCorpus& pool,
                                      const std::vector<PseudoQERecord>& pseudo_dev,
                                      const PretrainConfig& cfg) {
  if (cfg.steps < 1) throw config_error("pretrain_detector: steps must be >= 1");
  if (cfg.batch_size < 1) throw config_error("pretrain_detector: batch_size must be >= 1");
  if (det.config().vocab_size != gen.config().vocab_size)
    throw config_error("pretrain_detector: detector and generator vocabularies differ");
  cfg.strategy.validate(det.config().vocab_size);
  if (pseudo_dev.empty()) throw config_error("pretrain_detector: empty pseudo dev set");
  const bool dynamic = cfg.static_dataset == nullptr;
  if (dynamic && pool.empty()) throw config_error("pretrain_detector: empty pretraining pool");
  if (!dynamic && cfg.static_dataset->empty())
    throw config_error("pretrain_detector: empty static dataset");

  const double w_sent = cfg.sentence_objective ? cfg.w_sent : 0.0;
  detail::TrainDriver<T> driver(det, cfg.adam);
  auto eval = [&](long step) {
    driver.record_eval(step,
                       eval_pseudo_dev(det, pseudo_dev, cfg.sel_w_f1, cfg.sel_w_pearson));
  };
  eval(0);

  Rng train_rng(derive_seed(cfg.seed, "det.pretrain"));
  Rng gen_rng(derive_seed(cfg.seed, "det.pseudo"));
  Rng drop_rng(derive_seed(cfg.seed, "det.dropout"));
  const bool use_dropout = det.config().dropout > 0.0;
  std::vector<PseudoQERecord> batch;
  for (long step = 1; step <= cfg.steps; ++step) {
    if (dynamic) {
      std::vector<const ParallelPair*> pairs;
      pairs.reserve(static_cast<size_t>(cfg.batch_size));
      for (int b = 0; b < cfg.batch_size; ++b)
        pairs.push_back(&pool[train_rng.below(pool.size())]);
      batch = generate_batch(gen, pairs, cfg.strategy, cfg.mask_ratio, gen_rng);
    } else {
      batch.clear();
      for (int b = 0; b < cfg.batch_size; ++b)
        batch.push_back((*cfg.static_dataset)[train_rng.below(cfg.static_dataset->size())]);
    }

    det.store().zero_grads();
    double batch_loss = 0.0;
    for (const PseudoQERecord& rec : batch) {
      Tape<T> tape;
      auto lg = det.logits(tape, rec.src, with_ratio(rec.pseudo), nullptr,
                           use_dropout ? &drop_rng : nullptr);
      auto* l = qe_loss(tape, lg, rec.tags, rec.score, cfg.w_word, w_sent);
      auto* scaled = tape.mul_scalar(l, 1.0 / cfg.batch_size);
      batch_loss += static_cast<double>(l->value(0, 0)) / cfg.batch_size;
      tape.backward(scaled);
    }
    driver.train_step(step, batch_loss);
    if (cfg.eval_every > 0 && (step % cfg.eval_every == 0 || step == cfg.steps)) eval(step);
  }

  driver.finish();
  return driver.result();
}

struct FinetuneConfig {
  AdamConfig adam;
  int steps = 1000;
  int batch_size = 8;
  double w_word = 1.0;
  double w_sent = 1.0;
  double sel_w_f1 = 0.5;
  double sel_w_pearson = 0.5;
  int eval_every = 50;
  int patience = 5;       // evaluations without improvement before stopping; 0 = off
  int freeze_layers = 0;  // freeze embeddings and the lowest N layers per side
  uint64_t seed = 1;
};

// Finetunes on real QE records with the same loss as pretraining; word tags
// are expanded to token tags for the loss and merged back for evaluation.
// Zero steps is a no-op that leaves the parameters untouched.
template <typename T>
DetectorTrainResult finetune_detector(DetectorModel<T>& det, const std::vector<QERecord>& train,
                                      const std::vector<QERecord>& dev,
                                      const FinetuneConfig& cfg) {
  if (cfg.steps < 0) throw config_error("finetune_detector: negative step count");
  if (cfg.batch_size < 1) throw config_error("finetune_detector: batch_size must be >= 1");
  if (cfg.patience < 0) throw config_error("finetune_detector: negative patience");
  if (cfg.freeze_layers < 0 || cfg.freeze_layers > det.config().layers)
    throw config_error("finetune_detector: freeze_layers outside [0, layers]");
  if (train.empty() && cfg.steps > 0)
    throw config_error("finetune_detector: empty training set");
  if (dev.empty()) throw config_error("finetune_detector: empty dev set");

  // token-level targets for the loss
  std::vector<std::vector<int>> token_tags;
  token_tags.reserve(train.size());
  for (const QERecord& rec : train)
    token_tags.push_back(expand_word_tags(rec.word_tags, rec.mt_words));

  auto frozen = [&](const std::string& name) {
    if (cfg.freeze_layers == 0) return false;
    if (name.rfind("src_embed", 0) == 0 || name.rfind("tgt_embed", 0) == 0 ||
        name.rfind("embed", 0) == 0 || name.rfind("src_pos", 0) == 0 ||
        name.rfind("tgt_pos", 0) == 0)
      return true;
    for (const char* side : {"enc.", "dec."}) {
      if (name.rfind(side, 0) != 0) continue;
      const size_t dot = name.find('.', 4);
      if (dot == std::string::npos) continue;
      const std::string idx = name.substr(4, dot - 4);
      if (!idx.empty() && idx.find_first_not_of("0123456789") == std::string::npos &&
          std::stoi(idx) < cfg.freeze_layers)
        return true;
    }
    return false;
  };

  detail::TrainDriver<T> driver(det, cfg.adam);
  auto eval = [&](long step) {
    driver.record_eval(step, eval_real_dev(det, dev, cfg.sel_w_f1, cfg.sel_w_pearson));
  };
  eval(0);

  Rng train_rng(derive_seed(cfg.seed, "det.finetune"));
  Rng drop_rng(derive_seed(cfg.seed, "det.finetune_dropout"));
  const bool use_dropout = det.config().dropout > 0.0;
  int stale_evals = 0;
  for (long step = 1; step <= cfg.steps; ++step) {
    det.store().zero_grads();
    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const size_t pick = train_rng.below(train.size());
      const QERecord& rec = train[pick];
      Tape<T> tape;
      auto lg = det.logits(tape, rec.src, with_ratio(rec.mt), nullptr,
                           use_dropout ? &drop_rng : nullptr);
      auto* l = qe_loss(tape, lg, token_tags[pick], rec.hter, cfg.w_word, cfg.w_sent);
      auto* scaled = tape.mul_scalar(l, 1.0 / cfg.batch_size);
      batch_loss += static_cast<double>(l->value(0, 0)) / cfg.batch_size;
      tape.backward(scaled);
    }
    if (cfg.freeze_layers > 0) {
      for (size_t i = 0; i < det.store().size(); ++i)
        if (frozen(det.store()[i].name)) det.store()[i].grad.setZero();
    }
    driver.train_step(step, batch_loss);
    if (cfg.eval_every > 0 && (step % cfg.eval_every == 0 || step == cfg.steps)) {
      eval(step);
      if (driver.improved_last_eval()) {
        stale_evals = 0;
      } else if (cfg.patience > 0 && ++stale_evals >= cfg.patience) {
        break;
      }
    }
  }

  driver.finish();
  return driver.result();
}

struct PredictOptions {
  double threshold = 0.5;  // probability at or above this tags the word OK
  bool collect_states = false;
};

// Word-level predictions for a list of records, sentence by sentence. Token
// probabilities are thresholded (ties count as OK) and merged so a word is
// OK only when all of its subtokens are.
template <typename T>
Predictions predict_detector(DetectorModel<T>& det, const std::vector<QERecord>& records,
                             const PredictOptions& opt = {},
                             std::vector<LayerStates>* states_out = nullptr) {
  Predictions preds;
  for (const QERecord& rec : records) {
    DetectorOutput out = det.output(rec.src, with_ratio(rec.mt), opt.collect_states);
    std::vector<int> tags(out.word_probs.size());
    for (size_t i = 0; i < tags.size(); ++i)
      tags[i] = out.word_probs[i] >= opt.threshold ? 1 : 0;
    preds.word_tags.push_back(merge_subtokens(tags, rec.mt_words));
    preds.scores.push_back(out.sentence_score);
    if (states_out) states_out->push_back(std::move(out.states));
  }
  return preds;
}

}  // namespace detqe
