// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "detqe/tape.hpp"

namespace detqe {

struct ModelConfig {
  int layers = 2;
  int hidden = 64;
  int heads = 4;
  int ffn = 128;
  int vocab_size = 0;
  int max_len = 64;
  bool causal_decoder = false;
  bool share_embeddings = false;
  double dropout = 0.0;

  void validate() const {
    std::string bad;
    auto fail = [&bad](const std::string& msg) {
      if (!bad.empty()) bad += "; ";
      bad += msg;
    };
    if (layers < 1) fail("layers must be >= 1");
    if (hidden < 1) fail("hidden must be >= 1");
    if (heads < 1) fail("heads must be >= 1");
    if (heads >= 1 && hidden >= 1 && hidden % heads != 0)
      fail("hidden must be divisible by heads");
    if (ffn < 1) fail("ffn must be >= 1");
    if (vocab_size < 1) fail("vocab_size must be >= 1");
    if (max_len < 1) fail("max_len must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0,1)");
    if (!bad.empty()) throw config_error("model config: " + bad);
  }
};

// Per-layer hidden states for one (src, tgt) pair. Index 0 is the token
// embedding before the position signal is added; the final index is the
// representation the output heads consume. Stored in double so downstream
// analysis is precision-independent.
struct LayerStates {
  std::vector<Matd> enc;  // layers+1 entries, each positions x hidden
  std::vector<Matd> dec;
};

enum class Init { kZero, kOne, kFanInRows, kFanInCols };

// Named parameter tensors in creation order, plus gradient and Adam moment
// slots of identical shape. Creation order is the serialization order.
template <typename T>
class ParamStore {
 public:
  ParamTensor<T>& create(const std::string& name, int rows, int cols, Init init) {
    if (by_name_.count(name)) throw state_error("duplicate parameter name: " + name);
    auto p = std::make_unique<ParamTensor<T>>();
    p->name = name;
    p->value = Mat<T>::Zero(rows, cols);
    p->grad = Mat<T>::Zero(rows, cols);
    p->m = Mat<T>::Zero(rows, cols);
    p->v = Mat<T>::Zero(rows, cols);
    inits_.push_back(init);
    params_.push_back(std::move(p));
    by_name_.emplace(name, params_.back().get());
    return *params_.back();
  }

  ParamTensor<T>* find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }
  ParamTensor<T>& at(const std::string& name) {
    ParamTensor<T>* p = find(name);
    if (!p) throw state_error("unknown parameter: " + name);
    return *p;
  }

  size_t size() const { return params_.size(); }
  ParamTensor<T>& operator[](size_t i) { return *params_[i]; }
  const ParamTensor<T>& operator[](size_t i) const { return *params_[i]; }

  long scalar_count() const {
    long n = 0;
    for (const auto& p : params_) n += static_cast<long>(p->value.size());
    return n;
  }

  void zero_grads() {
    for (auto& p : params_) p->grad.setZero();
  }

  // Draws every tensor from its declared initializer with one pass of `rng`,
  // so the full parameter state is a pure function of the seed.
  void init_params(Rng& rng) {
    for (size_t i = 0; i < params_.size(); ++i) {
      ParamTensor<T>& p = *params_[i];
      switch (inits_[i]) {
        case Init::kZero:
          p.value.setZero();
          break;
        case Init::kOne:
          p.value.setOnes();
          break;
        case Init::kFanInRows:
        case Init::kFanInCols: {
          const double fan = inits_[i] == Init::kFanInRows
                                 ? static_cast<double>(p.value.rows())
                                 : static_cast<double>(p.value.cols());
          const double limit = std::sqrt(3.0 / fan);
          for (Eigen::Index r = 0; r < p.value.rows(); ++r)
            for (Eigen::Index c = 0; c < p.value.cols(); ++c)
              p.value(r, c) = static_cast<T>((rng.uniform() * 2.0 - 1.0) * limit);
          break;
        }
      }
      p.grad.setZero();
      p.m.setZero();
      p.v.setZero();
    }
  }

 private:
  std::vector<std::unique_ptr<ParamTensor<T>>> params_;
  std::vector<Init> inits_;
  std::unordered_map<std::string, ParamTensor<T>*> by_name_;
};

// Encoder-decoder transformer trunk: learned absolute positions, pre-norm
// residual blocks, multi-head attention, ReLU feed-forward, and a final
// layer norm per stack. Output heads live with their callers and share this
// trunk's parameter store so one checkpoint covers the whole model.
template <typename T>
class Transformer {
 public:
  using Node = typename Tape<T>::Node;

  explicit Transformer(const ModelConfig& config) : cfg_(config) {
    cfg_.validate();
    const int h = cfg_.hidden;
    if (cfg_.share_embeddings) {
      store_.create("embed", cfg_.vocab_size, h, Init::kFanInCols);
    } else {
      store_.create("src_embed", cfg_.vocab_size, h, Init::kFanInCols);
      store_.create("tgt_embed", cfg_.vocab_size, h, Init::kFanInCols);
    }
    store_.create("src_pos", cfg_.max_len, h, Init::kFanInCols);
    store_.create("tgt_pos", cfg_.max_len, h, Init::kFanInCols);
    for (int l = 0; l < cfg_.layers; ++l) {
      const std::string p = "enc." + std::to_string(l) + ".";
      create_norm(p + "ln1");
      create_attention(p + "attn");
      create_norm(p + "ln2");
      create_ffn(p + "ffn");
    }
    create_norm("enc.final_ln");
    for (int l = 0; l < cfg_.layers; ++l) {
      const std::string p = "dec." + std::to_string(l) + ".";
      create_norm(p + "ln1");
      create_attention(p + "attn");
      create_norm(p + "ln2");
      create_attention(p + "cross");
      create_norm(p + "ln3");
      create_ffn(p + "ffn");
    }
    create_norm("dec.final_ln");
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }

  // Runs encoder and decoder; returns the final decoder states node
  // (tgt positions x hidden). `states`, when given, receives every layer's
  // activations. `drop_rng` enables dropout (training paths only).
  Node* forward(Tape<T>& tape, const std::vector<int>& src_ids, const std::vector<int>& tgt_ids,
                LayerStates* states = nullptr, Rng* drop_rng = nullptr) {
    check_ids(src_ids, "src");
    check_ids(tgt_ids, "tgt");

    Node* src = embed(tape, src_ids, /*is_src=*/true, states ? &states->enc : nullptr, drop_rng);
    for (int l = 0; l < cfg_.layers; ++l) {
      const std::string p = "enc." + std::to_string(l) + ".";
      src = block_attn(tape, src, src, p + "ln1", p + "attn", /*causal=*/false, drop_rng);
      src = block_ffn(tape, src, p + "ln2", p + "ffn", drop_rng);
      record(states ? &states->enc : nullptr, src);
    }
    Node* memory = final_norm(tape, src, "enc.final_ln");
    replace_last(states ? &states->enc : nullptr, memory);

    Node* tgt = embed(tape, tgt_ids, /*is_src=*/false, states ? &states->dec : nullptr, drop_rng);
    for (int l = 0; l < cfg_.layers; ++l) {
      const std::string p = "dec." + std::to_string(l) + ".";
      tgt = block_attn(tape, tgt, tgt, p + "ln1", p + "attn", cfg_.causal_decoder, drop_rng);
      tgt = block_attn(tape, tgt, memory, p + "ln2", p + "cross", /*causal=*/false, drop_rng);
      tgt = block_ffn(tape, tgt, p + "ln3", p + "ffn", drop_rng);
      record(states ? &states->dec : nullptr, tgt);
    }
    Node* out = final_norm(tape, tgt, "dec.final_ln");
    replace_last(states ? &states->dec : nullptr, out);
    return out;
  }

 private:
  void create_norm(const std::string& prefix) {
    store_.create(prefix + ".gain", 1, cfg_.hidden, Init::kOne);
    store_.create(prefix + ".bias", 1, cfg_.hidden, Init::kZero);
  }
  void create_attention(const std::string& prefix) {
    const int h = cfg_.hidden;
    for (const char* w : {"wq", "wk", "wv", "wo"})
      store_.create(prefix + "." + w, h, h, Init::kFanInRows);
    // no key bias: it shifts every score in a softmax row by the same
    // amount, so it can never affect the output
    for (const char* b : {"bq", "bv", "bo"})
      store_.create(prefix + "." + b, 1, h, Init::kZero);
  }
  void create_ffn(const std::string& prefix) {
    store_.create(prefix + ".w1", cfg_.hidden, cfg_.ffn, Init::kFanInRows);
    store_.create(prefix + ".b1", 1, cfg_.ffn, Init::kZero);
    store_.create(prefix + ".w2", cfg_.ffn, cfg_.hidden, Init::kFanInRows);
    store_.create(prefix + ".b2", 1, cfg_.hidden, Init::kZero);
  }

  void check_ids(const std::vector<int>& ids, const char* side) const {
    if (ids.empty()) throw input_error(std::string(side) + " sequence is empty");
    if (static_cast<int>(ids.size()) > cfg_.max_len)
      throw input_error(std::string(side) + " sequence length " + std::to_string(ids.size()) +
                        " exceeds max_len " + std::to_string(cfg_.max_len));
    for (int id : ids)
      if (id < 0 || id >= cfg_.vocab_size)
        throw input_error(std::string(side) + " token id out of range: " + std::to_string(id));
  }

  Node* embed(Tape<T>& tape, const std::vector<int>& ids, bool is_src,
              std::vector<Matd>* states, Rng* drop_rng) {
    const char* table = cfg_.share_embeddings ? "embed" : (is_src ? "src_embed" : "tgt_embed");
    Node* tok = tape.gather_rows(tape.param(store_.at(table)), ids);
    if (states) {
      states->clear();
      states->push_back(tok->value.template cast<double>());
    }
    std::vector<int> positions(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<int>(i);
    Node* pos =
        tape.gather_rows(tape.param(store_.at(is_src ? "src_pos" : "tgt_pos")), positions);
    Node* x = tape.add(tok, pos);
    return maybe_dropout(tape, x, drop_rng);
  }

  Node* block_attn(Tape<T>& tape, Node* x, Node* kv, const std::string& ln,
                   const std::string& attn, bool causal, Rng* drop_rng) {
    Node* q_in = tape.layernorm(x, tape.param(store_.at(ln + ".gain")),
                                tape.param(store_.at(ln + ".bias")));
    // self-attention normalizes its own input once; cross-attention reads the
    // already-normalized encoder memory
    Node* kv_in = kv == x ? q_in : kv;
    Node* out = attention(tape, q_in, kv_in, attn, causal);
    return tape.add(x, maybe_dropout(tape, out, drop_rng));
  }

  Node* attention(Tape<T>& tape, Node* q_in, Node* kv_in, const std::string& prefix,
                  bool causal) {
    const int dk = cfg_.hidden / cfg_.heads;
    Node* q = tape.add_rowvec(tape.matmul(q_in, tape.param(store_.at(prefix + ".wq"))),
                              tape.param(store_.at(prefix + ".bq")));
    Node* k = tape.matmul(kv_in, tape.param(store_.at(prefix + ".wk")));
    Node* v = tape.add_rowvec(tape.matmul(kv_in, tape.param(store_.at(prefix + ".wv"))),
                              tape.param(store_.at(prefix + ".bv")));
    std::vector<Node*> heads_out;
    heads_out.reserve(static_cast<size_t>(cfg_.heads));
    for (int h = 0; h < cfg_.heads; ++h) {
      Node* qh = tape.slice_cols(q, h * dk, dk);
      Node* kh = tape.slice_cols(k, h * dk, dk);
      Node* vh = tape.slice_cols(v, h * dk, dk);
      Node* scores = tape.mul_scalar(tape.matmul_bt(qh, kh), 1.0 / std::sqrt(dk));
      Node* weights = tape.softmax_rows(scores, causal);
      heads_out.push_back(tape.matmul(weights, vh));
    }
    Node* merged = cfg_.heads == 1 ? heads_out[0] : tape.concat_cols(heads_out);
    return tape.add_rowvec(tape.matmul(merged, tape.param(store_.at(prefix + ".wo"))),
                           tape.param(store_.at(prefix + ".bo")));
  }

  Node* block_ffn(Tape<T>& tape, Node* x, const std::string& ln, const std::string& ffn,
                  Rng* drop_rng) {
    Node* n = tape.layernorm(x, tape.param(store_.at(ln + ".gain")),
                             tape.param(store_.at(ln + ".bias")));
    Node* h = tape.relu(tape.add_rowvec(tape.matmul(n, tape.param(store_.at(ffn + ".w1"))),
                                        tape.param(store_.at(ffn + ".b1"))));
    Node* out = tape.add_rowvec(tape.matmul(h, tape.param(store_.at(ffn + ".w2"))),
                                tape.param(store_.at(ffn + ".b2")));
    return tape.add(x, maybe_dropout(tape, out, drop_rng));
  }

  Node* final_norm(Tape<T>& tape, Node* x, const std::string& ln) {
    return tape.layernorm(x, tape.param(store_.at(ln + ".gain")),
                          tape.param(store_.at(ln + ".bias")));
  }

  Node* maybe_dropout(Tape<T>& tape, Node* x, Rng* drop_rng) {
    if (!drop_rng || cfg_.dropout <= 0.0) return x;
    return tape.dropout(x, cfg_.dropout, *drop_rng);
  }

  void record(std::vector<Matd>* states, Node* x) {
    if (states) states->push_back(x->value.template cast<double>());
  }
  // the final stack entry is the post-norm representation, so overwrite the
  // last per-layer record once the final norm has run
  void replace_last(std::vector<Matd>* states, Node* x) {
    if (states) states->back() = x->value.template cast<double>();
  }

  ModelConfig cfg_;
  ParamStore<T> store_;
};

}  // namespace detqe
