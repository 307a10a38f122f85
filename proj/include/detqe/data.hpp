// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "detqe/bpe.hpp"

namespace detqe {

using WordSpans = std::vector<std::pair<int, int>>;

// A tokenized parallel sentence pair: source and reference.
struct ParallelPair {
  std::vector<int> src;
  std::vector<int> ref;
  WordSpans src_words;
  WordSpans ref_words;
};

using ParallelCorpus = std::vector<ParallelPair>;

// One real QE example: source, machine translation, per-word OK(1)/BAD(0)
// tags and an HTER score in [0,1].
struct QERecord {
  std::vector<int> src;
  std::vector<int> mt;
  std::vector<int> word_tags;
  double hter = 0.0;
  WordSpans src_words;
  WordSpans mt_words;
};

struct QEDataset {
  std::vector<QERecord> records;
  std::vector<std::string> warnings;  // e.g. HTER values clipped to 1.0
};

// One generated pseudo QE example. Tags are per token position of `pseudo`
// (1 = kept reference token, 0 = replaced), and
// score == 1 - sum(tags)/len(tags) exactly.
struct PseudoQERecord {
  std::vector<int> src;
  std::vector<int> pseudo;
  std::vector<int> tags;
  double score = 0.0;
  WordSpans src_words;
  WordSpans ref_words;  // pseudo is positionally aligned with the reference
};

// ---- parallel corpus I/O (two line-aligned text files) ----

ParallelCorpus load_parallel(Encoder& enc, const std::string& src_path,
                             const std::string& ref_path);

// ---- QE dataset I/O (WMT layout: src / mt / tags / hter files) ----

QEDataset read_qe_dataset(Encoder& enc, const std::string& src_path,
                          const std::string& mt_path, const std::string& tags_path,
                          const std::string& hter_path);

void write_qe_dataset(const Vocab& vocab, const std::vector<QERecord>& records,
                      const std::string& src_path, const std::string& mt_path,
                      const std::string& tags_path, const std::string& hter_path);

// ---- prediction files (WMT submission layout: tags file + scores file) ----

struct Predictions {
  std::vector<std::vector<int>> word_tags;  // 1 = OK, 0 = BAD
  std::vector<double> scores;
};

void write_predictions(const Predictions& preds, const std::string& tags_path,
                       const std::string& scores_path);
Predictions read_predictions(const std::string& tags_path, const std::string& scores_path);

// ---- synthetic corpus ----

// A toy translation relation: two disjoint surface alphabets linked by a
// seeded bijective word lexicon, optional local reordering in the reference,
// and QE sets built by corrupting held-out references with known tags.
struct SynthSpec {
  uint64_t seed = 1;
  int n_pairs = 20000;
  int vocab_size = 400;  // word types per side
  int min_len = 4;
  int max_len = 9;
  double noise = 0.25;    // per-word corruption probability in QE sets
  double reorder = 0.1;   // adjacent-swap probability in references
  double zipf = 1.5;      // frequency skew; 0 = uniform
  int qe_train = 500;
  int qe_dev = 250;
  int qe_test = 500;
};

struct QeTextSet {
  std::vector<std::string> src;
  std::vector<std::string> mt;
  std::vector<std::string> tags;  // "OK BAD ..." per line
  std::vector<std::string> hter;  // one decimal per line
};

struct SynthResult {
  std::vector<std::string> train_src;
  std::vector<std::string> train_ref;
  QeTextSet qe_train;
  QeTextSet qe_dev;
  QeTextSet qe_test;
};

SynthResult synthesize_corpus(const SynthSpec& spec);

// Writes train.src/train.ref plus qe_{train,dev,test}.{src,mt,tags,hter}.
void write_synth(const SynthResult& result, const std::string& dir);

}  // namespace detqe
