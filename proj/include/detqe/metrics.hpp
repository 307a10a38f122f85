// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "detqe/data.hpp"

namespace detqe {

// Word-level evaluation over corpus-level (micro) confusion counts.
struct WordEvalResult {
  double f1_ok = 0.0;
  double f1_bad = 0.0;
  double f1_mult = 0.0;  // f1_ok * f1_bad
  long ok_tp = 0, ok_fp = 0, ok_fn = 0;
  long bad_tp = 0, bad_fp = 0, bad_fn = 0;
  // set when a class had zero support and zero predictions (its F1 is
  // defined as 0 rather than NaN)
  bool degenerate_ok = false;
  bool degenerate_bad = false;
};

struct SentEvalResult {
  double pearson = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
};

// Merges subtoken tags to word tags: a word is OK only if every one of its
// subtokens is OK.
std::vector<int> merge_subtokens(const std::vector<int>& subtoken_tags,
                                 const WordSpans& word_boundaries);

// Expands word tags to subtoken tags (every subtoken inherits its word's
// tag); the inverse direction used when training on word-labeled data.
std::vector<int> expand_word_tags(const std::vector<int>& word_tags,
                                  const WordSpans& word_boundaries);

WordEvalResult f1_mult(const std::vector<std::vector<int>>& pred_tags,
                       const std::vector<std::vector<int>>& gold_tags);
WordEvalResult f1_mult_flat(const std::vector<int>& pred_tags, const std::vector<int>& gold_tags);

// Pearson, MAE, RMSE. A constant input vector raises input_error rather
// than returning NaN.
SentEvalResult sentence_metrics(const std::vector<double>& pred, const std::vector<double>& gold);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

// F1-MULT within buckets of the gold BAD-token ratio. Edges must partition
// [0,1]; buckets that receive no sentences are omitted from the result.
struct BucketResult {
  double lo = 0.0;
  double hi = 0.0;
  long n_sentences = 0;
  long n_words = 0;
  WordEvalResult word;
};

std::vector<BucketResult> error_ratio_breakdown(const std::vector<std::vector<int>>& gold_tags,
                                                const std::vector<std::vector<int>>& pred_tags,
                                                const std::vector<double>& edges);

// Eight equal-width bins over [0,1]; the 12.5% boundary falls on an edge.
std::vector<double> default_bucket_edges();

}  // namespace detqe
