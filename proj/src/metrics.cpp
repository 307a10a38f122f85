// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#include "detqe/metrics.hpp"

#include <cmath>

namespace detqe {

std::vector<int> merge_subtokens(const std::vector<int>& subtoken_tags,
                                 const WordSpans& word_boundaries) {
  int covered = 0;
  std::vector<int> word_tags;
  word_tags.reserve(word_boundaries.size());
  for (const auto& [begin, end] : word_boundaries) {
    if (begin != covered || end < begin || end > static_cast<int>(subtoken_tags.size()))
      throw input_error("merge_subtokens: boundaries do not partition the tag sequence");
    int tag = 1;
    for (int i = begin; i < end; ++i)
      if (subtoken_tags[static_cast<size_t>(i)] == 0) tag = 0;
    word_tags.push_back(tag);
    covered = end;
  }
  if (covered != static_cast<int>(subtoken_tags.size()))
    throw input_error("merge_subtokens: boundaries do not cover the tag sequence");
  return word_tags;
}

std::vector<int> expand_word_tags(const std::vector<int>& word_tags,
                                  const WordSpans& word_boundaries) {
  if (word_tags.size() != word_boundaries.size())
    throw input_error("expand_word_tags: tag count does not match word count");
  std::vector<int> out;
  for (size_t w = 0; w < word_tags.size(); ++w) {
    const auto& [begin, end] = word_boundaries[w];
    for (int i = begin; i < end; ++i) out.push_back(word_tags[w]);
  }
  return out;
}

namespace {

double f1_from_counts(long tp, long fp, long fn, bool* degenerate) {
  const long denom = 2 * tp + fp + fn;
  if (denom == 0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

void accumulate(WordEvalResult& r, const std::vector<int>& pred, const std::vector<int>& gold) {
  if (pred.size() != gold.size())
    throw input_error("f1_mult: prediction and gold tag sequences differ in length");
  for (size_t i = 0; i < pred.size(); ++i) {
    const bool p_ok = pred[i] != 0;
    const bool g_ok = gold[i] != 0;
    if (p_ok && g_ok) ++r.ok_tp;
    if (p_ok && !g_ok) { ++r.ok_fp; ++r.bad_fn; }
    if (!p_ok && g_ok) { ++r.ok_fn; ++r.bad_fp; }
    if (!p_ok && !g_ok) ++r.bad_tp;
  }
}

WordEvalResult finalize(WordEvalResult r) {
  r.f1_ok = f1_from_counts(r.ok_tp, r.ok_fp, r.ok_fn, &r.degenerate_ok);
  r.f1_bad = f1_from_counts(r.bad_tp, r.bad_fp, r.bad_fn, &r.degenerate_bad);
  r.f1_mult = r.f1_ok * r.f1_bad;
  return r;
}

}  // namespace

WordEvalResult f1_mult(const std::vector<std::vector<int>>& pred_tags,
                       const std::vector<std::vector<int>>& gold_tags) {
  if (pred_tags.size() != gold_tags.size())
    throw input_error("f1_mult: prediction and gold corpora differ in sentence count");
  if (pred_tags.empty()) throw input_error("f1_mult: empty corpus");
  WordEvalResult r;
  for (size_t s = 0; s < pred_tags.size(); ++s) accumulate(r, pred_tags[s], gold_tags[s]);
  return finalize(r);
}

WordEvalResult f1_mult_flat(const std::vector<int>& pred_tags, const std::vector<int>& gold_tags) {
  if (pred_tags.empty() && gold_tags.empty()) throw input_error("f1_mult: empty tag sequences");
  WordEvalResult r;
  accumulate(r, pred_tags, gold_tags);
  return finalize(r);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw input_error("pearson: vectors differ in length");
  if (a.empty()) throw input_error("pearson: empty input");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) throw input_error("pearson: degenerate variance (constant vector)");
  return cov / std::sqrt(va * vb);
}

SentEvalResult sentence_metrics(const std::vector<double>& pred, const std::vector<double>& gold) {
  if (pred.size() != gold.size()) throw input_error("sentence_metrics: vectors differ in length");
  if (pred.empty()) throw input_error("sentence_metrics: empty input");
  SentEvalResult r;
  r.pearson = pearson(pred, gold);
  double abs_sum = 0.0, sq_sum = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - gold[i];
    abs_sum += std::fabs(d);
    sq_sum += d * d;
  }
  const double n = static_cast<double>(pred.size());
  r.mae = abs_sum / n;
  r.rmse = std::sqrt(sq_sum / n);
  return r;
}

std::vector<double> default_bucket_edges() {
  return {0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0};
}

std::vector<BucketResult> error_ratio_breakdown(const std::vector<std::vector<int>>& gold_tags,
                                                const std::vector<std::vector<int>>& pred_tags,
                                                const std::vector<double>& edges) {
  if (gold_tags.size() != pred_tags.size())
    throw input_error("error_ratio_breakdown: corpora differ in sentence count");
  if (edges.size() < 2 || edges.front() != 0.0 || edges.back() != 1.0)
    throw config_error("error_ratio_breakdown: edges must start at 0 and end at 1");
  for (size_t i = 0; i + 1 < edges.size(); ++i)
    if (edges[i] >= edges[i + 1])
      throw config_error("error_ratio_breakdown: edges must be strictly increasing");

  const size_t n_buckets = edges.size() - 1;
  std::vector<WordEvalResult> acc(n_buckets);
  std::vector<long> counts(n_buckets, 0);
  std::vector<long> words(n_buckets, 0);
  for (size_t s = 0; s < gold_tags.size(); ++s) {
    const auto& gold = gold_tags[s];
    if (gold.empty()) throw input_error("error_ratio_breakdown: empty tag sequence");
    long bad = 0;
    for (int t : gold)
      if (t == 0) ++bad;
    const double ratio = static_cast<double>(bad) / static_cast<double>(gold.size());
    size_t bucket = n_buckets - 1;  // ratio == 1.0 falls in the last bucket
    for (size_t b = 0; b < n_buckets; ++b) {
      if (ratio >= edges[b] && ratio < edges[b + 1]) {
        bucket = b;
        break;
      }
    }
    accumulate(acc[bucket], pred_tags[s], gold);
    ++counts[bucket];
    words[bucket] += static_cast<long>(gold.size());
  }

  std::vector<BucketResult> out;
  for (size_t b = 0; b < n_buckets; ++b) {
    if (counts[b] == 0) continue;  // empty buckets are absent, not zero
    BucketResult res;
    res.lo = edges[b];
    res.hi = edges[b + 1];
    res.n_sentences = counts[b];
    res.n_words = words[b];
    res.word = finalize(acc[b]);
    out.push_back(res);
  }
  return out;
}

}  // namespace detqe
