// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#include "detqe/ensemble.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cstddef>
#include <string>

#include "detqe/common.hpp"

namespace detqe {
namespace {

// All systems must describe the same sentences: equal sentence counts and,
// per sentence, equal word counts. Anything else is a caller mistake, not
// a condition to paper over.
void check_alignment(const std::vector<SystemPredictions>& systems) {
  if (systems.empty()) throw input_error("ensemble needs at least one system");
  const SystemPredictions& first = systems.front();
  if (first.scores.size() != first.word_probs.size()) {
    throw input_error("system 0: " + std::to_string(first.scores.size()) + " scores vs " +
                      std::to_string(first.word_probs.size()) + " word-probability rows");
  }
  if (first.scores.empty()) throw input_error("ensemble needs at least one sentence");
  for (std::size_t s = 1; s < systems.size(); ++s) {
    const SystemPredictions& sys = systems[s];
    if (sys.scores.size() != first.scores.size() || sys.word_probs.size() != first.word_probs.size()) {
      throw input_error("system " + std::to_string(s) + " has " + std::to_string(sys.scores.size()) +
                        " sentences, system 0 has " + std::to_string(first.scores.size()));
    }
    for (std::size_t i = 0; i < first.word_probs.size(); ++i) {
      if (sys.word_probs[i].size() != first.word_probs[i].size()) {
        throw input_error("sentence " + std::to_string(i) + ": system " + std::to_string(s) +
                          " has " + std::to_string(sys.word_probs[i].size()) + " words, system 0 has " +
                          std::to_string(first.word_probs[i].size()));
      }
    }
  }
}

double clip01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Minimum-norm least squares; SVD drops near-zero singular values, so a
// rank-deficient design (duplicate systems) still has a unique answer.
Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  return a.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
}

}  // namespace

EnsembleWeights fit_weights(const std::vector<SystemPredictions>& systems,
                            const std::vector<std::vector<int>>& gold_word_tags,
                            const std::vector<double>& gold_scores) {
  check_alignment(systems);
  const std::size_t n_sent = systems.front().scores.size();
  if (gold_scores.size() != n_sent || gold_word_tags.size() != n_sent) {
    throw input_error("gold has " + std::to_string(gold_scores.size()) + " scores and " +
                      std::to_string(gold_word_tags.size()) + " tag rows for " +
                      std::to_string(n_sent) + " predicted sentences");
  }
  std::size_t n_words = 0;
  for (std::size_t i = 0; i < n_sent; ++i) {
    if (gold_word_tags[i].size() != systems.front().word_probs[i].size()) {
      throw input_error("sentence " + std::to_string(i) + ": gold has " +
                        std::to_string(gold_word_tags[i].size()) + " tags, predictions have " +
                        std::to_string(systems.front().word_probs[i].size()));
    }
    n_words += gold_word_tags[i].size();
  }

  const std::size_t k = systems.size();
  EnsembleWeights w;

  Eigen::MatrixXd sent_x(n_sent, k + 1);
  Eigen::VectorXd sent_y(n_sent);
  for (std::size_t i = 0; i < n_sent; ++i) {
    for (std::size_t s = 0; s < k; ++s) sent_x(i, s) = systems[s].scores[i];
    sent_x(i, k) = 1.0;
    sent_y(i) = gold_scores[i];
  }
  const Eigen::VectorXd sent_beta = solve_least_squares(sent_x, sent_y);
  w.sent_w.assign(sent_beta.data(), sent_beta.data() + k);
  w.sent_b = sent_beta(k);

  Eigen::MatrixXd word_x(n_words, k);
  Eigen::VectorXd word_y(n_words);
  std::size_t row = 0;
  for (std::size_t i = 0; i < n_sent; ++i) {
    for (std::size_t j = 0; j < gold_word_tags[i].size(); ++j, ++row) {
      for (std::size_t s = 0; s < k; ++s) word_x(row, s) = systems[s].word_probs[i][j];
      word_y(row) = static_cast<double>(gold_word_tags[i][j]);
    }
  }
  if (n_words == 0) throw input_error("ensemble dev set has no words");
  const Eigen::VectorXd word_beta = solve_least_squares(word_x, word_y);
  w.word_w.assign(word_beta.data(), word_beta.data() + k);
  return w;
}

SystemPredictions apply_weights(const std::vector<SystemPredictions>& systems,
                                const EnsembleWeights& weights) {
  check_alignment(systems);
  if (weights.sent_w.size() != systems.size() || weights.word_w.size() != systems.size()) {
    throw input_error("weights cover " + std::to_string(weights.sent_w.size()) + " sentence and " +
                      std::to_string(weights.word_w.size()) + " word systems, got " +
                      std::to_string(systems.size()) + " systems");
  }
  const std::size_t n_sent = systems.front().scores.size();
  SystemPredictions out;
  out.scores.resize(n_sent);
  out.word_probs.resize(n_sent);
  for (std::size_t i = 0; i < n_sent; ++i) {
    double score = weights.sent_b;
    for (std::size_t s = 0; s < systems.size(); ++s) score += weights.sent_w[s] * systems[s].scores[i];
    out.scores[i] = clip01(score);
    const std::size_t len = systems.front().word_probs[i].size();
    out.word_probs[i].resize(len);
    for (std::size_t j = 0; j < len; ++j) {
      double p = 0.0;
      for (std::size_t s = 0; s < systems.size(); ++s) p += weights.word_w[s] * systems[s].word_probs[i][j];
      out.word_probs[i][j] = clip01(p);
    }
  }
  return out;
}

}  // namespace detqe
