// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

namespace detqe {

// One system's raw outputs: per-sentence word OK-probabilities and sentence
// scores. Ensembling combines probabilities, not hard tags, because hard
// tags lose the calibration the weighting needs.
struct SystemPredictions {
  std::vector<std::vector<double>> word_probs;
  std::vector<double> scores;
};

// Linear blend learned on a development set: sentence scores get a weight
// per system plus an intercept, word probabilities a weight per system.
struct EnsembleWeights {
  std::vector<double> sent_w;
  double sent_b = 0.0;
  std::vector<double> word_w;
};

// Least-squares fit of the blending weights against the dev gold; a
// rank-deficient design (duplicate systems) resolves to the minimum-norm
// solution, which splits weight evenly without changing the blend.
EnsembleWeights fit_weights(const std::vector<SystemPredictions>& systems,
                            const std::vector<std::vector<int>>& gold_word_tags,
                            const std::vector<double>& gold_scores);

// Applies the learned blend; scores and probabilities are clipped to [0,1].
SystemPredictions apply_weights(const std::vector<SystemPredictions>& systems,
                                const EnsembleWeights& weights);

}  // namespace detqe
