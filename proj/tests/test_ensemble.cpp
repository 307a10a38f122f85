// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "detqe/ensemble.hpp"
#include "detqe/rng.hpp"

using namespace detqe;

namespace {

// Random dev-style set: gold scores and tags plus per-system noisy views.
struct DevSet {
  std::vector<std::vector<int>> gold_tags;
  std::vector<double> gold_scores;
};

DevSet random_dev(Rng& rng, int n_sent, int max_len) {
  DevSet d;
  for (int i = 0; i < n_sent; ++i) {
    const int len = 1 + static_cast<int>(rng.below(max_len));
    std::vector<int> tags(len);
    for (int& t : tags) t = rng.uniform() < 0.7 ? 1 : 0;
    d.gold_tags.push_back(tags);
    d.gold_scores.push_back(rng.uniform());
  }
  return d;
}

// A system whose probabilities are the gold corrupted by bounded noise.
SystemPredictions noisy_system(const DevSet& d, Rng& rng, double noise) {
  SystemPredictions s;
  for (std::size_t i = 0; i < d.gold_tags.size(); ++i) {
    std::vector<double> probs;
    for (int t : d.gold_tags[i]) {
      double p = t + rng.uniform_range(-noise, noise);
      probs.push_back(p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p));
    }
    s.word_probs.push_back(probs);
    double sc = d.gold_scores[i] + rng.uniform_range(-noise, noise);
    s.scores.push_back(sc < 0.0 ? 0.0 : (sc > 1.0 ? 1.0 : sc));
  }
  return s;
}

double sent_mse(const std::vector<double>& pred, const std::vector<double>& gold) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - gold[i]) * (pred[i] - gold[i]);
  return acc / static_cast<double>(pred.size());
}

double word_mse(const std::vector<std::vector<double>>& pred, const std::vector<std::vector<int>>& gold) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < pred[i].size(); ++j, ++n) {
      const double d = pred[i][j] - static_cast<double>(gold[i][j]);
      acc += d * d;
    }
  }
  return acc / static_cast<double>(n);
}

// Raw linear blend straight from the weights, no clipping; used to check
// the least-squares optimality, which holds before clipping.
SystemPredictions raw_blend(const std::vector<SystemPredictions>& systems, const EnsembleWeights& w) {
  SystemPredictions out;
  for (std::size_t i = 0; i < systems.front().scores.size(); ++i) {
    double sc = w.sent_b;
    for (std::size_t s = 0; s < systems.size(); ++s) sc += w.sent_w[s] * systems[s].scores[i];
    out.scores.push_back(sc);
    std::vector<double> probs;
    for (std::size_t j = 0; j < systems.front().word_probs[i].size(); ++j) {
      double p = 0.0;
      for (std::size_t s = 0; s < systems.size(); ++s) p += w.word_w[s] * systems[s].word_probs[i][j];
      probs.push_back(p);
    }
    out.word_probs.push_back(probs);
  }
  return out;
}

}  // namespace

TEST_CASE("single system equal to gold recovers weight one, intercept zero") {
  Rng rng(11);
  DevSet d = random_dev(rng, 40, 6);
  SystemPredictions exact;
  exact.scores = d.gold_scores;
  for (const auto& tags : d.gold_tags) {
    std::vector<double> probs;
    for (int t : tags) probs.push_back(static_cast<double>(t));
    exact.word_probs.push_back(probs);
  }
  EnsembleWeights w = fit_weights({exact}, d.gold_tags, d.gold_scores);
  CHECK(w.sent_w.size() == 1);
  CHECK(w.sent_w[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(w.sent_b == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::abs(w.sent_b) < 1e-9);
  CHECK(w.word_w.size() == 1);
  CHECK(w.word_w[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("known mixture of two systems is recovered exactly") {
  Rng rng(12);
  DevSet d = random_dev(rng, 60, 6);
  SystemPredictions s1 = noisy_system(d, rng, 0.3);
  SystemPredictions s2 = noisy_system(d, rng, 0.3);
  // Rebuild the gold as an exact half-half mixture so the fit is consistent.
  DevSet mix = d;
  for (std::size_t i = 0; i < d.gold_scores.size(); ++i) {
    mix.gold_scores[i] = 0.5 * s1.scores[i] + 0.5 * s2.scores[i];
  }
  EnsembleWeights w = fit_weights({s1, s2}, d.gold_tags, mix.gold_scores);
  CHECK(std::abs(w.sent_w[0] - 0.5) < 1e-9);
  CHECK(std::abs(w.sent_w[1] - 0.5) < 1e-9);
  CHECK(std::abs(w.sent_b) < 1e-9);
}

TEST_CASE("duplicate systems split weight evenly and keep the blend unchanged") {
  Rng rng(13);
  DevSet d = random_dev(rng, 50, 5);
  SystemPredictions s1 = noisy_system(d, rng, 0.25);

  EnsembleWeights solo = fit_weights({s1}, d.gold_tags, d.gold_scores);
  EnsembleWeights dup = fit_weights({s1, s1}, d.gold_tags, d.gold_scores);

  // Minimum-norm least squares shares the coefficient between the copies.
  CHECK(std::abs(dup.sent_w[0] - dup.sent_w[1]) < 1e-9);
  CHECK(std::abs(dup.word_w[0] - dup.word_w[1]) < 1e-9);
  CHECK(std::abs(dup.sent_w[0] + dup.sent_w[1] - solo.sent_w[0]) < 1e-9);
  CHECK(std::abs(dup.word_w[0] + dup.word_w[1] - solo.word_w[0]) < 1e-9);

  SystemPredictions from_solo = apply_weights({s1}, solo);
  SystemPredictions from_dup = apply_weights({s1, s1}, dup);
  for (std::size_t i = 0; i < from_solo.scores.size(); ++i) {
    CHECK(std::abs(from_solo.scores[i] - from_dup.scores[i]) < 1e-9);
    for (std::size_t j = 0; j < from_solo.word_probs[i].size(); ++j) {
      CHECK(std::abs(from_solo.word_probs[i][j] - from_dup.word_probs[i][j]) < 1e-9);
    }
  }
}

TEST_CASE("dev mse of the blend never exceeds any constituent, before clipping") {
  Rng rng(14);
  DevSet d = random_dev(rng, 80, 8);
  std::vector<SystemPredictions> systems = {
      noisy_system(d, rng, 0.15),
      noisy_system(d, rng, 0.35),
      noisy_system(d, rng, 0.5),
  };
  EnsembleWeights w = fit_weights(systems, d.gold_tags, d.gold_scores);
  SystemPredictions blend = raw_blend(systems, w);
  const double blend_sent = sent_mse(blend.scores, d.gold_scores);
  const double blend_word = word_mse(blend.word_probs, d.gold_tags);
  for (const SystemPredictions& sys : systems) {
    CHECK(blend_sent <= sent_mse(sys.scores, d.gold_scores) + 1e-12);
    CHECK(blend_word <= word_mse(sys.word_probs, d.gold_tags) + 1e-12);
  }
}

TEST_CASE("blend with zero intercept is linear in the constituents") {
  Rng rng(15);
  DevSet d = random_dev(rng, 30, 5);
  std::vector<SystemPredictions> a = {noisy_system(d, rng, 0.2), noisy_system(d, rng, 0.2)};
  std::vector<SystemPredictions> b = {noisy_system(d, rng, 0.2), noisy_system(d, rng, 0.2)};

  EnsembleWeights w;
  w.sent_w = {0.3, 0.4};
  w.sent_b = 0.0;
  w.word_w = {0.25, 0.45};

  // Convex combination of inputs; every raw output stays inside [0,1], so
  // clipping is inert and linearity must hold exactly.
  const double lam = 0.6;
  std::vector<SystemPredictions> mixed = a;
  for (std::size_t s = 0; s < a.size(); ++s) {
    for (std::size_t i = 0; i < a[s].scores.size(); ++i) {
      mixed[s].scores[i] = lam * a[s].scores[i] + (1.0 - lam) * b[s].scores[i];
      for (std::size_t j = 0; j < a[s].word_probs[i].size(); ++j) {
        mixed[s].word_probs[i][j] = lam * a[s].word_probs[i][j] + (1.0 - lam) * b[s].word_probs[i][j];
      }
    }
  }
  SystemPredictions pa = apply_weights(a, w);
  SystemPredictions pb = apply_weights(b, w);
  SystemPredictions pm = apply_weights(mixed, w);
  for (std::size_t i = 0; i < pa.scores.size(); ++i) {
    CHECK(pm.scores[i] == doctest::Approx(lam * pa.scores[i] + (1.0 - lam) * pb.scores[i]).epsilon(1e-12));
    for (std::size_t j = 0; j < pa.word_probs[i].size(); ++j) {
      CHECK(pm.word_probs[i][j] ==
            doctest::Approx(lam * pa.word_probs[i][j] + (1.0 - lam) * pb.word_probs[i][j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("applied blend clips scores and probabilities into the unit interval") {
  SystemPredictions s;
  s.scores = {0.9, 0.1};
  s.word_probs = {{0.8, 0.2}, {0.5}};
  EnsembleWeights w;
  w.sent_w = {2.0};
  w.sent_b = -0.5;
  w.word_w = {-1.0};
  SystemPredictions out = apply_weights({s}, w);
  CHECK(out.scores[0] == 1.0);   // raw 1.3
  CHECK(out.scores[1] == 0.0);   // raw -0.3
  CHECK(out.word_probs[0][0] == 0.0);
  CHECK(out.word_probs[1][0] == 0.0);
}

TEST_CASE("misaligned or mismatched inputs are rejected") {
  Rng rng(16);
  DevSet d = random_dev(rng, 10, 4);
  SystemPredictions s1 = noisy_system(d, rng, 0.2);

  CHECK_THROWS_AS(fit_weights({}, d.gold_tags, d.gold_scores), input_error);

  SystemPredictions bad = s1;
  bad.word_probs[3].push_back(0.5);
  CHECK_THROWS_WITH_AS(fit_weights({s1, bad}, d.gold_tags, d.gold_scores),
                       doctest::Contains("sentence 3"), input_error);

  SystemPredictions shorter = s1;
  shorter.scores.pop_back();
  shorter.word_probs.pop_back();
  CHECK_THROWS_WITH_AS(fit_weights({s1, shorter}, d.gold_tags, d.gold_scores),
                       doctest::Contains("sentences"), input_error);

  std::vector<double> short_gold(d.gold_scores.begin(), d.gold_scores.end() - 1);
  CHECK_THROWS_AS(fit_weights({s1}, d.gold_tags, short_gold), input_error);

  std::vector<std::vector<int>> bad_tags = d.gold_tags;
  bad_tags[0].push_back(1);
  CHECK_THROWS_AS(fit_weights({s1}, bad_tags, d.gold_scores), input_error);

  EnsembleWeights w = fit_weights({s1}, d.gold_tags, d.gold_scores);
  CHECK_THROWS_WITH_AS(apply_weights({s1, s1}, w), doctest::Contains("weights cover"), input_error);
}

TEST_CASE("three systems with one duplicated keep the two-system blend") {
  Rng rng(17);
  DevSet d = random_dev(rng, 40, 6);
  SystemPredictions s1 = noisy_system(d, rng, 0.2);
  SystemPredictions s2 = noisy_system(d, rng, 0.4);

  EnsembleWeights two = fit_weights({s1, s2}, d.gold_tags, d.gold_scores);
  EnsembleWeights three = fit_weights({s1, s2, s1}, d.gold_tags, d.gold_scores);

  SystemPredictions blend_two = apply_weights({s1, s2}, two);
  SystemPredictions blend_three = apply_weights({s1, s2, s1}, three);
  for (std::size_t i = 0; i < blend_two.scores.size(); ++i) {
    CHECK(std::abs(blend_two.scores[i] - blend_three.scores[i]) < 1e-9);
    for (std::size_t j = 0; j < blend_two.word_probs[i].size(); ++j) {
      CHECK(std::abs(blend_two.word_probs[i][j] - blend_three.word_probs[i][j]) < 1e-9);
    }
  }
}
