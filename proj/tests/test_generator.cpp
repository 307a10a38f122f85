// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
//
// Masked rewriter: masking, replacement sampling, pseudo-label construction,
// training, and pseudo-dataset output.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "detqe/generator.hpp"
#include "testutil.hpp"

using namespace detqe;

namespace {

// Logits matrix with every special id pinned far above the content ids, so
// any strategy that failed to exclude specials would pick one immediately.
Matd content_logits(int rows, const std::vector<double>& content) {
  Matd m(rows, Vocab::kNumSpecial + static_cast<int>(content.size()));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < Vocab::kNumSpecial; ++c) m(r, c) = 100.0;
    for (size_t i = 0; i < content.size(); ++i)
      m(r, Vocab::kNumSpecial + static_cast<Eigen::Index>(i)) = content[i];
  }
  return m;
}

std::vector<long> pick_counts(const std::vector<int>& picks, int vocab) {
  std::vector<long> counts(static_cast<size_t>(vocab), 0);
  for (int p : picks) {
    REQUIRE(p >= Vocab::kNumSpecial);
    REQUIRE(p < vocab);
    ++counts[static_cast<size_t>(p)];
  }
  return counts;
}

double chi_square_uniform(const std::vector<long>& counts, int first, int vocab, long total) {
  const double expected = static_cast<double>(total) / (vocab - first);
  double stat = 0.0;
  for (int c = first; c < vocab; ++c) {
    const double d = static_cast<double>(counts[static_cast<size_t>(c)]) - expected;
    stat += d * d / expected;
  }
  return stat;
}

// Small bijective-lexicon corpus plus a rewriter trained on it. Built once;
// the training tests and the trained-proposal tests share it.
struct GenFixture {
  Vocab vocab;
  ParallelCorpus corpus;
  std::unique_ptr<GeneratorModel<float>> model;
  GeneratorTrainResult result;
};

GenFixture& trained_generator() {
  static GenFixture fx = [] {
    GenFixture f;
    SynthSpec spec;
    spec.seed = 7;
    spec.n_pairs = 1500;
    spec.vocab_size = 30;
    spec.min_len = 4;
    spec.max_len = 8;
    spec.zipf = 1.0;
    spec.qe_train = 5;
    spec.qe_dev = 5;
    spec.qe_test = 5;
    SynthResult sr = synthesize_corpus(spec);
    std::vector<std::string> lines = sr.train_src;
    lines.insert(lines.end(), sr.train_ref.begin(), sr.train_ref.end());
    f.vocab = learn_bpe(lines, 80);
    Encoder enc(f.vocab);
    for (size_t i = 0; i < sr.train_src.size(); ++i) {
      Encoded s = enc.encode(sr.train_src[i]);
      Encoded r = enc.encode(sr.train_ref[i]);
      f.corpus.push_back({s.ids, r.ids, s.word_spans, r.word_spans});
    }
    ModelConfig mc;
    mc.layers = 2;
    mc.hidden = 32;
    mc.heads = 4;
    mc.ffn = 64;
    mc.vocab_size = f.vocab.size();
    mc.max_len = 32;
    f.model = std::make_unique<GeneratorModel<float>>(mc);
    f.model->init(11);
    GeneratorTrainConfig tc;
    tc.adam.lr = 2e-3;
    tc.steps = 4000;
    tc.batch_size = 16;
    tc.heldout_pairs = 100;
    tc.eval_every = 250;
    tc.seed = 3;
    f.result = train_generator(*f.model, f.corpus, tc);
    return f;
  }();
  return fx;
}

std::vector<const ParallelPair*> pair_ptrs(const ParallelCorpus& corpus, size_t n) {
  std::vector<const ParallelPair*> out;
  for (size_t i = 0; i < std::min(n, corpus.size()); ++i) out.push_back(&corpus[i]);
  return out;
}

double mean_score(const std::vector<PseudoQERecord>& recs) {
  double s = 0.0;
  for (const auto& r : recs) s += r.score;
  return s / static_cast<double>(recs.size());
}

}  // namespace

TEST_CASE("masking hides ceil(ratio * len) positions, at least one") {
  Rng rng(5);
  std::vector<int> ref(20);
  for (int i = 0; i < 20; ++i) ref[static_cast<size_t>(i)] = 6 + i;

  MaskedSample m = mask_reference(ref, 0.15, rng);
  CHECK(m.mask_positions.size() == 3);  // ceil(0.15 * 20)

  std::vector<int> short_ref = {6, 7, 8};
  MaskedSample s = mask_reference(short_ref, 0.15, rng);
  CHECK(s.mask_positions.size() == 1);  // ceil(0.45) keeps the floor of one

  std::vector<int> mid(7, 9);
  CHECK(mask_reference(mid, 0.5, rng).mask_positions.size() == 4);  // ceil(3.5)
}

TEST_CASE("masking only touches the chosen positions") {
  Rng rng(9);
  std::vector<int> ref(15);
  for (int i = 0; i < 15; ++i) ref[static_cast<size_t>(i)] = 6 + (i * 3) % 20;
  MaskedSample m = mask_reference(ref, 0.4, rng);

  REQUIRE(m.masked_ref.size() == ref.size());
  REQUIRE(m.originals.size() == m.mask_positions.size());
  for (size_t i = 1; i < m.mask_positions.size(); ++i)
    CHECK(m.mask_positions[i - 1] < m.mask_positions[i]);

  std::set<int> masked(m.mask_positions.begin(), m.mask_positions.end());
  for (int p = 0; p < static_cast<int>(ref.size()); ++p) {
    if (masked.count(p)) {
      CHECK(m.masked_ref[static_cast<size_t>(p)] == Vocab::kMask);
    } else {
      CHECK(m.masked_ref[static_cast<size_t>(p)] == ref[static_cast<size_t>(p)]);
    }
  }
  for (size_t i = 0; i < m.mask_positions.size(); ++i)
    CHECK(m.originals[i] == ref[static_cast<size_t>(m.mask_positions[i])]);
}

TEST_CASE("masking is deterministic per seed and varies across seeds") {
  std::vector<int> ref(20, 7);
  Rng a(3), b(3);
  MaskedSample ma = mask_reference(ref, 0.5, a);
  MaskedSample mb = mask_reference(ref, 0.5, b);
  CHECK(ma.mask_positions == mb.mask_positions);

  bool any_diff = false;
  for (uint64_t seed = 0; seed < 20 && !any_diff; ++seed) {
    Rng c(seed);
    any_diff = mask_reference(ref, 0.5, c).mask_positions != ma.mask_positions;
  }
  CHECK(any_diff);
}

TEST_CASE("masking rejects degenerate ratios and empty input") {
  Rng rng(1);
  std::vector<int> ref = {6, 7, 8};
  CHECK_THROWS_AS(mask_reference(ref, 0.0, rng), config_error);
  CHECK_THROWS_AS(mask_reference(ref, 1.0, rng), config_error);
  CHECK_THROWS_AS(mask_reference(ref, -0.2, rng), config_error);
  CHECK_THROWS_AS(mask_reference({}, 0.15, rng), input_error);
}

TEST_CASE("sampling strategies validate their parameters") {
  SamplingStrategy s;
  s.kind = SamplingStrategy::Kind::kSample;
  s.temperature = 0.0;
  CHECK_THROWS_AS(s.validate(20), config_error);
  s.temperature = -1.0;
  CHECK_THROWS_AS(s.validate(20), config_error);
  s.temperature = 0.5;
  CHECK_NOTHROW(s.validate(20));

  SamplingStrategy t;
  t.kind = SamplingStrategy::Kind::kTopK;
  t.k = 0;
  CHECK_THROWS_AS(t.validate(20), config_error);
  t.k = 21;
  CHECK_THROWS_AS(t.validate(20), config_error);
  t.k = 20;
  CHECK_NOTHROW(t.validate(20));

  CHECK(SamplingStrategy{SamplingStrategy::Kind::kGreedy}.describe() == "greedy");
  CHECK(SamplingStrategy{SamplingStrategy::Kind::kRandom}.describe() == "random");
  CHECK(s.describe() == "sample(t=0.500)");
  CHECK(t.describe() == "topk(k=20)");
}

TEST_CASE("no strategy ever proposes a special token") {
  // 4 content ids, every special pinned at logit 100
  Matd logits = content_logits(200, {0.3, 2.0, 1.0, -0.5});
  Rng rng(17);
  for (SamplingStrategy::Kind kind :
       {SamplingStrategy::Kind::kSample, SamplingStrategy::Kind::kTopK,
        SamplingStrategy::Kind::kGreedy, SamplingStrategy::Kind::kRandom}) {
    SamplingStrategy s;
    s.kind = kind;
    s.k = 4;
    std::vector<int> picks = sample_replacements(logits, s, rng);
    REQUIRE(picks.size() == 200);
    for (int p : picks) {
      CHECK(p >= Vocab::kNumSpecial);
      CHECK(p < logits.cols());
    }
  }
}

TEST_CASE("greedy picks the highest content logit without drawing randomness") {
  Matd logits = content_logits(5, {1.0, 3.0, 2.0});
  SamplingStrategy greedy;
  greedy.kind = SamplingStrategy::Kind::kGreedy;

  Rng rng(42);
  const Rng::State before = rng.save();
  std::vector<int> picks = sample_replacements(logits, greedy, rng);
  for (int p : picks) CHECK(p == Vocab::kNumSpecial + 1);

  Rng untouched(0);
  untouched.restore(before);
  CHECK(rng.next_u64() == untouched.next_u64());
}

TEST_CASE("top-1 equals greedy and ties break on the lower id") {
  Matd logits = content_logits(3, {1.0, 3.0, 2.0});
  SamplingStrategy top1;
  top1.kind = SamplingStrategy::Kind::kTopK;
  top1.k = 1;
  Rng rng(0);
  for (int p : sample_replacements(logits, top1, rng))
    CHECK(p == Vocab::kNumSpecial + 1);

  Matd tie = content_logits(3, {2.0, 2.0, 1.0});
  for (int p : sample_replacements(tie, top1, rng))
    CHECK(p == Vocab::kNumSpecial);  // equal best logits resolve to the lower id
}

TEST_CASE("top-k draws uniformly among the k best logits") {
  Matd logits = content_logits(6000, {5.0, 4.0, 3.0, 1.0, 0.0});
  SamplingStrategy s;
  s.kind = SamplingStrategy::Kind::kTopK;
  s.k = 3;
  Rng rng(21);
  std::vector<int> picks = sample_replacements(logits, s, rng);
  std::vector<long> counts = pick_counts(picks, static_cast<int>(logits.cols()));
  // the bottom two content logits never appear
  CHECK(counts[static_cast<size_t>(Vocab::kNumSpecial + 3)] == 0);
  CHECK(counts[static_cast<size_t>(Vocab::kNumSpecial + 4)] == 0);
  for (int i = 0; i < 3; ++i) {
    const double freq =
        static_cast<double>(counts[static_cast<size_t>(Vocab::kNumSpecial + i)]) / 6000.0;
    CHECK(freq > 1.0 / 3.0 - 0.025);
    CHECK(freq < 1.0 / 3.0 + 0.025);
  }
}

TEST_CASE("top-k over the whole content vocabulary is uniform") {
  const int vocab = 50;
  const int n_content = vocab - Vocab::kNumSpecial;
  const long draws = 100000;
  Matd logits(draws, vocab);
  for (Eigen::Index r = 0; r < logits.rows(); ++r)
    for (int c = 0; c < vocab; ++c)
      logits(r, c) = c < Vocab::kNumSpecial ? 100.0 : 0.01 * c;

  SamplingStrategy s;
  s.kind = SamplingStrategy::Kind::kTopK;
  s.k = n_content;
  Rng rng(33);
  std::vector<long> counts = pick_counts(sample_replacements(logits, s, rng), vocab);
  // 99th percentile of chi^2 with 43 degrees of freedom
  CHECK(chi_square_uniform(counts, Vocab::kNumSpecial, vocab, draws) < 67.46);
}

TEST_CASE("random replacement is uniform over the content vocabulary") {
  const int vocab = 50;
  const long draws = 100000;
  Matd logits = Matd::Zero(draws, vocab);
  SamplingStrategy s;
  s.kind = SamplingStrategy::Kind::kRandom;
  Rng rng(55);
  std::vector<long> counts = pick_counts(sample_replacements(logits, s, rng), vocab);
  CHECK(chi_square_uniform(counts, Vocab::kNumSpecial, vocab, draws) < 67.46);
}

TEST_CASE("near-zero temperature concentrates sampling on the argmax") {
  Matd logits = content_logits(10000, {0.3, 2.0, 1.0, -0.5});
  SamplingStrategy s;
  s.kind = SamplingStrategy::Kind::kSample;
  s.temperature = 0.05;
  Rng rng(77);
  std::vector<int> picks = sample_replacements(logits, s, rng);
  long argmax_hits = 0;
  for (int p : picks)
    if (p == Vocab::kNumSpecial + 1) ++argmax_hits;
  CHECK(argmax_hits >= 9990);
}

TEST_CASE("unit temperature reproduces softmax frequencies") {
  // two content tokens with logits (ln 3, 0): probabilities 0.75 / 0.25
  Matd logits = content_logits(20000, {std::log(3.0), 0.0});
  SamplingStrategy s;
  s.kind = SamplingStrategy::Kind::kSample;
  Rng rng(13);
  std::vector<int> picks = sample_replacements(logits, s, rng);
  long first = 0;
  for (int p : picks)
    if (p == Vocab::kNumSpecial) ++first;
  const double freq = static_cast<double>(first) / 20000.0;
  CHECK(freq > 0.74);
  CHECK(freq < 0.76);
}

TEST_CASE("high temperature flattens distinct logits towards uniform") {
  Matd logits = content_logits(60000, {4.0, 2.0, 0.0, -2.0, -4.0, 1.0});
  SamplingStrategy s;
  s.kind = SamplingStrategy::Kind::kSample;
  s.temperature = 1e6;
  Rng rng(19);
  std::vector<long> counts =
      pick_counts(sample_replacements(logits, s, rng), static_cast<int>(logits.cols()));
  // 99th percentile of chi^2 with 5 degrees of freedom
  CHECK(chi_square_uniform(counts, Vocab::kNumSpecial, static_cast<int>(logits.cols()), 60000) <
        15.09);
}

TEST_CASE("sampling is deterministic per seed") {
  Matd logits = content_logits(500, {1.0, 0.5, 0.0, -0.5});
  SamplingStrategy s;
  s.kind = SamplingStrategy::Kind::kSample;
  s.temperature = 0.8;
  Rng a(4), b(4);
  CHECK(sample_replacements(logits, s, a) == sample_replacements(logits, s, b));
}

TEST_CASE("pseudo labels mark exactly the changed positions") {
  ParallelPair pair;
  pair.src = {6, 7};
  pair.ref = {10, 11, 12, 13};
  pair.src_words = {{0, 2}};
  pair.ref_words = {{0, 2}, {2, 4}};

  MaskedSample masked;
  masked.masked_ref = {10, Vocab::kMask, 12, 13};
  masked.mask_positions = {1};
  masked.originals = {11};

  PseudoQERecord rec = make_pseudo_record(pair, masked, {20});
  CHECK(rec.pseudo == std::vector<int>{10, 20, 12, 13});
  CHECK(rec.tags == std::vector<int>{1, 0, 1, 1});
  CHECK(rec.score == 0.25);
  CHECK(rec.src == pair.src);
  CHECK(rec.ref_words == pair.ref_words);
}

TEST_CASE("resampling the original token keeps the position OK") {
  ParallelPair pair;
  pair.ref = {10, 11, 12, 13};
  pair.ref_words = {{0, 4}};

  MaskedSample masked;
  masked.masked_ref = {Vocab::kMask, 11, Vocab::kMask, 13};
  masked.mask_positions = {0, 2};
  masked.originals = {10, 12};

  PseudoQERecord same = make_pseudo_record(pair, masked, {10, 12});
  CHECK(same.tags == std::vector<int>{1, 1, 1, 1});
  CHECK(same.score == 0.0);

  MaskedSample all;
  all.masked_ref = {Vocab::kMask, Vocab::kMask, Vocab::kMask, Vocab::kMask};
  all.mask_positions = {0, 1, 2, 3};
  all.originals = {10, 11, 12, 13};
  PseudoQERecord changed = make_pseudo_record(pair, all, {20, 21, 22, 23});
  CHECK(changed.tags == std::vector<int>{0, 0, 0, 0});
  CHECK(changed.score == 1.0);
}

TEST_CASE("pseudo record invariants hold for random corruptions") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int len = 1 + static_cast<int>(rng.below(12));
    ParallelPair pair;
    pair.ref.resize(static_cast<size_t>(len));
    for (int i = 0; i < len; ++i)
      pair.ref[static_cast<size_t>(i)] = 6 + static_cast<int>(rng.below(30));
    pair.ref_words = {{0, len}};

    const double ratio = 0.05 + 0.9 * rng.uniform();
    MaskedSample masked = mask_reference(pair.ref, ratio, rng);
    std::vector<int> repl(masked.mask_positions.size());
    for (auto& r : repl) r = 6 + static_cast<int>(rng.below(30));

    PseudoQERecord rec = make_pseudo_record(pair, masked, repl);
    REQUIRE(rec.pseudo.size() == pair.ref.size());
    REQUIRE(rec.tags.size() == pair.ref.size());

    std::set<int> masked_set(masked.mask_positions.begin(), masked.mask_positions.end());
    long ok = 0;
    for (int j = 0; j < len; ++j) {
      if (!masked_set.count(j)) {
        CHECK(rec.pseudo[static_cast<size_t>(j)] == pair.ref[static_cast<size_t>(j)]);
        CHECK(rec.tags[static_cast<size_t>(j)] == 1);
      }
      CHECK(rec.tags[static_cast<size_t>(j)] ==
            (rec.pseudo[static_cast<size_t>(j)] == pair.ref[static_cast<size_t>(j)] ? 1 : 0));
      ok += rec.tags[static_cast<size_t>(j)];
    }
    // the score is exact, not approximate
    CHECK(rec.score == 1.0 - static_cast<double>(ok) / static_cast<double>(len));
  }
}

TEST_CASE("pseudo record construction rejects misaligned replacements") {
  ParallelPair pair;
  pair.ref = {10, 11};
  MaskedSample masked;
  masked.masked_ref = {Vocab::kMask, 11};
  masked.mask_positions = {0};
  masked.originals = {10};
  CHECK_THROWS_AS(make_pseudo_record(pair, masked, {20, 21}), state_error);
  masked.masked_ref = {Vocab::kMask};
  CHECK_THROWS_AS(make_pseudo_record(pair, masked, {20}), state_error);
}

TEST_CASE("untrained rewriter starts near the uniform cross-entropy") {
  GenFixture& fx = trained_generator();
  REQUIRE(!fx.result.heldout_curve.empty());
  CHECK(fx.result.heldout_curve.front().step == 0);
  const double uniform_ce = std::log(static_cast<double>(fx.vocab.size()));
  CHECK(fx.result.heldout_curve.front().value > 0.9 * uniform_ce);
  CHECK(fx.result.heldout_curve.front().value < 1.1 * uniform_ce);
}

TEST_CASE("training recovers masked tokens on a lexicon corpus") {
  GenFixture& fx = trained_generator();
  CHECK(fx.result.train_curve.size() == 4000);
  CHECK(fx.result.heldout_curve.back().step == 4000);
  CHECK(fx.result.best_step > 0);
  CHECK(fx.result.best_heldout_loss < fx.result.heldout_curve.front().value);
  CHECK(fx.result.heldout_accuracy > 0.9);

  double best_seen = fx.result.heldout_curve.front().value;
  for (const auto& p : fx.result.heldout_curve) best_seen = std::min(best_seen, p.value);
  CHECK(fx.result.best_heldout_loss == best_seen);
}

TEST_CASE("zero learning rate leaves the held-out loss unchanged") {
  GenFixture& fx = trained_generator();
  ModelConfig mc = fx.model->config();
  GeneratorModel<float> fresh(mc);
  fresh.init(23);
  GeneratorTrainConfig tc;
  tc.adam.lr = 0.0;
  tc.steps = 3;
  tc.batch_size = 4;
  tc.heldout_pairs = 20;
  tc.eval_every = 1;
  tc.seed = 9;
  GeneratorTrainResult r = train_generator(fresh, fx.corpus, tc);
  REQUIRE(r.heldout_curve.size() == 4);
  for (const auto& p : r.heldout_curve) CHECK(p.value == r.heldout_curve.front().value);
}

TEST_CASE("training is reproducible from the seed") {
  GenFixture& fx = trained_generator();
  ModelConfig mc = fx.model->config();
  GeneratorTrainConfig tc;
  tc.steps = 25;
  tc.batch_size = 8;
  tc.heldout_pairs = 20;
  tc.eval_every = 5;
  tc.seed = 14;

  GeneratorModel<float> a(mc), b(mc);
  a.init(6);
  b.init(6);
  GeneratorTrainResult ra = train_generator(a, fx.corpus, tc);
  GeneratorTrainResult rb = train_generator(b, fx.corpus, tc);
  REQUIRE(ra.train_curve.size() == rb.train_curve.size());
  for (size_t i = 0; i < ra.train_curve.size(); ++i)
    CHECK(ra.train_curve[i].value == rb.train_curve[i].value);
  CHECK(ra.best_heldout_loss == rb.best_heldout_loss);
  CHECK(ra.heldout_accuracy == rb.heldout_accuracy);
}

TEST_CASE("non-finite loss aborts training with a diagnostic") {
  GenFixture& fx = trained_generator();
  ModelConfig mc = fx.model->config();
  GeneratorModel<float> poisoned(mc);
  poisoned.init(8);
  poisoned.store().at("lm.b").value(0, 0) = std::numeric_limits<float>::quiet_NaN();
  GeneratorTrainConfig tc;
  tc.steps = 2;
  tc.batch_size = 2;
  tc.heldout_pairs = 5;
  tc.seed = 2;
  CHECK_THROWS_WITH_AS(train_generator(poisoned, fx.corpus, tc),
                       doctest::Contains("diverged"), state_error);
}

TEST_CASE("training rejects impossible configurations") {
  GenFixture& fx = trained_generator();
  ModelConfig mc = fx.model->config();
  GeneratorModel<float> m(mc);
  m.init(1);
  GeneratorTrainConfig tc;
  tc.steps = 1;
  tc.heldout_pairs = static_cast<int>(fx.corpus.size());
  CHECK_THROWS_AS(train_generator(m, fx.corpus, tc), config_error);
  tc.heldout_pairs = 10;
  tc.batch_size = 0;
  CHECK_THROWS_AS(train_generator(m, fx.corpus, tc), config_error);
  tc.batch_size = 1;
  tc.steps = -1;
  CHECK_THROWS_AS(train_generator(m, fx.corpus, tc), config_error);
}

TEST_CASE("greedy proposals from a trained rewriter mostly restore the original") {
  GenFixture& fx = trained_generator();
  SamplingStrategy greedy;
  greedy.kind = SamplingStrategy::Kind::kGreedy;
  Rng rng(101);
  std::vector<PseudoQERecord> recs =
      generate_batch(*fx.model, pair_ptrs(fx.corpus, 200), greedy, 0.15, rng);
  CHECK(mean_score(recs) < 0.05);
}

TEST_CASE("hotter sampling corrupts more than colder sampling") {
  GenFixture& fx = trained_generator();
  auto run = [&](double tau) {
    SamplingStrategy s;
    s.kind = SamplingStrategy::Kind::kSample;
    s.temperature = tau;
    Rng rng(55);
    return mean_score(generate_batch(*fx.model, pair_ptrs(fx.corpus, 200), s, 0.15, rng));
  };
  CHECK(run(0.1) < run(3.0));
}

TEST_CASE("wider top-k corrupts more than top-1") {
  GenFixture& fx = trained_generator();
  auto run = [&](int k) {
    SamplingStrategy s;
    s.kind = SamplingStrategy::Kind::kTopK;
    s.k = k;
    Rng rng(56);
    return mean_score(generate_batch(*fx.model, pair_ptrs(fx.corpus, 200), s, 0.15, rng));
  };
  CHECK(run(1) < run(8));
}

TEST_CASE("random replacement hits the expected corruption rate") {
  GenFixture& fx = trained_generator();
  SamplingStrategy s;
  s.kind = SamplingStrategy::Kind::kRandom;
  Rng rng(71);
  const double ratio = 0.5;
  std::vector<PseudoQERecord> recs =
      generate_batch(*fx.model, pair_ptrs(fx.corpus, 300), s, ratio, rng);

  long bad = 0;
  double expected_masked = 0.0;
  for (const auto& rec : recs) {
    for (int t : rec.tags) bad += t == 0 ? 1 : 0;
    expected_masked += std::ceil(ratio * static_cast<double>(rec.pseudo.size()));
  }
  // a uniform draw restores the original with probability 1 / |content vocab|
  const int n_content = fx.vocab.size() - Vocab::kNumSpecial;
  const double expected_bad = expected_masked * (1.0 - 1.0 / n_content);
  CHECK(std::abs(static_cast<double>(bad) - expected_bad) / expected_bad < 0.05);
}

TEST_CASE("successive batches corrupt the same pairs differently") {
  GenFixture& fx = trained_generator();
  SamplingStrategy s;
  s.kind = SamplingStrategy::Kind::kSample;
  Rng rng(61);
  std::vector<const ParallelPair*> pairs = pair_ptrs(fx.corpus, 50);
  std::vector<PseudoQERecord> first = generate_batch(*fx.model, pairs, s, 0.3, rng);
  std::vector<PseudoQERecord> second = generate_batch(*fx.model, pairs, s, 0.3, rng);
  bool any_diff = false;
  for (size_t i = 0; i < first.size(); ++i)
    if (first[i].pseudo != second[i].pseudo || first[i].tags != second[i].tags) any_diff = true;
  CHECK(any_diff);

  Rng r1(88), r2(88);
  std::vector<PseudoQERecord> ga = generate_batch(*fx.model, pairs, s, 0.3, r1);
  std::vector<PseudoQERecord> gb = generate_batch(*fx.model, pairs, s, 0.3, r2);
  for (size_t i = 0; i < ga.size(); ++i) {
    CHECK(ga[i].pseudo == gb[i].pseudo);
    CHECK(ga[i].tags == gb[i].tags);
    CHECK(ga[i].score == gb[i].score);
  }
}

TEST_CASE("pseudo dev split is frozen, sized, and disjoint from the pool") {
  GenFixture& fx = trained_generator();

  // restrict to pairs with unique sources so membership is checkable by text
  std::set<std::vector<int>> seen;
  ParallelCorpus unique;
  for (const auto& p : fx.corpus) {
    if (seen.insert(p.src).second) unique.push_back(p);
    if (unique.size() == 60) break;
  }
  REQUIRE(unique.size() == 60);

  PseudoDevSplit a = build_pseudo_dev(*fx.model, unique, 12, 0.15, 1.0, 5);
  PseudoDevSplit b = build_pseudo_dev(*fx.model, unique, 12, 0.15, 1.0, 5);
  CHECK(a.dev.size() == 12);
  CHECK(a.pool.size() == 48);
  REQUIRE(b.dev.size() == a.dev.size());
  for (size_t i = 0; i < a.dev.size(); ++i) {
    CHECK(a.dev[i].pseudo == b.dev[i].pseudo);
    CHECK(a.dev[i].tags == b.dev[i].tags);
    CHECK(a.dev[i].score == b.dev[i].score);
  }

  std::set<std::vector<int>> pool_srcs;
  for (const auto& p : a.pool) pool_srcs.insert(p.src);
  for (const auto& rec : a.dev) CHECK(pool_srcs.count(rec.src) == 0);

  CHECK_THROWS_AS(build_pseudo_dev(*fx.model, unique, 0, 0.15, 1.0, 5), config_error);
  CHECK_THROWS_AS(build_pseudo_dev(*fx.model, unique, 60, 0.15, 1.0, 5), config_error);
}

TEST_CASE("pseudo dataset files mirror the QE layout") {
  GenFixture& fx = trained_generator();
  SamplingStrategy s;
  s.kind = SamplingStrategy::Kind::kSample;
  Rng rng(91);
  std::vector<PseudoQERecord> recs =
      generate_batch(*fx.model, pair_ptrs(fx.corpus, 20), s, 0.3, rng);

  testutil::TempDir td("pseudo_dataset");
  write_pseudo_dataset(fx.vocab, recs, td.file("p.src"), td.file("p.mt"), td.file("p.tags"),
                       td.file("p.hter"));

  Encoder enc(fx.vocab);
  QEDataset ds =
      read_qe_dataset(enc, td.file("p.src"), td.file("p.mt"), td.file("p.tags"), td.file("p.hter"));
  REQUIRE(ds.records.size() == recs.size());
  for (size_t i = 0; i < recs.size(); ++i) {
    REQUIRE(ds.records[i].word_tags.size() == recs[i].ref_words.size());
    for (size_t w = 0; w < recs[i].ref_words.size(); ++w) {
      int tag = 1;
      for (int t = recs[i].ref_words[w].first; t < recs[i].ref_words[w].second; ++t)
        if (recs[i].tags[static_cast<size_t>(t)] == 0) tag = 0;
      CHECK(ds.records[i].word_tags[w] == tag);
    }
    CHECK(ds.records[i].hter == doctest::Approx(recs[i].score).epsilon(1e-5));
  }
}
