// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#include "detqe/data.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "detqe/rng.hpp"

namespace detqe {

namespace {

void check_no_reserved(const std::vector<int>& ids, const std::string& what, size_t line_no) {
  for (int id : ids)
    if (id == Vocab::kMask || id == Vocab::kRatio)
      throw input_error(what + " line " + std::to_string(line_no) +
                        ": reserved MASK/RATIO token in text");
}

double parse_hter(const std::string& line, size_t line_no, std::vector<std::string>* warnings) {
  auto fields = split_ws(line);
  if (fields.size() != 1)
    throw input_error("hter line " + std::to_string(line_no) + ": expected one decimal, got '" +
                      line + "'");
  const std::string& tok = fields[0];
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size() || !std::isfinite(v))
    throw input_error("hter line " + std::to_string(line_no) + ": not a number: '" + tok + "'");
  if (v < 0.0)
    throw input_error("hter line " + std::to_string(line_no) + ": negative score " + tok);
  if (v > 1.0) {
    // HTER can exceed 1 in the wild; clip and keep a record of it.
    if (warnings)
      warnings->push_back("hter line " + std::to_string(line_no) + ": clipped " + tok + " to 1.0");
    v = 1.0;
  }
  return v;
}

}  // namespace

ParallelCorpus load_parallel(Encoder& enc, const std::string& src_path,
                             const std::string& ref_path) {
  auto src_lines = read_lines(src_path);
  auto ref_lines = read_lines(ref_path);
  if (src_lines.size() != ref_lines.size())
    throw input_error("parallel files not line-aligned: " + std::to_string(src_lines.size()) +
                      " vs " + std::to_string(ref_lines.size()));
  ParallelCorpus corpus;
  corpus.reserve(src_lines.size());
  for (size_t i = 0; i < src_lines.size(); ++i) {
    Encoded s = enc.encode(src_lines[i]);
    Encoded r = enc.encode(ref_lines[i]);
    if (s.ids.empty() || r.ids.empty())
      throw input_error("parallel line " + std::to_string(i + 1) + ": empty sentence");
    check_no_reserved(s.ids, "source", i + 1);
    check_no_reserved(r.ids, "reference", i + 1);
    corpus.push_back({std::move(s.ids), std::move(r.ids), std::move(s.word_spans),
                      std::move(r.word_spans)});
  }
  return corpus;
}

QEDataset read_qe_dataset(Encoder& enc, const std::string& src_path, const std::string& mt_path,
                          const std::string& tags_path, const std::string& hter_path) {
  auto src_lines = read_lines(src_path);
  auto mt_lines = read_lines(mt_path);
  auto tag_lines = read_lines(tags_path);
  auto hter_lines = read_lines(hter_path);
  if (src_lines.size() != mt_lines.size() || src_lines.size() != tag_lines.size() ||
      src_lines.size() != hter_lines.size())
    throw input_error("QE dataset files not line-aligned: " + std::to_string(src_lines.size()) +
                      "/" + std::to_string(mt_lines.size()) + "/" +
                      std::to_string(tag_lines.size()) + "/" + std::to_string(hter_lines.size()));

  QEDataset out;
  out.records.reserve(src_lines.size());
  for (size_t i = 0; i < src_lines.size(); ++i) {
    const size_t line_no = i + 1;
    Encoded s = enc.encode(src_lines[i]);
    Encoded t = enc.encode(mt_lines[i]);
    if (t.ids.empty())
      throw input_error("mt line " + std::to_string(line_no) + ": empty translation");

    auto tag_tokens = split_ws(tag_lines[i]);
    if (tag_tokens.size() != t.word_spans.size())
      throw input_error("tags line " + std::to_string(line_no) + ": " +
                        std::to_string(tag_tokens.size()) + " tags for " +
                        std::to_string(t.word_spans.size()) + " words");
    std::vector<int> tags;
    tags.reserve(tag_tokens.size());
    for (const auto& tok : tag_tokens) {
      if (tok == "OK") tags.push_back(1);
      else if (tok == "BAD") tags.push_back(0);
      else
        throw input_error("tags line " + std::to_string(line_no) + ": expected OK or BAD, got '" +
                          tok + "'");
    }

    QERecord rec;
    rec.src = std::move(s.ids);
    rec.src_words = std::move(s.word_spans);
    rec.mt = std::move(t.ids);
    rec.mt_words = std::move(t.word_spans);
    rec.word_tags = std::move(tags);
    rec.hter = parse_hter(hter_lines[i], line_no, &out.warnings);
    out.records.push_back(std::move(rec));
  }
  return out;
}

void write_qe_dataset(const Vocab& vocab, const std::vector<QERecord>& records,
                      const std::string& src_path, const std::string& mt_path,
                      const std::string& tags_path, const std::string& hter_path) {
  std::vector<std::string> src_lines, mt_lines, tag_lines, hter_lines;
  for (const auto& rec : records) {
    src_lines.push_back(decode(vocab, rec.src, rec.src_words));
    mt_lines.push_back(decode(vocab, rec.mt, rec.mt_words));
    std::vector<std::string> tags;
    for (int t : rec.word_tags) tags.emplace_back(t ? "OK" : "BAD");
    tag_lines.push_back(join(tags, " "));
    hter_lines.push_back(format_double(rec.hter));
  }
  write_lines(src_path, src_lines);
  write_lines(mt_path, mt_lines);
  write_lines(tags_path, tag_lines);
  write_lines(hter_path, hter_lines);
}

void write_predictions(const Predictions& preds, const std::string& tags_path,
                       const std::string& scores_path) {
  if (preds.word_tags.size() != preds.scores.size())
    throw input_error("predictions: tag rows and scores differ in count");
  std::vector<std::string> tag_lines, score_lines;
  for (size_t i = 0; i < preds.scores.size(); ++i) {
    std::vector<std::string> tags;
    for (int t : preds.word_tags[i]) tags.emplace_back(t ? "OK" : "BAD");
    tag_lines.push_back(join(tags, " "));
    score_lines.push_back(format_double(preds.scores[i]));
  }
  write_lines(tags_path, tag_lines);
  write_lines(scores_path, score_lines);
}

Predictions read_predictions(const std::string& tags_path, const std::string& scores_path) {
  auto tag_lines = read_lines(tags_path);
  auto score_lines = read_lines(scores_path);
  if (tag_lines.size() != score_lines.size())
    throw input_error("prediction files not line-aligned: " + tags_path + " vs " + scores_path);
  Predictions preds;
  for (size_t i = 0; i < tag_lines.size(); ++i) {
    std::vector<int> tags;
    for (const auto& tok : split_ws(tag_lines[i])) {
      if (tok == "OK") tags.push_back(1);
      else if (tok == "BAD") tags.push_back(0);
      else
        throw input_error("prediction tags line " + std::to_string(i + 1) + ": '" + tok + "'");
    }
    preds.word_tags.push_back(std::move(tags));
    preds.scores.push_back(parse_hter(score_lines[i], i + 1, nullptr));
  }
  return preds;
}

namespace {

std::string surface_word(char side, int index) {
  // three lowercase letters after the side marker: enough for 17k types
  std::string w(1, side);
  int x = index;
  for (int k = 0; k < 3; ++k) {
    w += static_cast<char>('a' + x % 26);
    x /= 26;
  }
  return w;
}

int sample_word(Rng& rng, int vocab_size, double zipf) {
  double u = rng.uniform();
  double skewed = std::pow(u, 1.0 + zipf);
  int idx = static_cast<int>(skewed * vocab_size);
  return idx >= vocab_size ? vocab_size - 1 : idx;
}

}  // namespace

SynthResult synthesize_corpus(const SynthSpec& spec) {
  if (spec.vocab_size < 10) throw config_error("synthesize_corpus: vocab_size must be >= 10");
  if (spec.n_pairs <= 0) throw config_error("synthesize_corpus: n_pairs must be positive");
  if (spec.min_len < 1 || spec.max_len < spec.min_len)
    throw config_error("synthesize_corpus: bad sentence length range");
  if (spec.noise < 0.0 || spec.noise > 1.0)
    throw config_error("synthesize_corpus: noise must be in [0,1]");

  Rng rng(derive_seed(spec.seed, "synth"));

  // seeded bijective lexicon: src word i <-> tgt word perm[i]
  std::vector<int> perm(static_cast<size_t>(spec.vocab_size));
  for (int i = 0; i < spec.vocab_size; ++i) perm[static_cast<size_t>(i)] = i;
  for (int i = spec.vocab_size - 1; i > 0; --i) {
    int j = static_cast<int>(rng.below(static_cast<uint64_t>(i + 1)));
    std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
  }

  auto make_pair = [&](std::vector<int>& src_idx, std::vector<int>& ref_idx) {
    int len = spec.min_len + static_cast<int>(rng.below(
                                 static_cast<uint64_t>(spec.max_len - spec.min_len + 1)));
    src_idx.resize(static_cast<size_t>(len));
    ref_idx.resize(static_cast<size_t>(len));
    for (int i = 0; i < len; ++i) {
      src_idx[static_cast<size_t>(i)] = sample_word(rng, spec.vocab_size, spec.zipf);
      ref_idx[static_cast<size_t>(i)] = perm[static_cast<size_t>(src_idx[static_cast<size_t>(i)])];
    }
    for (int i = 0; i + 1 < len; ++i) {
      if (rng.uniform() < spec.reorder) {
        std::swap(ref_idx[static_cast<size_t>(i)], ref_idx[static_cast<size_t>(i + 1)]);
        ++i;  // no cascading swaps
      }
    }
  };

  auto render = [](const std::vector<int>& idx, char side) {
    std::vector<std::string> words;
    words.reserve(idx.size());
    for (int i : idx) words.push_back(surface_word(side, i));
    return join(words, " ");
  };

  SynthResult out;
  std::vector<int> src_idx, ref_idx;
  for (int n = 0; n < spec.n_pairs; ++n) {
    make_pair(src_idx, ref_idx);
    out.train_src.push_back(render(src_idx, 's'));
    out.train_ref.push_back(render(ref_idx, 't'));
  }

  auto make_qe_set = [&](QeTextSet& set, int count) {
    for (int n = 0; n < count; ++n) {
      make_pair(src_idx, ref_idx);
      std::vector<int> mt_idx = ref_idx;
      std::vector<std::string> tags;
      int bad = 0;
      for (auto& w : mt_idx) {
        if (rng.uniform() < spec.noise) {
          // replace with a different target word; always a real corruption
          int repl = static_cast<int>(rng.below(static_cast<uint64_t>(spec.vocab_size - 1)));
          if (repl >= w) ++repl;
          w = repl;
          tags.emplace_back("BAD");
          ++bad;
        } else {
          tags.emplace_back("OK");
        }
      }
      set.src.push_back(render(src_idx, 's'));
      set.mt.push_back(render(mt_idx, 't'));
      set.tags.push_back(join(tags, " "));
      set.hter.push_back(format_double(static_cast<double>(bad) /
                                       static_cast<double>(mt_idx.size())));
    }
  };
  make_qe_set(out.qe_train, spec.qe_train);
  make_qe_set(out.qe_dev, spec.qe_dev);
  make_qe_set(out.qe_test, spec.qe_test);
  return out;
}

void write_synth(const SynthResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_lines(dir + "/train.src", result.train_src);
  write_lines(dir + "/train.ref", result.train_ref);
  auto write_set = [&](const QeTextSet& set, const std::string& prefix) {
    write_lines(dir + "/" + prefix + ".src", set.src);
    write_lines(dir + "/" + prefix + ".mt", set.mt);
    write_lines(dir + "/" + prefix + ".tags", set.tags);
    write_lines(dir + "/" + prefix + ".hter", set.hter);
  };
  write_set(result.qe_train, "qe_train");
  write_set(result.qe_dev, "qe_dev");
  write_set(result.qe_test, "qe_test");
}

}  // namespace detqe
