// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#include "detqe/bpe.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

namespace detqe {

namespace {

const char* kSpecialNames[Vocab::kNumSpecial] = {"[PAD]", "[UNK]", "[MASK]",
                                                 "[RATIO]", "[BOS]", "[EOS]"};

// Splits a word into UTF-8 codepoint substrings. Invalid lead bytes are kept
// as single-byte symbols.
std::vector<std::string> codepoints(std::string_view word) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < word.size()) {
    unsigned char c = static_cast<unsigned char>(word[i]);
    size_t n = 1;
    if ((c & 0xE0) == 0xC0) n = 2;
    else if ((c & 0xF0) == 0xE0) n = 3;
    else if ((c & 0xF8) == 0xF0) n = 4;
    if (i + n > word.size()) n = 1;
    out.emplace_back(word.substr(i, n));
    i += n;
  }
  return out;
}

void apply_merge(std::vector<std::string>& seq, const std::string& left,
                 const std::string& right, const std::string& joined) {
  size_t w = 0;
  for (size_t r = 0; r < seq.size();) {
    if (r + 1 < seq.size() && seq[r] == left && seq[r + 1] == right) {
      seq[w++] = joined;
      r += 2;
    } else {
      // guard against self-move when nothing has been merged yet
      if (w != r) seq[w] = std::move(seq[r]);
      ++w;
      ++r;
    }
  }
  seq.resize(w);
}

}  // namespace

int Vocab::id_of(std::string_view symbol) const {
  auto it = index_.find(std::string(symbol));
  return it == index_.end() ? -1 : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw input_error("token id out of range: " + std::to_string(id));
  return tokens[static_cast<size_t>(id)];
}

uint64_t Vocab::content_hash() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& t : tokens) {
    h = fnv1a(t, h);
    h = fnv1a("\n", h);
  }
  for (const auto& [l, r] : merges) {
    h = fnv1a(l, h);
    h = fnv1a(" ", h);
    h = fnv1a(r, h);
    h = fnv1a("\n", h);
  }
  return h;
}

void Vocab::rebuild_index() {
  index_.clear();
  for (int i = 0; i < size(); ++i) index_.emplace(tokens[static_cast<size_t>(i)], i);
}

Vocab learn_bpe(const std::vector<std::string>& corpus_lines, int merge_count) {
  if (merge_count < 0) throw config_error("learn_bpe: negative merge count");

  // word frequencies; std::map keeps every later iteration order stable
  std::map<std::string, long> word_freq;
  for (const auto& line : corpus_lines)
    for (auto& w : split_ws(line)) ++word_freq[w];
  if (word_freq.empty()) throw config_error("learn_bpe: empty corpus");

  std::map<std::string, int> base_symbols;
  std::vector<std::pair<std::vector<std::string>, long>> words;
  words.reserve(word_freq.size());
  for (const auto& [word, freq] : word_freq) {
    auto cps = codepoints(word);
    for (const auto& cp : cps) base_symbols.emplace(cp, 0);
    words.emplace_back(std::move(cps), freq);
  }

  Vocab vocab;
  for (const char* s : kSpecialNames) vocab.tokens.emplace_back(s);
  for (const auto& [sym, _] : base_symbols) vocab.tokens.push_back(sym);

  for (int step = 0; step < merge_count; ++step) {
    std::map<std::pair<std::string, std::string>, long> pair_count;
    for (const auto& [seq, freq] : words)
      for (size_t i = 0; i + 1 < seq.size(); ++i)
        pair_count[{seq[i], seq[i + 1]}] += freq;

    const std::pair<std::string, std::string>* best = nullptr;
    long best_count = 1;  // a pair must occur at least twice to be merged
    for (const auto& [pair, count] : pair_count) {
      if (count > best_count) {
        best = &pair;
        best_count = count;
      }
      // ties keep the earlier (lexicographically smaller) pair of the map
    }
    if (!best) break;

    const std::string joined = best->first + best->second;
    for (auto& [seq, freq] : words) apply_merge(seq, best->first, best->second, joined);
    vocab.merges.emplace_back(*best);
    if (std::find(vocab.tokens.begin(), vocab.tokens.end(), joined) == vocab.tokens.end())
      vocab.tokens.push_back(joined);
  }

  vocab.rebuild_index();
  return vocab;
}

const std::vector<int>& Encoder::encode_word(const std::string& word) {
  auto it = cache_.find(word);
  if (it != cache_.end()) return it->second;

  std::vector<std::string> seq = codepoints(word);
  for (const auto& [l, r] : vocab_.merges) apply_merge(seq, l, r, l + r);

  std::vector<int> ids;
  ids.reserve(seq.size());
  for (const auto& sym : seq) {
    int id = vocab_.id_of(sym);
    ids.push_back(id < 0 ? Vocab::kUnk : id);
  }
  return cache_.emplace(word, std::move(ids)).first->second;
}

Encoded Encoder::encode(std::string_view text) {
  Encoded out;
  for (const auto& word : split_ws(text)) {
    const auto& ids = encode_word(word);
    int begin = static_cast<int>(out.ids.size());
    out.ids.insert(out.ids.end(), ids.begin(), ids.end());
    out.word_spans.emplace_back(begin, static_cast<int>(out.ids.size()));
  }
  return out;
}

std::string decode(const Vocab& vocab, const std::vector<int>& ids,
                   const std::vector<std::pair<int, int>>& word_spans) {
  std::vector<std::string> words;
  words.reserve(word_spans.size());
  for (const auto& [begin, end] : word_spans) {
    if (begin < 0 || end > static_cast<int>(ids.size()) || begin > end)
      throw input_error("decode: word span out of range");
    std::string w;
    for (int i = begin; i < end; ++i) w += vocab.token(ids[static_cast<size_t>(i)]);
    words.push_back(std::move(w));
  }
  return join(words, " ");
}

void save_vocab(const Vocab& vocab, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_lines(dir + "/vocab.txt", vocab.tokens);
  std::vector<std::string> merge_lines;
  merge_lines.reserve(vocab.merges.size());
  for (const auto& [l, r] : vocab.merges) merge_lines.push_back(l + " " + r);
  write_lines(dir + "/merges.txt", merge_lines);
}

Vocab load_vocab(const std::string& dir) {
  Vocab vocab;
  vocab.tokens = read_lines(dir + "/vocab.txt");
  if (vocab.size() < Vocab::kNumSpecial)
    throw input_error("vocab file too short: " + dir + "/vocab.txt");
  for (int i = 0; i < Vocab::kNumSpecial; ++i)
    if (vocab.tokens[static_cast<size_t>(i)] != kSpecialNames[i])
      throw input_error("vocab file missing special-token header: " + dir + "/vocab.txt");
  for (const auto& line : read_lines(dir + "/merges.txt")) {
    auto parts = split_ws(line);
    if (parts.size() != 2) throw input_error("bad merge line: '" + line + "'");
    vocab.merges.emplace_back(parts[0], parts[1]);
  }
  vocab.rebuild_index();
  return vocab;
}

}  // namespace detqe
