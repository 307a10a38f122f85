// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "detqe/common.hpp"

namespace detqe {

// Subword vocabulary learned by byte-pair encoding. Ids 0..5 are reserved
// special tokens in this exact order.
struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kMask = 2;
  static constexpr int kRatio = 3;
  static constexpr int kBos = 4;
  static constexpr int kEos = 5;
  static constexpr int kNumSpecial = 6;

  std::vector<std::string> tokens;  // index == id; [0..5] are the specials
  std::vector<std::pair<std::string, std::string>> merges;

  int size() const { return static_cast<int>(tokens.size()); }
  static bool is_special(int id) { return id >= 0 && id < kNumSpecial; }

  // -1 when the symbol is not in the vocabulary.
  int id_of(std::string_view symbol) const;

  const std::string& token(int id) const;

  // Stable stamp of (tokens, merges); embedded in checkpoints so that a
  // model and a dataset tokenized with a different vocab cannot be mixed up
  // silently.
  uint64_t content_hash() const;

  void rebuild_index();

 private:
  std::unordered_map<std::string, int> index_;
};

// Learns `merge_count` BPE merges over whitespace words of the corpus.
// Symbols start as UTF-8 codepoints. The most frequent adjacent pair is
// merged each round; ties break on the lexicographically smaller pair, and
// learning stops early once no pair occurs at least twice.
Vocab learn_bpe(const std::vector<std::string>& corpus_lines, int merge_count);

// Token ids plus the word-boundary map: word w covers ids[spans[w].first,
// spans[w].second).
struct Encoded {
  std::vector<int> ids;
  std::vector<std::pair<int, int>> word_spans;
};

// Stateless word encoder with a per-instance cache of already-segmented
// words. Unknown codepoints map to UNK.
class Encoder {
 public:
  explicit Encoder(const Vocab& vocab) : vocab_(vocab) {}

  Encoded encode(std::string_view text);
  const std::vector<int>& encode_word(const std::string& word);
  const Vocab& vocab() const { return vocab_; }

 private:
  const Vocab& vocab_;
  std::unordered_map<std::string, std::vector<int>> cache_;
};

std::string decode(const Vocab& vocab, const std::vector<int>& ids,
                   const std::vector<std::pair<int, int>>& word_spans);

void save_vocab(const Vocab& vocab, const std::string& dir);
Vocab load_vocab(const std::string& dir);

}  // namespace detqe
