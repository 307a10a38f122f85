// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "detqe/data.hpp"
#include "detqe/model.hpp"

namespace detqe {

// Hidden-state dump: "DQRS" magic, then one row per stored vector keyed by
// (sentence index, side, layer, position, token id). Side 0 is the source
// encoder, side 1 the target decoder; decoder position 0 is the score slot
// and carries the ratio token id. Self-describing: the header fixes the
// hidden width and layer count, so readers need no model.
struct StatesKey {
  uint32_t sent = 0;
  uint8_t side = 0;  // 0 = src, 1 = tgt
  uint32_t layer = 0;
  uint32_t pos = 0;
  int32_t token = 0;
};

struct StatesDump {
  int hidden = 0;
  int n_layers = 0;  // entries per side, trunk layers + 1
  std::vector<StatesKey> keys;
  Matd vectors;  // keys.size() x hidden, rows aligned with keys
};

// `states[i]` must be the layer states of `records[i]`; token ids come from
// the records.
void write_states(const std::string& path, const std::vector<QERecord>& records,
                  const std::vector<LayerStates>& states);

StatesDump read_states(const std::string& path);

// Rows of one side at one layer, in file order; optionally also the token
// ids, aligned with the rows.
Matd layer_matrix(const StatesDump& dump, int side, int layer, std::vector<int>* tokens_out = nullptr);

}  // namespace detqe
