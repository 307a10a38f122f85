// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#include "detqe/states_io.hpp"

#include <cstring>
#include <fstream>
#include <string>

#include "detqe/checkpoint.hpp"

namespace detqe {
namespace {

constexpr char kMagic[4] = {'D', 'Q', 'R', 'S'};
constexpr uint32_t kVersion = 1;

void put_row(std::ostream& out, const StatesKey& key, const Eigen::RowVectorXd& vec) {
  ckio::put_u32(out, key.sent);
  out.put(static_cast<char>(key.side));
  ckio::put_u32(out, key.layer);
  ckio::put_u32(out, key.pos);
  ckio::put_u32(out, static_cast<uint32_t>(key.token));
  out.write(reinterpret_cast<const char*>(vec.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(vec.size())));
}

}  // namespace

void write_states(const std::string& path, const std::vector<QERecord>& records,
                  const std::vector<LayerStates>& states) {
  if (records.size() != states.size()) {
    throw input_error("got states for " + std::to_string(states.size()) + " of " +
                      std::to_string(records.size()) + " records");
  }
  if (states.empty()) throw input_error("no states to write");
  const int n_layers = static_cast<int>(states.front().enc.size());
  const int hidden = static_cast<int>(states.front().enc.front().cols());

  uint64_t n_rows = 0;
  for (const LayerStates& ls : states) {
    if (static_cast<int>(ls.enc.size()) != n_layers || static_cast<int>(ls.dec.size()) != n_layers)
      throw input_error("states disagree on layer count");
    for (const Matd& m : ls.enc) n_rows += static_cast<uint64_t>(m.rows());
    for (const Matd& m : ls.dec) n_rows += static_cast<uint64_t>(m.rows());
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot write states file: " + path);
  out.write(kMagic, 4);
  ckio::put_u32(out, kVersion);
  ckio::put_u32(out, static_cast<uint32_t>(hidden));
  ckio::put_u32(out, static_cast<uint32_t>(n_layers));
  ckio::put_u64(out, n_rows);

  for (size_t i = 0; i < records.size(); ++i) {
    const QERecord& rec = records[i];
    const LayerStates& ls = states[i];
    for (int l = 0; l < n_layers; ++l) {
      const Matd& m = ls.enc[l];
      if (m.rows() != static_cast<long>(rec.src.size()) || m.cols() != hidden)
        throw input_error("sentence " + std::to_string(i) + ": encoder states do not match tokens");
      for (long p = 0; p < m.rows(); ++p) {
        put_row(out, {static_cast<uint32_t>(i), 0, static_cast<uint32_t>(l),
                      static_cast<uint32_t>(p), rec.src[p]},
                m.row(p));
      }
    }
    for (int l = 0; l < n_layers; ++l) {
      const Matd& m = ls.dec[l];
      if (m.rows() != static_cast<long>(rec.mt.size()) + 1 || m.cols() != hidden)
        throw input_error("sentence " + std::to_string(i) + ": decoder states do not match tokens");
      for (long p = 0; p < m.rows(); ++p) {
        const int token = p == 0 ? Vocab::kRatio : rec.mt[p - 1];
        put_row(out, {static_cast<uint32_t>(i), 1, static_cast<uint32_t>(l),
                      static_cast<uint32_t>(p), token},
                m.row(p));
      }
    }
  }
  if (!out) throw input_error("failed while writing states file: " + path);
}

StatesDump read_states(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open states file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw input_error("not a states file: " + path);
  const uint32_t version = ckio::get_u32(in);
  if (version != kVersion)
    throw input_error("unsupported states version " + std::to_string(version) + ": " + path);

  StatesDump dump;
  dump.hidden = static_cast<int>(ckio::get_u32(in));
  dump.n_layers = static_cast<int>(ckio::get_u32(in));
  const uint64_t n_rows = ckio::get_u64(in);
  dump.keys.resize(n_rows);
  dump.vectors.resize(static_cast<long>(n_rows), dump.hidden);
  for (uint64_t r = 0; r < n_rows; ++r) {
    StatesKey& key = dump.keys[r];
    key.sent = ckio::get_u32(in);
    key.side = static_cast<uint8_t>(in.get());
    key.layer = ckio::get_u32(in);
    key.pos = ckio::get_u32(in);
    key.token = static_cast<int32_t>(ckio::get_u32(in));
    in.read(reinterpret_cast<char*>(dump.vectors.row(static_cast<long>(r)).data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(dump.hidden)));
  }
  if (!in) throw input_error("truncated states file: " + path);
  return dump;
}

Matd layer_matrix(const StatesDump& dump, int side, int layer, std::vector<int>* tokens_out) {
  if (layer < 0 || layer >= dump.n_layers) {
    throw input_error("layer " + std::to_string(layer) + " out of range; dump has " +
                      std::to_string(dump.n_layers));
  }
  std::vector<long> rows;
  for (size_t i = 0; i < dump.keys.size(); ++i) {
    if (dump.keys[i].side == side && dump.keys[i].layer == static_cast<uint32_t>(layer))
      rows.push_back(static_cast<long>(i));
  }
  if (rows.empty()) throw input_error("states file has no rows for the requested side and layer");
  Matd out(static_cast<long>(rows.size()), dump.hidden);
  if (tokens_out) tokens_out->clear();
  for (size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<long>(i)) = dump.vectors.row(rows[i]);
    if (tokens_out) tokens_out->push_back(dump.keys[rows[i]].token);
  }
  return out;
}

}  // namespace detqe
