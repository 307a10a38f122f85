// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "detqe/model.hpp"

namespace detqe {

// Checkpoint container: "DQCK" magic, format version, scalar width, vocab
// content hash, optimizer step clock, RNG state, a free-form JSON metadata
// block (model config, training progress), then the named tensors with their
// Adam moments in creation order. Integers are little-endian; tensor data is
// raw row-major host floats. Round-tripping a file reproduces it byte for
// byte.

inline constexpr char kCheckpointMagic[4] = {'D', 'Q', 'C', 'K'};
inline constexpr uint32_t kCheckpointVersion = 1;

template <typename T>
struct NamedTensor {
  std::string name;
  Mat<T> value;
  Mat<T> m;
  Mat<T> v;
};

template <typename T>
struct Checkpoint {
  nlohmann::json meta;
  uint64_t vocab_hash = 0;
  long adam_steps = 0;
  Rng::State rng{{{0, 0, 0, 0}}, false, 0.0};
  std::vector<NamedTensor<T>> tensors;
};

namespace ckio {

inline void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

inline uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in) {
  const uint32_t n = get_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

template <typename T>
void put_mat(std::ostream& out, const Mat<T>& m) {
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(T) * static_cast<size_t>(m.size())));
}

template <typename T>
Mat<T> get_mat(std::istream& in, uint32_t rows, uint32_t cols) {
  Mat<T> m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(T) * static_cast<size_t>(m.size())));
  return m;
}

}  // namespace ckio

template <typename T>
void save_checkpoint(const std::string& path, const nlohmann::json& meta, uint64_t vocab_hash,
                     long adam_steps, const Rng::State& rng, const ParamStore<T>& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, 4);
  ckio::put_u32(out, kCheckpointVersion);
  ckio::put_u32(out, static_cast<uint32_t>(sizeof(T)));
  ckio::put_u64(out, vocab_hash);
  ckio::put_u64(out, static_cast<uint64_t>(adam_steps));
  for (uint64_t w : rng.words) ckio::put_u64(out, w);
  ckio::put_u32(out, rng.has_gauss ? 1 : 0);
  uint64_t spare_bits = 0;
  static_assert(sizeof(double) == sizeof(uint64_t));
  std::memcpy(&spare_bits, &rng.gauss_spare, sizeof spare_bits);
  ckio::put_u64(out, spare_bits);
  ckio::put_string(out, meta.dump());
  ckio::put_u32(out, static_cast<uint32_t>(store.size()));
  for (size_t i = 0; i < store.size(); ++i) {
    const ParamTensor<T>& p = store[i];
    ckio::put_string(out, p.name);
    ckio::put_u32(out, static_cast<uint32_t>(p.value.rows()));
    ckio::put_u32(out, static_cast<uint32_t>(p.value.cols()));
    ckio::put_mat(out, p.value);
    ckio::put_mat(out, p.m);
    ckio::put_mat(out, p.v);
  }
  if (!out) throw input_error("failed while writing checkpoint: " + path);
}

// Reads just the scalar width, so a caller can dispatch to the right
// instantiation before loading tensors.
inline int checkpoint_scalar_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw input_error("not a checkpoint file: " + path);
  const uint32_t version = ckio::get_u32(in);
  if (version != kCheckpointVersion)
    throw input_error("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  return static_cast<int>(ckio::get_u32(in));
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw input_error("not a checkpoint file: " + path);
  const uint32_t version = ckio::get_u32(in);
  if (version != kCheckpointVersion)
    throw input_error("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  const uint32_t scalar_bytes = ckio::get_u32(in);
  if (scalar_bytes != sizeof(T))
    throw input_error("checkpoint scalar width is " + std::to_string(scalar_bytes) +
                      " bytes, expected " + std::to_string(sizeof(T)) + ": " + path);

  Checkpoint<T> ck;
  ck.vocab_hash = ckio::get_u64(in);
  ck.adam_steps = static_cast<long>(ckio::get_u64(in));
  for (auto& w : ck.rng.words) w = ckio::get_u64(in);
  ck.rng.has_gauss = ckio::get_u32(in) != 0;
  const uint64_t spare_bits = ckio::get_u64(in);
  std::memcpy(&ck.rng.gauss_spare, &spare_bits, sizeof ck.rng.gauss_spare);
  const std::string meta_text = ckio::get_string(in);
  try {
    ck.meta = nlohmann::json::parse(meta_text);
  } catch (const nlohmann::json::exception& e) {
    throw input_error("corrupt checkpoint metadata in " + path + ": " + e.what());
  }
  const uint32_t n_tensors = ckio::get_u32(in);
  ck.tensors.reserve(n_tensors);
  for (uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor<T> t;
    t.name = ckio::get_string(in);
    const uint32_t rows = ckio::get_u32(in);
    const uint32_t cols = ckio::get_u32(in);
    t.value = ckio::get_mat<T>(in, rows, cols);
    t.m = ckio::get_mat<T>(in, rows, cols);
    t.v = ckio::get_mat<T>(in, rows, cols);
    ck.tensors.push_back(std::move(t));
  }
  if (!in) throw input_error("truncated checkpoint: " + path);
  return ck;
}

// Copies tensor data into an existing store. The store must have exactly the
// same tensors in the same order; any structural difference is an error
// rather than a partial restore.
template <typename T>
void restore_into(ParamStore<T>& store, const Checkpoint<T>& ck) {
  if (store.size() != ck.tensors.size())
    throw input_error("checkpoint has " + std::to_string(ck.tensors.size()) +
                      " tensors, model expects " + std::to_string(store.size()));
  for (size_t i = 0; i < store.size(); ++i) {
    ParamTensor<T>& p = store[i];
    const NamedTensor<T>& t = ck.tensors[i];
    if (p.name != t.name)
      throw input_error("checkpoint tensor '" + t.name + "' does not match model tensor '" +
                        p.name + "'");
    if (p.value.rows() != t.value.rows() || p.value.cols() != t.value.cols())
      throw input_error("checkpoint tensor '" + t.name + "' has mismatched shape");
    p.value = t.value;
    p.m = t.m;
    p.v = t.v;
    p.grad.setZero();
  }
}

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return nlohmann::json{{"layers", c.layers},
                        {"hidden", c.hidden},
                        {"heads", c.heads},
                        {"ffn", c.ffn},
                        {"vocab_size", c.vocab_size},
                        {"max_len", c.max_len},
                        {"causal_decoder", c.causal_decoder},
                        {"share_embeddings", c.share_embeddings},
                        {"dropout", c.dropout}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.layers = j.at("layers").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.heads = j.at("heads").get<int>();
    c.ffn = j.at("ffn").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_len = j.at("max_len").get<int>();
    c.causal_decoder = j.at("causal_decoder").get<bool>();
    c.share_embeddings = j.at("share_embeddings").get<bool>();
    c.dropout = j.at("dropout").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("bad model config in checkpoint metadata: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace detqe
