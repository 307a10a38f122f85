// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace detqe {

// Provenance record written next to every command's outputs: the exact
// materialized config, the global seed, and content hashes of every file
// read and written. Re-running the embedded config must reproduce the
// outputs byte for byte; the hashes make the claim checkable.
struct Manifest {
  std::string command;
  uint64_t seed = 0;
  std::string config_hash;  // hex of the canonical config dump
  nlohmann::json config;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, content hash
  std::vector<std::pair<std::string, std::string>> outputs;  // path, content hash
};

void write_manifest(const std::string& path, const Manifest& m);
Manifest read_manifest(const std::string& path);

}  // namespace detqe
