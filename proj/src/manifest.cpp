// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#include "detqe/manifest.hpp"

#include "detqe/common.hpp"

namespace detqe {

using nlohmann::json;

void write_manifest(const std::string& path, const Manifest& m) {
  json files_in = json::array();
  for (const auto& [p, h] : m.inputs) files_in.push_back({{"path", p}, {"hash", h}});
  json files_out = json::array();
  for (const auto& [p, h] : m.outputs) files_out.push_back({{"path", p}, {"hash", h}});
  const json j{{"command", m.command}, {"seed", m.seed},       {"config_hash", m.config_hash},
               {"config", m.config},   {"inputs", files_in},   {"outputs", files_out}};
  write_file(path, j.dump(2) + "\n");
}

Manifest read_manifest(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw input_error("bad manifest " + path + ": " + e.what());
  }
  Manifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.config = j.at("config");
    for (const json& f : j.at("inputs")) {
      m.inputs.emplace_back(f.at("path").get<std::string>(), f.at("hash").get<std::string>());
    }
    for (const json& f : j.at("outputs")) {
      m.outputs.emplace_back(f.at("path").get<std::string>(), f.at("hash").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw input_error("bad manifest " + path + ": " + e.what());
  }
  return m;
}

}  // namespace detqe
