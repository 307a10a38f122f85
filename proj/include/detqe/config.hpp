// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "detqe/data.hpp"
#include "detqe/detector.hpp"
#include "detqe/generator.hpp"

namespace detqe {

// The full run configuration: one nested key/value tree covering every
// command. A file provides the base; --key=value flags override single
// fields; absent fields take the defaults baked in here. Every component
// seed defaults to a stable hash of the global seed and the component
// name, so stages are independently reproducible.
struct RunConfig {
  uint64_t seed = 0;
  std::string out_dir = "detqe_out";
  std::string precision = "f32";  // "f32" or "f64"
  bool svg = false;               // also render charts next to curve CSVs

  struct Data {
    std::string dir;
    std::string train_src, train_ref;
    std::string qe_train, qe_dev, qe_test;  // prefixes for .src/.mt/.tags/.hter
  } data;

  SynthSpec synth;

  struct VocabCfg {
    std::string dir;
    int merges = 300;
  } vocab;

  struct ModelBlock {
    ModelConfig model;  // vocab_size is filled from the vocabulary at run time
    uint64_t init_seed = 0;
  } generator, detector;

  GeneratorTrainConfig generator_train;

  SamplingStrategy strategy;

  struct Pseudo {
    int n = 2000;            // records exported by gen-pseudo
    double mask_ratio = 0.15;
    int dev_n = 500;         // frozen pseudo development set size
    double dev_temperature = 1.0;
    uint64_t seed = 0;
  } pseudo;

  struct Pretrain {
    PretrainConfig train;
    std::string generator_ckpt;
    bool static_data = false;
    int static_n = 2000;
  } pretrain;

  struct Finetune {
    FinetuneConfig train;
    std::string init_ckpt;
    bool from_scratch = false;
  } finetune;

  struct Predict {
    std::string checkpoint;
    std::string input;  // prefix for .src/.mt
    std::string out;    // prefix for .tags/.scores/.probs
    double threshold = 0.5;
    bool states = false;
    std::string states_out;
  } predict;

  struct Evaluate {
    std::string pred;  // prefix for .tags/.scores
    std::string gold;  // prefix for .tags/.hter
  } evaluate;

  struct Sweep {
    int steps = 300;    // detector steps per grid point
    int probe_n = 500;  // pseudo records used to measure the replacement ratio
    uint64_t seed = 0;
  } sweep;

  struct EnsembleCfg {
    struct System {
      std::string dev;   // prefix for .probs/.scores on the dev set
      std::string test;  // prefix for .probs/.scores on the test set
    };
    std::vector<System> systems;
    std::string dev_gold;  // prefix for .tags/.hter
    std::string out;       // prefix for the blended .tags/.scores/.probs
  } ensemble;

  struct Analysis {
    std::string states;  // analyze-mi input
    std::string before, after;  // analyze-similarity inputs
    int top_f = 30;
    int n_centers = 100;
    double rbf_scale = 0.5;
    double svcca_keep = 0.99;
    int layer = -1;  // -1 = final layer
    uint64_t seed = 0;
  } analysis;
};

// Applies one `--key=value` override to the tree. The key is a dotted path;
// the value is parsed as JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& tree, const std::string& key, const std::string& value);

// Materializes the config from a tree, collecting every problem instead of
// stopping at the first: wrong types, out-of-range values, unknown keys,
// and a missing seed. Returns the config with defaults filled; it is only
// meaningful when `errors` stays empty.
RunConfig parse_run_config(const nlohmann::json& tree, std::vector<std::string>& errors);

// The fully materialized tree for `cfg`: every field present at its
// effective value. This is what manifests embed and hash.
nlohmann::json config_to_tree(const RunConfig& cfg);

// Paths the given command reads; existence is checked at validation time.
std::vector<std::string> command_inputs(const RunConfig& cfg, const std::string& command);

// True for the thirteen pipeline commands (rerun is handled separately).
bool known_command(const std::string& command);

}  // namespace detqe
