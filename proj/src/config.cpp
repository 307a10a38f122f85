// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#include "detqe/config.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "detqe/rng.hpp"

namespace detqe {
namespace {

using nlohmann::json;

std::vector<std::string> split_path(const std::string& dotted) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : dotted) {
    if (c == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

const json* find_node(const json& root, const std::string& dotted) {
  const json* node = &root;
  for (const std::string& part : split_path(dotted)) {
    if (!node->is_object()) return nullptr;
    auto it = node->find(part);
    if (it == node->end()) return nullptr;
    node = &*it;
  }
  return node;
}

// Reads leaves out of the tree, remembering which paths were touched so
// that anything left over can be reported as an unknown key (the usual
// symptom of a typo in a --key=value override).
class Reader {
 public:
  Reader(const json& root, std::vector<std::string>& errors) : root_(root), errors_(errors) {}

  bool has(const std::string& path) {
    consumed_.insert(path);
    return find_node(root_, path) != nullptr;
  }

  int get_int(const std::string& path, int def) {
    const json* n = touch(path);
    if (!n) return def;
    if (!n->is_number_integer()) {
      errors_.push_back(path + ": expected an integer");
      return def;
    }
    return n->get<int>();
  }

  uint64_t get_u64(const std::string& path, uint64_t def) {
    const json* n = touch(path);
    if (!n) return def;
    if (!(n->is_number_unsigned() || (n->is_number_integer() && n->get<long long>() >= 0))) {
      errors_.push_back(path + ": expected a non-negative integer");
      return def;
    }
    return n->get<uint64_t>();
  }

  double get_double(const std::string& path, double def) {
    const json* n = touch(path);
    if (!n) return def;
    if (!n->is_number()) {
      errors_.push_back(path + ": expected a number");
      return def;
    }
    return n->get<double>();
  }

  bool get_bool(const std::string& path, bool def) {
    const json* n = touch(path);
    if (!n) return def;
    if (!n->is_boolean()) {
      errors_.push_back(path + ": expected true or false");
      return def;
    }
    return n->get<bool>();
  }

  std::string get_string(const std::string& path, const std::string& def) {
    const json* n = touch(path);
    if (!n) return def;
    if (!n->is_string()) {
      errors_.push_back(path + ": expected a string");
      return def;
    }
    return n->get<std::string>();
  }

  const json* get_array(const std::string& path) {
    const json* n = touch(path);
    if (!n) return nullptr;
    if (!n->is_array()) {
      errors_.push_back(path + ": expected an array");
      return nullptr;
    }
    return n;
  }

  void check_unknown() {
    std::vector<std::string> unknown;
    walk(root_, "", unknown);
    std::sort(unknown.begin(), unknown.end());
    for (const std::string& k : unknown) errors_.push_back("unknown field: " + k);
  }

 private:
  const json* touch(const std::string& path) {
    consumed_.insert(path);
    return find_node(root_, path);
  }

  void walk(const json& node, const std::string& prefix, std::vector<std::string>& unknown) {
    if (node.is_object()) {
      for (auto it = node.begin(); it != node.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (consumed_.count(path)) continue;
        if (it->is_object()) {
          walk(*it, path, unknown);
        } else {
          unknown.push_back(path);
        }
      }
    }
  }

  const json& root_;
  std::vector<std::string>& errors_;
  std::set<std::string> consumed_;
};

SamplingStrategy::Kind parse_kind(const std::string& name, const std::string& path,
                                  std::vector<std::string>& errors) {
  if (name == "sample") return SamplingStrategy::Kind::kSample;
  if (name == "topk") return SamplingStrategy::Kind::kTopK;
  if (name == "greedy") return SamplingStrategy::Kind::kGreedy;
  if (name == "random") return SamplingStrategy::Kind::kRandom;
  errors.push_back(path + ": must be one of sample, topk, greedy, random");
  return SamplingStrategy::Kind::kSample;
}

std::string kind_name(SamplingStrategy::Kind kind) {
  switch (kind) {
    case SamplingStrategy::Kind::kSample: return "sample";
    case SamplingStrategy::Kind::kTopK: return "topk";
    case SamplingStrategy::Kind::kGreedy: return "greedy";
    case SamplingStrategy::Kind::kRandom: return "random";
  }
  return "sample";
}

void read_model_block(Reader& r, const std::string& prefix, RunConfig::ModelBlock& block,
                      std::vector<std::string>& errors) {
  block.model.layers = r.get_int(prefix + ".layers", block.model.layers);
  block.model.hidden = r.get_int(prefix + ".hidden", block.model.hidden);
  block.model.heads = r.get_int(prefix + ".heads", block.model.heads);
  block.model.ffn = r.get_int(prefix + ".ffn", block.model.ffn);
  block.model.max_len = r.get_int(prefix + ".max_len", block.model.max_len);
  block.model.dropout = r.get_double(prefix + ".dropout", block.model.dropout);
  block.model.share_embeddings = r.get_bool(prefix + ".share_embeddings", block.model.share_embeddings);
  // The real vocab size arrives at run time; 1 satisfies the range check.
  ModelConfig probe = block.model;
  probe.vocab_size = 1;
  try {
    probe.validate();
  } catch (const config_error& e) {
    errors.push_back(prefix + ": " + e.what());
  }
}

void read_adam(Reader& r, const std::string& prefix, AdamConfig& adam,
               std::vector<std::string>& errors) {
  adam.lr = r.get_double(prefix + ".lr", adam.lr);
  adam.beta1 = r.get_double(prefix + ".beta1", adam.beta1);
  adam.beta2 = r.get_double(prefix + ".beta2", adam.beta2);
  adam.eps = r.get_double(prefix + ".eps", adam.eps);
  try {
    adam.validate();
  } catch (const config_error& e) {
    errors.push_back(prefix + ": " + e.what());
  }
}

void require_min(int value, int min, const std::string& path, std::vector<std::string>& errors) {
  if (value < min) errors.push_back(path + ": must be >= " + std::to_string(min));
}

void require_unit(double value, const std::string& path, std::vector<std::string>& errors,
                  bool open) {
  if (open) {
    if (!(value > 0.0) || !(value < 1.0)) errors.push_back(path + ": must be in (0,1)");
  } else {
    if (!(value >= 0.0) || !(value <= 1.0)) errors.push_back(path + ": must be in [0,1]");
  }
}

std::vector<std::string> qe_files(const std::string& prefix) {
  return {prefix + ".src", prefix + ".mt", prefix + ".tags", prefix + ".hter"};
}

}  // namespace

void apply_override(nlohmann::json& tree, const std::string& key, const std::string& value) {
  if (key.empty() || key.front() == '.' || key.back() == '.' ||
      key.find("..") != std::string::npos) {
    throw config_error("bad override key: '" + key + "'");
  }
  json* node = &tree;
  std::vector<std::string> parts = split_path(key);
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    json& child = (*node)[parts[i]];
    if (!child.is_object()) {
      if (!child.is_null()) {
        throw config_error("override " + key + " descends into non-object field " + parts[i]);
      }
      child = json::object();
    }
    node = &child;
  }
  json parsed = json::parse(value, nullptr, false);
  // Bare words (paths, strategy names) are not valid JSON; keep them as text.
  (*node)[parts.back()] = parsed.is_discarded() ? json(value) : parsed;
}

RunConfig parse_run_config(const nlohmann::json& tree, std::vector<std::string>& errors) {
  if (!tree.is_object()) {
    errors.push_back("config root: expected an object");
    return RunConfig{};
  }
  Reader r(tree, errors);
  RunConfig cfg;

  if (!r.has("seed")) {
    errors.push_back("seed: required");
  } else {
    cfg.seed = r.get_u64("seed", 0);
  }
  cfg.out_dir = r.get_string("out_dir", cfg.out_dir);
  cfg.precision = r.get_string("precision", cfg.precision);
  if (cfg.precision != "f32" && cfg.precision != "f64") {
    errors.push_back("precision: must be f32 or f64");
  }
  cfg.svg = r.get_bool("svg", cfg.svg);

  cfg.data.dir = r.get_string("data.dir", cfg.out_dir + "/data");
  cfg.data.train_src = r.get_string("data.train_src", cfg.data.dir + "/train.src");
  cfg.data.train_ref = r.get_string("data.train_ref", cfg.data.dir + "/train.ref");
  cfg.data.qe_train = r.get_string("data.qe_train", cfg.data.dir + "/qe_train");
  cfg.data.qe_dev = r.get_string("data.qe_dev", cfg.data.dir + "/qe_dev");
  cfg.data.qe_test = r.get_string("data.qe_test", cfg.data.dir + "/qe_test");

  cfg.synth.seed = r.get_u64("synth.seed", derive_seed(cfg.seed, "synth"));
  cfg.synth.n_pairs = r.get_int("synth.n_pairs", cfg.synth.n_pairs);
  cfg.synth.vocab_size = r.get_int("synth.vocab_size", cfg.synth.vocab_size);
  cfg.synth.min_len = r.get_int("synth.min_len", cfg.synth.min_len);
  cfg.synth.max_len = r.get_int("synth.max_len", cfg.synth.max_len);
  cfg.synth.noise = r.get_double("synth.noise", cfg.synth.noise);
  cfg.synth.reorder = r.get_double("synth.reorder", cfg.synth.reorder);
  cfg.synth.zipf = r.get_double("synth.zipf", cfg.synth.zipf);
  cfg.synth.qe_train = r.get_int("synth.qe_train", cfg.synth.qe_train);
  cfg.synth.qe_dev = r.get_int("synth.qe_dev", cfg.synth.qe_dev);
  cfg.synth.qe_test = r.get_int("synth.qe_test", cfg.synth.qe_test);
  require_min(cfg.synth.n_pairs, 1, "synth.n_pairs", errors);
  require_min(cfg.synth.vocab_size, 2, "synth.vocab_size", errors);
  require_min(cfg.synth.min_len, 1, "synth.min_len", errors);
  require_min(cfg.synth.max_len, cfg.synth.min_len, "synth.max_len", errors);
  require_unit(cfg.synth.noise, "synth.noise", errors, false);
  require_unit(cfg.synth.reorder, "synth.reorder", errors, false);
  if (cfg.synth.zipf < 0.0) errors.push_back("synth.zipf: must be >= 0");
  require_min(cfg.synth.qe_train, 1, "synth.qe_train", errors);
  require_min(cfg.synth.qe_dev, 1, "synth.qe_dev", errors);
  require_min(cfg.synth.qe_test, 1, "synth.qe_test", errors);

  cfg.vocab.dir = r.get_string("vocab.dir", cfg.out_dir + "/vocab");
  cfg.vocab.merges = r.get_int("vocab.merges", cfg.vocab.merges);
  if (cfg.vocab.merges < 0) errors.push_back("vocab.merges: must be >= 0");

  read_model_block(r, "generator", cfg.generator, errors);
  cfg.generator.init_seed = r.get_u64("generator.init_seed", derive_seed(cfg.seed, "generator.init"));
  read_model_block(r, "detector", cfg.detector, errors);
  cfg.detector.init_seed = r.get_u64("detector.init_seed", derive_seed(cfg.seed, "detector.init"));

  read_adam(r, "generator_train", cfg.generator_train.adam, errors);
  cfg.generator_train.steps = r.get_int("generator_train.steps", cfg.generator_train.steps);
  cfg.generator_train.batch_size = r.get_int("generator_train.batch_size", cfg.generator_train.batch_size);
  cfg.generator_train.mask_ratio = r.get_double("generator_train.mask_ratio", cfg.generator_train.mask_ratio);
  cfg.generator_train.heldout_pairs = r.get_int("generator_train.heldout_pairs", cfg.generator_train.heldout_pairs);
  cfg.generator_train.eval_every = r.get_int("generator_train.eval_every", cfg.generator_train.eval_every);
  cfg.generator_train.seed = r.get_u64("generator_train.seed", derive_seed(cfg.seed, "generator.train"));
  require_min(cfg.generator_train.steps, 1, "generator_train.steps", errors);
  require_min(cfg.generator_train.batch_size, 1, "generator_train.batch_size", errors);
  require_unit(cfg.generator_train.mask_ratio, "generator_train.mask_ratio", errors, true);
  require_min(cfg.generator_train.heldout_pairs, 1, "generator_train.heldout_pairs", errors);
  require_min(cfg.generator_train.eval_every, 1, "generator_train.eval_every", errors);

  cfg.strategy.kind = parse_kind(r.get_string("strategy.kind", "sample"), "strategy.kind", errors);
  cfg.strategy.temperature = r.get_double("strategy.temperature", cfg.strategy.temperature);
  cfg.strategy.k = r.get_int("strategy.k", cfg.strategy.k);
  if (cfg.strategy.kind == SamplingStrategy::Kind::kSample && !(cfg.strategy.temperature > 0.0)) {
    errors.push_back("strategy.temperature: must be > 0");
  }
  if (cfg.strategy.kind == SamplingStrategy::Kind::kTopK && cfg.strategy.k < 1) {
    errors.push_back("strategy.k: must be >= 1");
  }

  cfg.pseudo.n = r.get_int("pseudo.n", cfg.pseudo.n);
  cfg.pseudo.mask_ratio = r.get_double("pseudo.mask_ratio", cfg.pseudo.mask_ratio);
  cfg.pseudo.dev_n = r.get_int("pseudo.dev_n", cfg.pseudo.dev_n);
  cfg.pseudo.dev_temperature = r.get_double("pseudo.dev_temperature", cfg.pseudo.dev_temperature);
  cfg.pseudo.seed = r.get_u64("pseudo.seed", derive_seed(cfg.seed, "pseudo"));
  require_min(cfg.pseudo.n, 1, "pseudo.n", errors);
  require_unit(cfg.pseudo.mask_ratio, "pseudo.mask_ratio", errors, true);
  require_min(cfg.pseudo.dev_n, 1, "pseudo.dev_n", errors);
  if (!(cfg.pseudo.dev_temperature > 0.0)) errors.push_back("pseudo.dev_temperature: must be > 0");

  read_adam(r, "pretrain", cfg.pretrain.train.adam, errors);
  cfg.pretrain.train.strategy = cfg.strategy;
  cfg.pretrain.train.steps = r.get_int("pretrain.steps", cfg.pretrain.train.steps);
  cfg.pretrain.train.batch_size = r.get_int("pretrain.batch_size", cfg.pretrain.train.batch_size);
  cfg.pretrain.train.mask_ratio = r.get_double("pretrain.mask_ratio", cfg.pretrain.train.mask_ratio);
  cfg.pretrain.train.w_word = r.get_double("pretrain.w_word", cfg.pretrain.train.w_word);
  cfg.pretrain.train.w_sent = r.get_double("pretrain.w_sent", cfg.pretrain.train.w_sent);
  cfg.pretrain.train.sentence_objective =
      r.get_bool("pretrain.sentence_objective", cfg.pretrain.train.sentence_objective);
  cfg.pretrain.train.sel_w_f1 = r.get_double("pretrain.sel_w_f1", cfg.pretrain.train.sel_w_f1);
  cfg.pretrain.train.sel_w_pearson = r.get_double("pretrain.sel_w_pearson", cfg.pretrain.train.sel_w_pearson);
  cfg.pretrain.train.eval_every = r.get_int("pretrain.eval_every", cfg.pretrain.train.eval_every);
  cfg.pretrain.train.seed = r.get_u64("pretrain.seed", derive_seed(cfg.seed, "pretrain"));
  cfg.pretrain.generator_ckpt = r.get_string("pretrain.generator_ckpt", cfg.out_dir + "/generator.ckpt");
  cfg.pretrain.static_data = r.get_bool("pretrain.static_data", cfg.pretrain.static_data);
  cfg.pretrain.static_n = r.get_int("pretrain.static_n", cfg.pretrain.static_n);
  require_min(cfg.pretrain.train.steps, 1, "pretrain.steps", errors);
  require_min(cfg.pretrain.train.batch_size, 1, "pretrain.batch_size", errors);
  require_unit(cfg.pretrain.train.mask_ratio, "pretrain.mask_ratio", errors, true);
  if (cfg.pretrain.train.w_word < 0.0) errors.push_back("pretrain.w_word: must be >= 0");
  if (cfg.pretrain.train.w_sent < 0.0) errors.push_back("pretrain.w_sent: must be >= 0");
  if (cfg.pretrain.train.sel_w_f1 < 0.0) errors.push_back("pretrain.sel_w_f1: must be >= 0");
  if (cfg.pretrain.train.sel_w_pearson < 0.0) errors.push_back("pretrain.sel_w_pearson: must be >= 0");
  require_min(cfg.pretrain.train.eval_every, 1, "pretrain.eval_every", errors);
  require_min(cfg.pretrain.static_n, 1, "pretrain.static_n", errors);

  read_adam(r, "finetune", cfg.finetune.train.adam, errors);
  cfg.finetune.train.steps = r.get_int("finetune.steps", cfg.finetune.train.steps);
  cfg.finetune.train.batch_size = r.get_int("finetune.batch_size", cfg.finetune.train.batch_size);
  cfg.finetune.train.w_word = r.get_double("finetune.w_word", cfg.finetune.train.w_word);
  cfg.finetune.train.w_sent = r.get_double("finetune.w_sent", cfg.finetune.train.w_sent);
  cfg.finetune.train.sel_w_f1 = r.get_double("finetune.sel_w_f1", cfg.finetune.train.sel_w_f1);
  cfg.finetune.train.sel_w_pearson = r.get_double("finetune.sel_w_pearson", cfg.finetune.train.sel_w_pearson);
  cfg.finetune.train.eval_every = r.get_int("finetune.eval_every", cfg.finetune.train.eval_every);
  cfg.finetune.train.patience = r.get_int("finetune.patience", cfg.finetune.train.patience);
  cfg.finetune.train.freeze_layers = r.get_int("finetune.freeze_layers", cfg.finetune.train.freeze_layers);
  cfg.finetune.train.seed = r.get_u64("finetune.seed", derive_seed(cfg.seed, "finetune"));
  cfg.finetune.init_ckpt = r.get_string("finetune.init_ckpt", cfg.out_dir + "/detector_pretrained.ckpt");
  cfg.finetune.from_scratch = r.get_bool("finetune.from_scratch", cfg.finetune.from_scratch);
  if (cfg.finetune.train.steps < 0) errors.push_back("finetune.steps: must be >= 0");
  require_min(cfg.finetune.train.batch_size, 1, "finetune.batch_size", errors);
  if (cfg.finetune.train.w_word < 0.0) errors.push_back("finetune.w_word: must be >= 0");
  if (cfg.finetune.train.w_sent < 0.0) errors.push_back("finetune.w_sent: must be >= 0");
  if (cfg.finetune.train.sel_w_f1 < 0.0) errors.push_back("finetune.sel_w_f1: must be >= 0");
  if (cfg.finetune.train.sel_w_pearson < 0.0) errors.push_back("finetune.sel_w_pearson: must be >= 0");
  require_min(cfg.finetune.train.eval_every, 1, "finetune.eval_every", errors);
  if (cfg.finetune.train.patience < 0) errors.push_back("finetune.patience: must be >= 0");
  if (cfg.finetune.train.freeze_layers < 0) errors.push_back("finetune.freeze_layers: must be >= 0");

  cfg.predict.checkpoint = r.get_string("predict.checkpoint", cfg.out_dir + "/detector_finetuned.ckpt");
  cfg.predict.input = r.get_string("predict.input", cfg.data.qe_test);
  cfg.predict.out = r.get_string("predict.out", cfg.out_dir + "/pred");
  cfg.predict.threshold = r.get_double("predict.threshold", cfg.predict.threshold);
  cfg.predict.states = r.get_bool("predict.states", cfg.predict.states);
  cfg.predict.states_out = r.get_string("predict.states_out", cfg.predict.out + ".states");
  require_unit(cfg.predict.threshold, "predict.threshold", errors, false);

  cfg.evaluate.pred = r.get_string("evaluate.pred", cfg.predict.out);
  cfg.evaluate.gold = r.get_string("evaluate.gold", cfg.data.qe_test);

  cfg.sweep.steps = r.get_int("sweep.steps", cfg.sweep.steps);
  cfg.sweep.probe_n = r.get_int("sweep.probe_n", cfg.sweep.probe_n);
  cfg.sweep.seed = r.get_u64("sweep.seed", derive_seed(cfg.seed, "sweep"));
  require_min(cfg.sweep.steps, 1, "sweep.steps", errors);
  require_min(cfg.sweep.probe_n, 1, "sweep.probe_n", errors);

  if (const json* systems = r.get_array("ensemble.systems")) {
    for (size_t i = 0; i < systems->size(); ++i) {
      const json& entry = (*systems)[i];
      const std::string where = "ensemble.systems[" + std::to_string(i) + "]";
      if (!entry.is_object() || !entry.contains("dev") || !entry.contains("test") ||
          !entry["dev"].is_string() || !entry["test"].is_string()) {
        errors.push_back(where + ": expected {\"dev\": prefix, \"test\": prefix}");
        continue;
      }
      cfg.ensemble.systems.push_back(
          {entry["dev"].get<std::string>(), entry["test"].get<std::string>()});
    }
  }
  cfg.ensemble.dev_gold = r.get_string("ensemble.dev_gold", cfg.data.qe_dev);
  cfg.ensemble.out = r.get_string("ensemble.out", cfg.out_dir + "/ensemble");

  cfg.analysis.states = r.get_string("analysis.states", cfg.predict.states_out);
  cfg.analysis.before = r.get_string("analysis.before", "");
  cfg.analysis.after = r.get_string("analysis.after", "");
  cfg.analysis.top_f = r.get_int("analysis.top_f", cfg.analysis.top_f);
  cfg.analysis.n_centers = r.get_int("analysis.n_centers", cfg.analysis.n_centers);
  cfg.analysis.rbf_scale = r.get_double("analysis.rbf_scale", cfg.analysis.rbf_scale);
  cfg.analysis.svcca_keep = r.get_double("analysis.svcca_keep", cfg.analysis.svcca_keep);
  cfg.analysis.layer = r.get_int("analysis.layer", cfg.analysis.layer);
  cfg.analysis.seed = r.get_u64("analysis.seed", derive_seed(cfg.seed, "analysis"));
  require_min(cfg.analysis.top_f, 1, "analysis.top_f", errors);
  require_min(cfg.analysis.n_centers, 1, "analysis.n_centers", errors);
  if (!(cfg.analysis.rbf_scale > 0.0)) errors.push_back("analysis.rbf_scale: must be > 0");
  if (!(cfg.analysis.svcca_keep > 0.0) || cfg.analysis.svcca_keep > 1.0) {
    errors.push_back("analysis.svcca_keep: must be in (0,1]");
  }
  if (cfg.analysis.layer < -1) errors.push_back("analysis.layer: must be >= -1");

  r.check_unknown();
  return cfg;
}

nlohmann::json config_to_tree(const RunConfig& cfg) {
  json systems = json::array();
  for (const auto& s : cfg.ensemble.systems) systems.push_back({{"dev", s.dev}, {"test", s.test}});
  auto model_block = [](const RunConfig::ModelBlock& b) {
    return json{{"layers", b.model.layers},   {"hidden", b.model.hidden},
                {"heads", b.model.heads},     {"ffn", b.model.ffn},
                {"max_len", b.model.max_len}, {"dropout", b.model.dropout},
                {"share_embeddings", b.model.share_embeddings},
                {"init_seed", b.init_seed}};
  };
  return json{
      {"seed", cfg.seed},
      {"out_dir", cfg.out_dir},
      {"precision", cfg.precision},
      {"svg", cfg.svg},
      {"data",
       {{"dir", cfg.data.dir},
        {"train_src", cfg.data.train_src},
        {"train_ref", cfg.data.train_ref},
        {"qe_train", cfg.data.qe_train},
        {"qe_dev", cfg.data.qe_dev},
        {"qe_test", cfg.data.qe_test}}},
      {"synth",
       {{"seed", cfg.synth.seed},
        {"n_pairs", cfg.synth.n_pairs},
        {"vocab_size", cfg.synth.vocab_size},
        {"min_len", cfg.synth.min_len},
        {"max_len", cfg.synth.max_len},
        {"noise", cfg.synth.noise},
        {"reorder", cfg.synth.reorder},
        {"zipf", cfg.synth.zipf},
        {"qe_train", cfg.synth.qe_train},
        {"qe_dev", cfg.synth.qe_dev},
        {"qe_test", cfg.synth.qe_test}}},
      {"vocab", {{"dir", cfg.vocab.dir}, {"merges", cfg.vocab.merges}}},
      {"generator", model_block(cfg.generator)},
      {"detector", model_block(cfg.detector)},
      {"generator_train",
       {{"lr", cfg.generator_train.adam.lr},
        {"beta1", cfg.generator_train.adam.beta1},
        {"beta2", cfg.generator_train.adam.beta2},
        {"eps", cfg.generator_train.adam.eps},
        {"steps", cfg.generator_train.steps},
        {"batch_size", cfg.generator_train.batch_size},
        {"mask_ratio", cfg.generator_train.mask_ratio},
        {"heldout_pairs", cfg.generator_train.heldout_pairs},
        {"eval_every", cfg.generator_train.eval_every},
        {"seed", cfg.generator_train.seed}}},
      {"strategy",
       {{"kind", kind_name(cfg.strategy.kind)},
        {"temperature", cfg.strategy.temperature},
        {"k", cfg.strategy.k}}},
      {"pseudo",
       {{"n", cfg.pseudo.n},
        {"mask_ratio", cfg.pseudo.mask_ratio},
        {"dev_n", cfg.pseudo.dev_n},
        {"dev_temperature", cfg.pseudo.dev_temperature},
        {"seed", cfg.pseudo.seed}}},
      {"pretrain",
       {{"lr", cfg.pretrain.train.adam.lr},
        {"beta1", cfg.pretrain.train.adam.beta1},
        {"beta2", cfg.pretrain.train.adam.beta2},
        {"eps", cfg.pretrain.train.adam.eps},
        {"steps", cfg.pretrain.train.steps},
        {"batch_size", cfg.pretrain.train.batch_size},
        {"mask_ratio", cfg.pretrain.train.mask_ratio},
        {"w_word", cfg.pretrain.train.w_word},
        {"w_sent", cfg.pretrain.train.w_sent},
        {"sentence_objective", cfg.pretrain.train.sentence_objective},
        {"sel_w_f1", cfg.pretrain.train.sel_w_f1},
        {"sel_w_pearson", cfg.pretrain.train.sel_w_pearson},
        {"eval_every", cfg.pretrain.train.eval_every},
        {"seed", cfg.pretrain.train.seed},
        {"generator_ckpt", cfg.pretrain.generator_ckpt},
        {"static_data", cfg.pretrain.static_data},
        {"static_n", cfg.pretrain.static_n}}},
      {"finetune",
       {{"lr", cfg.finetune.train.adam.lr},
        {"beta1", cfg.finetune.train.adam.beta1},
        {"beta2", cfg.finetune.train.adam.beta2},
        {"eps", cfg.finetune.train.adam.eps},
        {"steps", cfg.finetune.train.steps},
        {"batch_size", cfg.finetune.train.batch_size},
        {"w_word", cfg.finetune.train.w_word},
        {"w_sent", cfg.finetune.train.w_sent},
        {"sel_w_f1", cfg.finetune.train.sel_w_f1},
        {"sel_w_pearson", cfg.finetune.train.sel_w_pearson},
        {"eval_every", cfg.finetune.train.eval_every},
        {"patience", cfg.finetune.train.patience},
        {"freeze_layers", cfg.finetune.train.freeze_layers},
        {"seed", cfg.finetune.train.seed},
        {"init_ckpt", cfg.finetune.init_ckpt},
        {"from_scratch", cfg.finetune.from_scratch}}},
      {"predict",
       {{"checkpoint", cfg.predict.checkpoint},
        {"input", cfg.predict.input},
        {"out", cfg.predict.out},
        {"threshold", cfg.predict.threshold},
        {"states", cfg.predict.states},
        {"states_out", cfg.predict.states_out}}},
      {"evaluate", {{"pred", cfg.evaluate.pred}, {"gold", cfg.evaluate.gold}}},
      {"sweep",
       {{"steps", cfg.sweep.steps}, {"probe_n", cfg.sweep.probe_n}, {"seed", cfg.sweep.seed}}},
      {"ensemble",
       {{"systems", systems}, {"dev_gold", cfg.ensemble.dev_gold}, {"out", cfg.ensemble.out}}},
      {"analysis",
       {{"states", cfg.analysis.states},
        {"before", cfg.analysis.before},
        {"after", cfg.analysis.after},
        {"top_f", cfg.analysis.top_f},
        {"n_centers", cfg.analysis.n_centers},
        {"rbf_scale", cfg.analysis.rbf_scale},
        {"svcca_keep", cfg.analysis.svcca_keep},
        {"layer", cfg.analysis.layer},
        {"seed", cfg.analysis.seed}}},
  };
}

bool known_command(const std::string& command) {
  static const std::set<std::string> kCommands = {
      "synth-corpus",  "learn-vocab",      "train-generator", "gen-pseudo",
      "pretrain",      "finetune",         "predict",         "evaluate",
      "sweep-replacement", "compare-static-dynamic", "ensemble",
      "analyze-mi",    "analyze-similarity"};
  return kCommands.count(command) > 0;
}

std::vector<std::string> command_inputs(const RunConfig& cfg, const std::string& command) {
  std::vector<std::string> in;
  auto vocab_files = [&in, &cfg] {
    in.push_back(cfg.vocab.dir + "/vocab.txt");
    in.push_back(cfg.vocab.dir + "/merges.txt");
  };
  auto train_files = [&in, &cfg] {
    in.push_back(cfg.data.train_src);
    in.push_back(cfg.data.train_ref);
  };
  if (command == "synth-corpus") {
    // creates its own inputs
  } else if (command == "learn-vocab") {
    train_files();
  } else if (command == "train-generator") {
    vocab_files();
    train_files();
  } else if (command == "gen-pseudo" || command == "sweep-replacement" ||
             command == "pretrain" || command == "compare-static-dynamic") {
    vocab_files();
    train_files();
    in.push_back(cfg.pretrain.generator_ckpt);
  } else if (command == "finetune") {
    vocab_files();
    for (const std::string& f : qe_files(cfg.data.qe_train)) in.push_back(f);
    for (const std::string& f : qe_files(cfg.data.qe_dev)) in.push_back(f);
    if (!cfg.finetune.from_scratch) in.push_back(cfg.finetune.init_ckpt);
  } else if (command == "predict") {
    vocab_files();
    in.push_back(cfg.predict.checkpoint);
    in.push_back(cfg.predict.input + ".src");
    in.push_back(cfg.predict.input + ".mt");
  } else if (command == "evaluate") {
    in.push_back(cfg.evaluate.pred + ".tags");
    in.push_back(cfg.evaluate.pred + ".scores");
    in.push_back(cfg.evaluate.gold + ".tags");
    in.push_back(cfg.evaluate.gold + ".hter");
  } else if (command == "ensemble") {
    for (const auto& sys : cfg.ensemble.systems) {
      in.push_back(sys.dev + ".probs");
      in.push_back(sys.dev + ".scores");
      in.push_back(sys.test + ".probs");
      in.push_back(sys.test + ".scores");
    }
    in.push_back(cfg.ensemble.dev_gold + ".tags");
    in.push_back(cfg.ensemble.dev_gold + ".hter");
  } else if (command == "analyze-mi") {
    in.push_back(cfg.analysis.states);
  } else if (command == "analyze-similarity") {
    in.push_back(cfg.analysis.before);
    in.push_back(cfg.analysis.after);
  } else {
    throw config_error("unknown command: " + command);
  }
  return in;
}

}  // namespace detqe
