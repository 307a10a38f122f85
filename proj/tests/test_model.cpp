// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "detqe/adam.hpp"
#include "detqe/checkpoint.hpp"
#include "detqe/model.hpp"
#include "testutil.hpp"

using namespace detqe;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.ffn = 16;
  cfg.vocab_size = 20;
  cfg.max_len = 12;
  return cfg;
}

}  // namespace

TEST_CASE("model config validation lists every violation") {
  ModelConfig cfg = small_config();
  cfg.hidden = 10;
  cfg.heads = 4;
  cfg.layers = 0;
  try {
    cfg.validate();
    FAIL("expected config_error");
  } catch (const config_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("layers") != std::string::npos);
    CHECK(msg.find("divisible") != std::string::npos);
  }
  CHECK_NOTHROW(small_config().validate());
}

TEST_CASE("layer states have layers+1 entries per stack") {
  Transformer<double> model(small_config());
  Rng rng(3);
  model.store().init_params(rng);

  Tape<double> tape;
  LayerStates states;
  std::vector<int> src = {1, 2, 3};
  std::vector<int> tgt = {4, 5, 6, 7};
  auto* out = model.forward(tape, src, tgt, &states);

  REQUIRE(states.enc.size() == 3);
  REQUIRE(states.dec.size() == 3);
  for (const auto& s : states.enc) {
    CHECK(s.rows() == 3);
    CHECK(s.cols() == 8);
  }
  for (const auto& s : states.dec) {
    CHECK(s.rows() == 4);
    CHECK(s.cols() == 8);
  }
  // the last decoder entry is the representation handed to the heads
  CHECK(states.dec.back() == out->value);
}

TEST_CASE("embedding-layer states carry no position signal") {
  Transformer<double> model(small_config());
  Rng rng(4);
  model.store().init_params(rng);

  LayerStates states;
  Tape<double> tape;
  // the same token at two positions must have identical layer-0 states
  model.forward(tape, {5, 5, 9}, {1, 2}, &states);
  CHECK(states.enc[0].row(0) == states.enc[0].row(1));
  CHECK(states.enc[0].row(0) != states.enc[0].row(2));
}

TEST_CASE("shared embeddings collapse the two tables into one") {
  ModelConfig cfg = small_config();
  cfg.share_embeddings = true;
  Transformer<double> model(cfg);
  CHECK(model.store().find("embed") != nullptr);
  CHECK(model.store().find("src_embed") == nullptr);
  Rng rng(5);
  model.store().init_params(rng);
  Tape<double> tape;
  LayerStates states;
  model.forward(tape, {3, 4}, {3, 9}, &states);
  // token 3 embeds identically on both sides
  CHECK(states.enc[0].row(0) == states.dec[0].row(0));
}

TEST_CASE("parameter store enforces unique names and known lookups") {
  ParamStore<double> store;
  store.create("w", 2, 2, Init::kZero);
  CHECK_THROWS_AS(store.create("w", 1, 1, Init::kZero), state_error);
  CHECK(store.find("nope") == nullptr);
  CHECK_THROWS_AS(store.at("nope"), state_error);
  CHECK(store.scalar_count() == 4);
}

TEST_CASE("initialization is deterministic and respects tensor kinds") {
  Transformer<double> a(small_config());
  Transformer<double> b(small_config());
  Rng ra(77), rb(77);
  a.store().init_params(ra);
  b.store().init_params(rb);
  for (size_t i = 0; i < a.store().size(); ++i) CHECK(a.store()[i].value == b.store()[i].value);

  CHECK(a.store().at("enc.0.ln1.gain").value.minCoeff() == 1.0);
  CHECK(a.store().at("enc.0.ln1.bias").value.cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.store().at("enc.0.attn.bq").value.cwiseAbs().maxCoeff() == 0.0);
  // fan-in scaling keeps weight entries inside the uniform limit
  const double limit = std::sqrt(3.0 / 8.0);
  CHECK(a.store().at("enc.0.attn.wq").value.cwiseAbs().maxCoeff() <= limit);
  CHECK(a.store().at("enc.0.attn.wq").value.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("checkpoints round-trip byte for byte") {
  testutil::TempDir dir("ckpt");
  Transformer<double> model(small_config());
  Rng rng(11);
  model.store().init_params(rng);

  // run a couple of optimizer steps so the moments are nontrivial
  Adam<double> opt(AdamConfig{});
  for (int s = 0; s < 3; ++s) {
    Tape<double> tape;
    auto* out = model.forward(tape, {1, 2, 3, 4}, {5, 6, 7});
    auto* loss = tape.mean_all(tape.square(out));
    model.store().zero_grads();
    tape.backward(loss);
    opt.step(model.store());
  }

  nlohmann::json meta = {{"kind", "generator"},
                         {"model", model_config_to_json(model.config())},
                         {"step", 3}};
  Rng train_rng(99);
  train_rng.uniform();
  train_rng.gauss();

  const std::string p1 = dir.file("a.ckpt");
  const std::string p2 = dir.file("b.ckpt");
  save_checkpoint(p1, meta, 0xabcdef1234ull, opt.steps(), train_rng.save(), model.store());

  Checkpoint<double> ck = load_checkpoint<double>(p1);
  CHECK(ck.vocab_hash == 0xabcdef1234ull);
  CHECK(ck.adam_steps == 3);
  CHECK(ck.meta.at("kind") == "generator");
  CHECK(ck.meta.at("model").at("hidden") == 8);
  REQUIRE(ck.tensors.size() == model.store().size());

  // restoring into a fresh model reproduces values, moments and RNG
  Transformer<double> copy(model_config_from_json(ck.meta.at("model")));
  restore_into(copy.store(), ck);
  for (size_t i = 0; i < model.store().size(); ++i) {
    CHECK(copy.store()[i].value == model.store()[i].value);
    CHECK(copy.store()[i].m == model.store()[i].m);
    CHECK(copy.store()[i].v == model.store()[i].v);
  }
  Rng resumed(1);
  resumed.restore(ck.rng);
  Rng original(99);
  original.uniform();
  original.gauss();
  CHECK(resumed.uniform() == original.uniform());
  CHECK(resumed.gauss() == original.gauss());

  save_checkpoint(p2, ck.meta, ck.vocab_hash, ck.adam_steps, ck.rng, copy.store());
  CHECK(read_file(p1) == read_file(p2));
}

TEST_CASE("checkpoint loading rejects wrong files") {
  testutil::TempDir dir("ckbad");
  write_file(dir.file("junk.ckpt"), "definitely not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint<double>(dir.file("junk.ckpt")), input_error);
  CHECK_THROWS_AS(load_checkpoint<double>(dir.file("missing.ckpt")), input_error);

  Transformer<float> model(small_config());
  Rng rng(1);
  model.store().init_params(rng);
  const std::string p = dir.file("f32.ckpt");
  save_checkpoint(p, nlohmann::json::object(), 0, 0, rng.save(), model.store());
  CHECK(checkpoint_scalar_bytes(p) == 4);
  CHECK_THROWS_AS(load_checkpoint<double>(p), input_error);
  CHECK_NOTHROW(load_checkpoint<float>(p));
}

TEST_CASE("restore refuses structural mismatches") {
  testutil::TempDir dir("ckmis");
  Transformer<double> model(small_config());
  Rng rng(2);
  model.store().init_params(rng);
  const std::string p = dir.file("m.ckpt");
  save_checkpoint(p, nlohmann::json::object(), 0, 0, rng.save(), model.store());
  Checkpoint<double> ck = load_checkpoint<double>(p);

  ModelConfig other = small_config();
  other.layers = 1;
  Transformer<double> fewer(other);
  CHECK_THROWS_AS(restore_into(fewer.store(), ck), input_error);

  ModelConfig wider = small_config();
  wider.ffn = 32;
  Transformer<double> mismatched(wider);
  CHECK_THROWS_AS(restore_into(mismatched.store(), ck), input_error);
}

TEST_CASE("model config json round-trips") {
  ModelConfig cfg = small_config();
  cfg.causal_decoder = true;
  cfg.dropout = 0.15;
  ModelConfig back = model_config_from_json(model_config_to_json(cfg));
  CHECK(back.layers == cfg.layers);
  CHECK(back.hidden == cfg.hidden);
  CHECK(back.causal_decoder == cfg.causal_decoder);
  CHECK(back.dropout == cfg.dropout);
  CHECK_THROWS_AS(model_config_from_json(nlohmann::json{{"layers", 2}}), input_error);
}

TEST_CASE("dropout is active only when a training rng is supplied") {
  ModelConfig cfg = small_config();
  cfg.dropout = 0.5;
  Transformer<double> model(cfg);
  Rng rng(21);
  model.store().init_params(rng);

  Tape<double> t1, t2;
  auto* a = model.forward(t1, {1, 2, 3}, {4, 5});
  auto* b = model.forward(t2, {1, 2, 3}, {4, 5});
  CHECK(a->value == b->value);  // inference path has no randomness

  Rng d1(5), d2(6);
  Tape<double> t3, t4;
  auto* c = model.forward(t3, {1, 2, 3}, {4, 5}, nullptr, &d1);
  auto* d = model.forward(t4, {1, 2, 3}, {4, 5}, nullptr, &d2);
  CHECK(c->value != d->value);
}
