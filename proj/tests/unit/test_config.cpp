#include <catch_amalgamated.hpp>

#include "wtcvae/config.hpp"

using namespace wtcvae;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("train config: dump and parse round trip") {
  TrainConfig c;
  c.batch_size = 7;
  c.epochs = 123;
  c.seed = 99;
  c.schedule.beta_max = 0.2;
  c.adam.lr = 3e-4;
  c.model.latent_dim = 8;
  c.model.encoder_channels = {1, 2, 3, 4};
  c.train_subset = 50;
  c.dataset = "a/b.json";
  c.checkpoint = "c.ckpt";
  const TrainConfig back = parse_train_config(dump_train_config(c));
  CHECK(dump_train_config(back) == dump_train_config(c));
  CHECK(back.model == c.model);
  CHECK(back.schedule == c.schedule);
  CHECK(back.adam.lr == c.adam.lr);
  CHECK(back.dataset == c.dataset);
}

TEST_CASE("train config: partial files layer over the base, desk scale first") {
  TrainConfig base;
  base.seed = 5;
  const TrainConfig c = parse_train_config(R"({"epochs": 10})", base);
  CHECK(c.epochs == 10);
  CHECK(c.seed == 5);
  const TrainConfig d = parse_train_config(R"({"epochs": 10, "desk_scale": true})");
  CHECK(d.epochs == 10);
  CHECK(d.train_subset == 512);
  CHECK(parse_train_config(R"({"desk_scale": true})").epochs == 2000);
  CHECK(d.schedule.warmup_epochs == 2000.0 / 3.0);
  CHECK(parse_train_config(R"({"desk_scale": true, "beta_warmup_epochs": 50})").schedule.warmup_epochs == 50.0);
}

TEST_CASE("train config: rejects unknown keys, bad types and other versions") {
  CHECK_THROWS_WITH(parse_train_config(R"({"epoch": 3})"), ContainsSubstring("epoch"));
  CHECK_THROWS_WITH(parse_train_config(R"({"model": {"latent": 3}})"), ContainsSubstring("model.latent"));
  CHECK_THROWS_AS(parse_train_config(R"({"epochs": -1})"), Error);
  CHECK_THROWS_AS(parse_train_config(R"({"epochs": 1.5})"), Error);
  CHECK_THROWS_AS(parse_train_config(R"({"lr": "fast"})"), Error);
  CHECK_THROWS_AS(parse_train_config(R"({"desk_scale": 1})"), Error);
  CHECK_THROWS_WITH(parse_train_config(R"({"config_version": 2})"), ContainsSubstring("config_version"));
  CHECK_THROWS_AS(parse_train_config("[1]"), Error);
  CHECK_THROWS_AS(parse_train_config("{"), Error);
}
