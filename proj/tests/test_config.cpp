#include "doctest.h"
#include "lca/config.hpp"
#include "lca/errors.hpp"

using namespace lca;
using nlohmann::json;

namespace {

json minimal_config() {
  return json{{"dataset",
               {{"kind", "synthetic"},
                {"generator", "clusters"},
                {"num_examples", 100},
                {"feature_dim", 6},
                {"num_classes", 3},
                {"separation", 2.0},
                {"seed", 1}}},
              {"arch", {6, 8, 3}},
              {"optimizer", {{"kind", "sgd"}, {"lr", 0.05}, {"momentum", 0.9},
                             {"batch_size", 16}}},
              {"iterations", 10},
              {"out_dir", "runs/t"},
              {"seed", 3}};
}

}  // namespace

TEST_CASE("a valid config parses and round-trips its hash") {
  const auto cfg = config::RunConfig::from_json(minimal_config());
  CHECK(cfg.arch == std::vector<std::size_t>{6, 8, 3});
  CHECK(cfg.optimizer.lr == 0.05);
  const std::string h1 = cfg.config_hash();
  CHECK(h1.size() == 16);
  CHECK(config::RunConfig::from_json(minimal_config()).config_hash() == h1);

  auto changed = minimal_config();
  changed["seed"] = 4;
  CHECK(config::RunConfig::from_json(changed).config_hash() != h1);
}

TEST_CASE("unknown keys are rejected everywhere") {
  auto top = minimal_config();
  top["spicy"] = true;
  CHECK_THROWS_AS(config::RunConfig::from_json(top), ConfigError);

  auto nested = minimal_config();
  nested["lca"] = {{"tol", 1e-3}, {"panels", 7}};
  CHECK_THROWS_AS(config::RunConfig::from_json(nested), ConfigError);

  auto opt = minimal_config();
  opt["optimizer"]["warmup"] = 10;
  CHECK_THROWS_AS(config::RunConfig::from_json(opt), ConfigError);

  auto per_layer = minimal_config();
  per_layer["optimizer"]["per_layer"] = {{"dense0", {{"freeze", true}}}};
  CHECK_THROWS_AS(config::RunConfig::from_json(per_layer), ConfigError);
}

TEST_CASE("semantic validation failures") {
  auto bad_arch = minimal_config();
  bad_arch["arch"] = {6};
  CHECK_THROWS_AS(config::RunConfig::from_json(bad_arch), ConfigError);

  auto bad_layer = minimal_config();
  bad_layer["optimizer"]["per_layer"] = {{"dense9", {{"frozen", true}}}};
  CHECK_THROWS_AS(config::RunConfig::from_json(bad_layer), ConfigError);

  auto bad_lr = minimal_config();
  bad_lr["optimizer"]["lr"] = 0.0;
  CHECK_THROWS_AS(config::RunConfig::from_json(bad_lr), ConfigError);

  auto bad_agg = minimal_config();
  bad_agg["lca"] = {{"aggregate", "neuron"}};
  CHECK_THROWS_AS(config::RunConfig::from_json(bad_agg), ConfigError);
}

TEST_CASE("defaults are sensible and optional blocks can be omitted") {
  json j{{"dataset",
          {{"kind", "synthetic"}, {"generator", "digits"}, {"num_examples", 100},
           {"seed", 5}}},
         {"arch", {784, 16, 10}},
         {"out_dir", "runs/d"}};
  const auto cfg = config::RunConfig::from_json(j);
  CHECK(cfg.lca.tol == 1e-3);
  CHECK(cfg.lca.max_depth == 6);
  CHECK(cfg.analysis.sync_trials == 10000);
  CHECK(cfg.optimizer.batch_size == 256);
  CHECK(cfg.dataset.generator == config::DatasetConfig::Generator::Digits);
}

TEST_CASE("per-layer overrides survive the json round trip") {
  auto j = minimal_config();
  j["optimizer"]["per_layer"] = {
      {"dense1", {{"frozen", true}, {"lr_scale", 0.1}}},
      {"dense0", {{"momentum_override", 0.5}, {"freeze_from_iter", 7}}}};
  const auto cfg = config::RunConfig::from_json(j);
  const auto back = config::RunConfig::from_json(cfg.to_json());
  CHECK(back.optimizer.per_layer.at("dense1").frozen);
  CHECK(back.optimizer.per_layer.at("dense1").lr_scale == 0.1);
  CHECK(back.optimizer.per_layer.at("dense0").momentum_override == 0.5);
  CHECK(back.optimizer.per_layer.at("dense0").freeze_from_iter == 7);
  CHECK(back.config_hash() == cfg.config_hash());
}
