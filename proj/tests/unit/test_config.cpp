#include <fstream>

#include "doctest.h"
#include "ensnet/config.hpp"
#include "ensnet/errors.hpp"
#include "../support/fixtures.hpp"

using namespace ensnet;

TEST_CASE("every preset loads and validates") {
  const std::vector<std::string> names = preset_names();
  CHECK(names.size() == 5);
  for (const std::string& name : names) {
    CAPTURE(name);
    const RunConfig cfg = load_preset(name);
    CHECK(cfg.name == name);
    CHECK_NOTHROW(cfg.validate());
  }
  CHECK_THROWS_AS(load_preset("nope"), ConfigError);
}

TEST_CASE("preset values") {
  const RunConfig mnist = load_preset("paper-mnist");
  CHECK(mnist.model.split_count == 10);
  CHECK(mnist.model.feature_shape() == Shape{2000, 6, 6});
  CHECK(mnist.plan.batch_size == 100);
  CHECK(mnist.augment_mode == AugmentMode::on);
  CHECK(mnist.augment.rotate_deg == Range{-10, 10});

  const RunConfig cifar = load_preset("paper-cifar10");
  CHECK(cifar.model.input_shape == Shape{3, 32, 32});
  CHECK(cifar.plan.schedule.kind == LrSchedule::Kind::step_decay);
  CHECK(cifar.plan.schedule.period_epochs == 100);

  const RunConfig tiny = load_preset("tiny-mnist");
  CHECK(tiny.plan.epochs == 10);
  CHECK(tiny.dataset.train_limit == 5000);
}

TEST_CASE("run config round trips through json") {
  RunConfig cfg = load_preset("tiny-mnist");
  cfg.plan.alternation = Alternation::per_epoch;
  cfg.plan.schedule = LrSchedule::step_decay(0.01, 0.5, 3);
  cfg.augment_mode = AugmentMode::static_expand;
  cfg.static_copies = 2;
  const RunConfig back = run_config_from_json(to_json(cfg));
  CHECK(back.model == cfg.model);
  CHECK(back.dataset == cfg.dataset);
  CHECK(back.augment == cfg.augment);
  CHECK(back.augment_mode == AugmentMode::static_expand);
  CHECK(back.static_copies == 2);
  CHECK(back.plan.alternation == Alternation::per_epoch);
  CHECK(back.plan.schedule.period_epochs == 3);
  CHECK(to_json(back) == to_json(cfg));
}

TEST_CASE("unknown keys and bad values are config errors") {
  nlohmann::json j = to_json(load_preset("tiny-mnist"));
  nlohmann::json typo = j;
  typo["train"]["bach_size"] = 10;
  CHECK_THROWS_AS(run_config_from_json(typo), ConfigError);
  nlohmann::json layer = j;
  layer["model"]["trunk"][0]["type"] = "deconv";
  CHECK_THROWS_AS(run_config_from_json(layer), ConfigError);
  nlohmann::json wrong_type = j;
  wrong_type["train"]["epochs"] = "ten";
  CHECK_THROWS_AS(run_config_from_json(wrong_type), ConfigError);

  RunConfig cfg = load_preset("tiny-mnist");
  cfg.dataset.name = "cifar10";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = load_preset("tiny-mnist");
  cfg.model.split_count = 7;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(parse_augment_mode("sometimes"), ConfigError);
  CHECK(parse_augment_mode(to_string(AugmentMode::on)) == AugmentMode::on);
}

TEST_CASE("config files load from disk") {
  const auto dir = testing::scratch_dir("config");
  std::ofstream(dir / "run.json") << to_json(load_preset("tiny-cifar10")).dump(2);
  CHECK(load_config_file(dir / "run.json").model.input_shape == Shape{3, 32, 32});
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK_THROWS_AS(load_config_file(dir / "broken.json"), ConfigError);
  CHECK_THROWS_AS(load_config_file(dir / "absent.json"), ConfigError);
}
