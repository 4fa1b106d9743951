#include "doctest.h"
#include "ensnet/config.hpp"
#include "ensnet/errors.hpp"
#include "ensnet/model.hpp"
#include "../support/fixtures.hpp"

using namespace ensnet;

TEST_CASE("preset feature-map and subnet input shapes") {
  const ModelConfig mnist = load_preset("paper-mnist").model;
  CHECK(mnist.feature_shape() == Shape{2000, 6, 6});
  CHECK(mnist.subnet_input_shape() == Shape{200, 6, 6});
  CHECK(mnist.split_count == 10);
  const ModelConfig cifar = load_preset("paper-cifar10").model;
  CHECK(cifar.feature_shape() == Shape{4000, 7, 7});
  CHECK(cifar.subnet_input_shape() == Shape{400, 7, 7});
  const ModelConfig tiny = load_preset("tiny-mnist").model;
  CHECK(tiny.split_count == 4);
  CHECK(tiny.subnet_input_shape() == Shape{10, 6, 6});
}

TEST_CASE("parameter counts match the layer arithmetic") {
  // conv: in*out*9 + out; batchnorm: 2*channels; head: FC, BN, FC, FC
  EnsNetModel tiny = EnsNetModel::build(load_preset("tiny-mnist").model, 0);
  CHECK(tiny.trunk_parameter_count() == 36264);
  CHECK(tiny.parameter_count() == 245594);
  CHECK(tiny.parameter_count() <= 500000);

  EnsNetModel paper = EnsNetModel::build(load_preset("paper-mnist").model, 0);
  CHECK(paper.trunk_parameter_count() == 24711408);
  CHECK(paper.parameter_count() == 101401950);
}

TEST_CASE("paper-mnist trunk really produces 2000x6x6 feature-maps") {
  EnsNetModel model = EnsNetModel::build(load_preset("paper-mnist").model, 1);
  Tape<float> tape;
  ParamBinder<float> binder(tape, false);
  const TensorF x({1, 1, 28, 28}, 0.5f);
  const Var<float> fm = model.trunk_forward(binder, tape.watch(x, false), Mode::eval, nullptr);
  CHECK(fm.shape() == Shape{1, 2000, 6, 6});
  const auto blocks = split_feature_maps(fm.value(), 10);
  REQUIRE(blocks.size() == 10);
  for (const auto& b : blocks) CHECK(b.shape() == Shape{1, 200, 6, 6});
}

TEST_CASE("split layout and parameter naming") {
  EnsNetModel model = EnsNetModel::build(testing::micro_config(4), 3);
  CHECK(model.subnet_channels(0) == std::pair<std::size_t, std::size_t>{0, 2});
  CHECK(model.subnet_channels(3) == std::pair<std::size_t, std::size_t>{6, 8});
  CHECK_THROWS_AS(model.subnet_channels(4), ContractError);
  const ParamList base = model.base_parameters();
  CHECK(base.front()->name == "trunk.conv0.weight");
  CHECK(base.back()->name.starts_with("base."));
  for (const Parameter<float>* p : model.subnet_parameters(2)) CHECK(p->name.starts_with("subnet2."));
  CHECK(model.all_parameters().size() == base.size() + 4 * model.subnet_parameters(0).size());
}

TEST_CASE("build is deterministic per seed and parts are independently seeded") {
  EnsNetModel a = EnsNetModel::build(testing::micro_config(), 7);
  EnsNetModel b = EnsNetModel::build(testing::micro_config(), 7);
  EnsNetModel c = EnsNetModel::build(testing::micro_config(), 8);
  CHECK(a.all_parameters()[0]->value == b.all_parameters()[0]->value);
  CHECK_FALSE(a.all_parameters()[0]->value == c.all_parameters()[0]->value);
  CHECK_FALSE(a.subnet(0).fc1.weight.value == a.subnet(1).fc1.weight.value);
}

TEST_CASE("forward_all evaluates the trunk once") {
  EnsNetModel model = EnsNetModel::build(testing::micro_config(2), 3);
  const Dataset d = testing::quadrant_dataset(5, 1);
  const std::size_t before = model.trunk_evaluations();
  const ForwardResult r = forward_all(model, d.images, Mode::eval);
  CHECK(model.trunk_evaluations() == before + 1);
  CHECK(r.base_logits.shape() == Shape{5, 4});
  REQUIRE(r.subnet_logits.size() == 2);
  CHECK(r.subnet_logits[1].shape() == Shape{5, 4});
}

TEST_CASE("invalid configurations raise ConfigError") {
  ModelConfig c = testing::micro_config(3);  // 8 channels do not split into 3
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("8"), ConfigError);
  c = testing::micro_config();
  c.trunk.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = testing::micro_config();
  c.trunk.push_back(TrunkEntry::conv(8, false));
  c.trunk.push_back(TrunkEntry::conv(8, false));  // 4x4 -> 2x2 -> too small
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(split_feature_maps(TensorF({1, 6, 2, 2}), 4), ConfigError);
}

TEST_CASE("wrong input shape is a DimensionError") {
  EnsNetModel model = EnsNetModel::build(testing::micro_config(), 0);
  CHECK_THROWS_AS(forward_all(model, TensorF({2, 1, 9, 9}), Mode::eval), DimensionError);
}
