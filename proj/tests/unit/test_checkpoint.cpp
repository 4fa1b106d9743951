#include <cstring>
#include <fstream>

#include "doctest.h"
#include "ensnet/checkpoint.hpp"
#include "ensnet/errors.hpp"
#include "../support/fixtures.hpp"

using namespace ensnet;
namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TrainingState trained_state() {
  TrainingState state = TrainingState::fresh(EnsNetModel::build(testing::micro_config(2), 4), AdamHyper{});
  TrainPlan plan;
  plan.batch_size = 10;
  plan.epochs = 1;
  plan.seed = 4;
  train(state, testing::quadrant_dataset(30, 1), testing::quadrant_dataset(10, 2, Split::test), plan);
  return state;
}

std::uint64_t error_offset(const fs::path& p) {
  try {
    load_checkpoint(p);
  } catch (const CheckpointError& e) {
    return e.offset();
  }
  FAIL("no CheckpointError");
  return 0;
}

}  // namespace

TEST_CASE("checkpoint round trip restores everything") {
  const auto dir = testing::scratch_dir("ckpt_roundtrip");
  TrainingState state = trained_state();
  TrainPlan plan;
  plan.seed = 4;
  plan.batch_size = 10;
  save_checkpoint(dir / "a.ckpt", state, plan, nlohmann::json{{"name", "micro-run"}});
  CHECK_FALSE(fs::exists(dir / "a.ckpt.tmp"));

  Checkpoint ck = load_checkpoint(dir / "a.ckpt");
  CHECK(ck.plan.seed == 4);
  CHECK(ck.run["name"] == "micro-run");
  CHECK(ck.state.next_epoch == 1);
  CHECK(ck.state.log == state.log);
  CHECK(ck.state.model.config() == state.model.config());
  CHECK(ck.state.base_optimizer.t == state.base_optimizer.t);
  const ParamList a = state.model.all_parameters(), b = ck.state.model.all_parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
  for (std::size_t i = 0; i < state.subnet_optimizers.size(); ++i) {
    for (std::size_t j = 0; j < state.subnet_optimizers[i].m.size(); ++j) {
      CHECK(state.subnet_optimizers[i].m[j] == ck.state.subnet_optimizers[i].m[j]);
      CHECK(state.subnet_optimizers[i].v[j] == ck.state.subnet_optimizers[i].v[j]);
    }
  }
  auto bufs_a = state.model.buffers(), bufs_b = ck.state.model.buffers();
  for (std::size_t i = 0; i < bufs_a.size(); ++i) CHECK(*bufs_a[i].second == *bufs_b[i].second);

  // Saving the restored state reproduces the file byte for byte.
  save_checkpoint(dir / "b.ckpt", ck.state, ck.plan, ck.run);
  CHECK(read_all(dir / "a.ckpt") == read_all(dir / "b.ckpt"));

  const CheckpointSummary s = inspect_checkpoint(dir / "a.ckpt");
  CHECK(s.version == kCheckpointVersion);
  CHECK(s.file_size == fs::file_size(dir / "a.ckpt"));
  CHECK(s.tensors.size() == a.size() + bufs_a.size() + 2 * (state.base_optimizer.m.size() +
                                                             2 * state.subnet_optimizers[0].m.size()));
}

TEST_CASE("corrupt checkpoints report byte offsets") {
  const auto dir = testing::scratch_dir("ckpt_corrupt");
  TrainingState state = trained_state();
  save_checkpoint(dir / "good.ckpt", state, TrainPlan{});
  const std::vector<unsigned char> good = read_all(dir / "good.ckpt");

  std::vector<unsigned char> cut(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(good.size() - 10));
  testing::write_bytes(dir / "cut.ckpt", cut);
  const std::uint64_t off = error_offset(dir / "cut.ckpt");
  CHECK(off > 0);
  CHECK(off < good.size());
  CHECK_THROWS_AS(inspect_checkpoint(dir / "cut.ckpt"), CheckpointError);

  std::vector<unsigned char> header_only(good.begin(), good.begin() + 10);
  testing::write_bytes(dir / "short.ckpt", header_only);
  CHECK(error_offset(dir / "short.ckpt") == 8);

  std::vector<unsigned char> magic = good;
  magic[0] = 'X';
  testing::write_bytes(dir / "magic.ckpt", magic);
  CHECK(error_offset(dir / "magic.ckpt") == 0);

  std::vector<unsigned char> version = good;
  version[8] = 7;
  testing::write_bytes(dir / "version.ckpt", version);
  try {
    load_checkpoint(dir / "version.ckpt");
    FAIL("expected a version error");
  } catch (const CheckpointVersionError& e) {
    CHECK(e.found() == 7);
    CHECK(e.offset() == 8);
  }

  std::vector<unsigned char> trailing = good;
  trailing.push_back(0);
  testing::write_bytes(dir / "trailing.ckpt", trailing);
  CHECK(error_offset(dir / "trailing.ckpt") == good.size());

  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
}

TEST_CASE("an interrupted write leaves the previous checkpoint intact") {
  const auto dir = testing::scratch_dir("ckpt_atomic");
  TrainingState state = trained_state();
  save_checkpoint(dir / "c.ckpt", state, TrainPlan{});
  const auto before = read_all(dir / "c.ckpt");
  // A stale temporary from a crashed writer does not affect loading or the next save.
  testing::write_bytes(dir / "c.ckpt.tmp", {1, 2, 3});
  CHECK_NOTHROW(load_checkpoint(dir / "c.ckpt"));
  save_checkpoint(dir / "c.ckpt", state, TrainPlan{});
  CHECK(read_all(dir / "c.ckpt") == before);
  CHECK_FALSE(fs::exists(dir / "c.ckpt.tmp"));
  fs::create_directories(dir / "blocked.ckpt.tmp");
  CHECK_THROWS_AS(save_checkpoint(dir / "blocked.ckpt", state, TrainPlan{}), CheckpointError);
}
