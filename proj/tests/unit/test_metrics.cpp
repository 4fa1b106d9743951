#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ensnet/errors.hpp"
#include "ensnet/metrics.hpp"
#include "../support/fixtures.hpp"

using namespace ensnet;

namespace {

EpochRecord record(std::uint32_t epoch, double ensemble) {
  EpochRecord r;
  r.epoch = epoch;
  r.train_loss_base = 2.0 / epoch;
  r.train_loss_subnets = {1.5 / epoch, 1.25 / epoch};
  r.test_err_base = 0.25;
  r.test_err_subnets = {0.3, 1.0 / 3.0};
  r.test_err_ensemble = ensemble;
  r.alpha = 0.001;
  r.wall_seconds = 1.5 * epoch;
  return r;
}

MetricsLog three_epochs() {
  MetricsLog log;
  log.append_epoch(record(1, 0.2));
  log.append_epoch(record(2, 0.1));
  log.append_epoch(record(3, 0.1));
  return log;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("csv has a header and one row per epoch") {
  const std::string csv = metrics_csv(three_epochs());
  std::istringstream in(csv);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] ==
        "epoch,train_loss_base,train_loss_subnet_0,train_loss_subnet_1,test_err_base,test_err_subnet_0,"
        "test_err_subnet_1,test_err_ensemble,alpha");
  CHECK(lines[1] == "1,2,1.5,1.25,0.25,0.3,0.333333333,0.2,0.001");
  CHECK(lines[3].starts_with("3,0.666666667,0.5,"));
}

TEST_CASE("csv parses back to the same log") {
  const MetricsLog log = three_epochs();
  const MetricsLog back = parse_metrics_csv(metrics_csv(log));
  REQUIRE(back.rows().size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.rows()[i].epoch == log.rows()[i].epoch);
    CHECK(back.rows()[i].test_err_ensemble == doctest::Approx(log.rows()[i].test_err_ensemble));
    CHECK(back.rows()[i].train_loss_subnets.size() == 2);
  }
  CHECK(metrics_csv(back) == metrics_csv(log));
  CHECK_THROWS_AS(parse_metrics_csv(""), DataError);
  CHECK_THROWS_AS(parse_metrics_csv("a,b\n"), DataError);
  CHECK_THROWS_AS(parse_metrics_csv("epoch,x,y,z,w\n1,2,3\n"), DataError);
}

TEST_CASE("files are written atomically and timing is separate") {
  const auto dir = testing::scratch_dir("metrics");
  const MetricsLog log = three_epochs();
  export_csv(log, dir / "metrics.csv");
  export_timing_csv(log, dir / "timing.csv");
  CHECK(slurp(dir / "metrics.csv") == metrics_csv(log));
  CHECK(slurp(dir / "timing.csv") == "epoch,wall_seconds\n1,1.5\n2,3\n3,4.5\n");
  CHECK_FALSE(std::filesystem::exists(dir / "metrics.csv.tmp"));
  CHECK_THROWS_AS(export_csv(MetricsLog{}, dir / "empty.csv"), ContractError);
}

TEST_CASE("append_epoch enforces order and ranges") {
  MetricsLog log;
  CHECK_THROWS_AS(log.append_epoch(record(2, 0.1)), ContractError);
  log.append_epoch(record(1, 0.1));
  CHECK_THROWS_AS(log.append_epoch(record(1, 0.1)), ContractError);
  CHECK_THROWS_AS(log.append_epoch(record(2, 1.5)), ContractError);
  EpochRecord bad = record(2, 0.1);
  bad.test_err_subnets.push_back(0.5);
  bad.train_loss_subnets.push_back(0.5);
  CHECK_THROWS_AS(log.append_epoch(bad), ContractError);
  bad = record(2, 0.1);
  bad.test_err_subnets.pop_back();
  CHECK_THROWS_AS(log.append_epoch(bad), ContractError);
  CHECK(log.last_epoch() == 1);
}

TEST_CASE("summary picks the earliest best epoch") {
  const MetricsLog log = three_epochs();
  CHECK(log.best_ensemble()->epoch == 2);
  const nlohmann::json s = summary_json(log);
  CHECK(s["epochs"] == 3);
  CHECK(s["best"]["epoch"] == 2);
  CHECK(s["final"]["subnets"].size() == 2);
  const std::string table = summary_table(log);
  CHECK(table.find("EnsNet (best epoch 2)") != std::string::npos);
  CHECK(table.find("10.00%") != std::string::npos);
  CHECK(table.find("Subnetwork 1 (final epoch)") != std::string::npos);
  CHECK_THROWS_AS(summary_json(MetricsLog{}), ContractError);
}

TEST_CASE("json round trip keeps wall time") {
  const MetricsLog log = three_epochs();
  CHECK(metrics_from_json(to_json(log)) == log);
}

TEST_CASE("number formatting") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(2.0) == "2");
  CHECK(format_number(1.0 / 3.0) == "0.333333333");
  CHECK(format_number(1e-9) == "1e-09");
}
