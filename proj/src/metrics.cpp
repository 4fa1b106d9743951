#include "ensnet/metrics.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "ensnet/errors.hpp"

namespace ensnet {
namespace {

void check_rate(double value, const char* what) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw ContractError(std::string("append_epoch: ") + what + " " + std::to_string(value) + " outside [0,1]");
  }
}

double parse_double(const std::string& field) {
  double value = 0.0;
  const auto result = std::from_chars(field.data(), field.data() + field.size(), value);
  if (result.ec != std::errc() || result.ptr != field.data() + field.size()) {
    throw DataError("metrics csv: cannot parse number '" + field + "'");
  }
  return value;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  return out;
}

}  // namespace

void MetricsLog::append_epoch(EpochRecord record) {
  if (record.epoch != last_epoch() + 1) {
    throw ContractError("append_epoch: expected epoch " + std::to_string(last_epoch() + 1) + ", got " +
                        std::to_string(record.epoch));
  }
  if (!rows_.empty() && record.test_err_subnets.size() != rows_.front().test_err_subnets.size()) {
    throw ContractError("append_epoch: subnet count changed between epochs");
  }
  if (record.train_loss_subnets.size() != record.test_err_subnets.size()) {
    throw ContractError("append_epoch: subnet loss and error counts differ");
  }
  check_rate(record.test_err_base, "base error");
  check_rate(record.test_err_ensemble, "ensemble error");
  for (double e : record.test_err_subnets) check_rate(e, "subnet error");
  rows_.push_back(std::move(record));
}

std::optional<EpochRecord> MetricsLog::best_ensemble() const {
  if (rows_.empty()) return std::nullopt;
  const EpochRecord* best = &rows_.front();
  for (const EpochRecord& r : rows_) {
    if (r.test_err_ensemble < best->test_err_ensemble) best = &r;
  }
  return *best;
}

std::string format_number(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 9);
  return std::string(buf, result.ptr);
}

std::string metrics_csv(const MetricsLog& log) {
  if (log.empty()) throw ContractError("export_csv: empty metrics log");
  const std::size_t k = log.rows().front().test_err_subnets.size();
  std::string out = "epoch,train_loss_base";
  for (std::size_t i = 0; i < k; ++i) out += ",train_loss_subnet_" + std::to_string(i);
  out += ",test_err_base";
  for (std::size_t i = 0; i < k; ++i) out += ",test_err_subnet_" + std::to_string(i);
  out += ",test_err_ensemble,alpha\n";
  for (const EpochRecord& r : log.rows()) {
    out += std::to_string(r.epoch) + "," + format_number(r.train_loss_base);
    for (double v : r.train_loss_subnets) out += "," + format_number(v);
    out += "," + format_number(r.test_err_base);
    for (double v : r.test_err_subnets) out += "," + format_number(v);
    out += "," + format_number(r.test_err_ensemble) + "," + format_number(r.alpha) + "\n";
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void export_csv(const MetricsLog& log, const std::filesystem::path& path) { write_file_atomic(path, metrics_csv(log)); }

MetricsLog parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("metrics csv: missing header");
  const std::vector<std::string> header = split_line(line);
  if (header.size() < 5 || (header.size() - 5) % 2 != 0 || header.front() != "epoch") {
    throw DataError("metrics csv: unexpected header '" + line + "'");
  }
  const std::size_t k = (header.size() - 5) / 2;
  MetricsLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_line(line);
    if (f.size() != header.size()) throw DataError("metrics csv: row has " + std::to_string(f.size()) + " fields");
    EpochRecord r;
    r.epoch = static_cast<std::uint32_t>(parse_double(f[0]));
    r.train_loss_base = parse_double(f[1]);
    for (std::size_t i = 0; i < k; ++i) r.train_loss_subnets.push_back(parse_double(f[2 + i]));
    r.test_err_base = parse_double(f[2 + k]);
    for (std::size_t i = 0; i < k; ++i) r.test_err_subnets.push_back(parse_double(f[3 + k + i]));
    r.test_err_ensemble = parse_double(f[3 + 2 * k]);
    r.alpha = parse_double(f[4 + 2 * k]);
    log.append_epoch(std::move(r));
  }
  return log;
}

void export_timing_csv(const MetricsLog& log, const std::filesystem::path& path) {
  std::string out = "epoch,wall_seconds\n";
  for (const EpochRecord& r : log.rows()) out += std::to_string(r.epoch) + "," + format_number(r.wall_seconds) + "\n";
  write_file_atomic(path, out);
}

nlohmann::json summary_json(const MetricsLog& log) {
  if (log.empty()) throw ContractError("summary: empty metrics log");
  auto errors = [](const EpochRecord& r) {
    return nlohmann::json{{"epoch", r.epoch},
                          {"ensemble", r.test_err_ensemble},
                          {"base", r.test_err_base},
                          {"subnets", r.test_err_subnets}};
  };
  const EpochRecord& last = log.rows().back();
  nlohmann::json j;
  j["csv_schema"] = kMetricsCsvSchema;
  j["epochs"] = last.epoch;
  j["final"] = errors(last);
  j["best"] = errors(*log.best_ensemble());
  return j;
}

std::string summary_table(const MetricsLog& log) {
  if (log.empty()) throw ContractError("summary: empty metrics log");
  auto percent = [](double rate) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", rate * 100.0);
    return std::string(buf);
  };
  const EpochRecord& last = log.rows().back();
  const EpochRecord best = *log.best_ensemble();
  std::string out = "Model                          | Error rate\n";
  out += "-------------------------------+-----------\n";
  auto row = [&out](const std::string& name, const std::string& value) {
    std::string padded = name;
    padded.resize(31, ' ');
    out += padded + "| " + value + "\n";
  };
  row("EnsNet (final epoch " + std::to_string(last.epoch) + ")", percent(last.test_err_ensemble));
  row("EnsNet (best epoch " + std::to_string(best.epoch) + ")", percent(best.test_err_ensemble));
  row("Base CNN (final epoch)", percent(last.test_err_base));
  for (std::size_t i = 0; i < last.test_err_subnets.size(); ++i) {
    row("Subnetwork " + std::to_string(i) + " (final epoch)", percent(last.test_err_subnets[i]));
  }
  return out;
}

nlohmann::json to_json(const MetricsLog& log) {
  nlohmann::json rows = nlohmann::json::array();
  for (const EpochRecord& r : log.rows()) {
    rows.push_back({{"epoch", r.epoch},
                    {"train_loss_base", r.train_loss_base},
                    {"train_loss_subnets", r.train_loss_subnets},
                    {"test_err_base", r.test_err_base},
                    {"test_err_subnets", r.test_err_subnets},
                    {"test_err_ensemble", r.test_err_ensemble},
                    {"alpha", r.alpha},
                    {"wall_seconds", r.wall_seconds}});
  }
  return rows;
}

MetricsLog metrics_from_json(const nlohmann::json& j) {
  MetricsLog log;
  for (const auto& row : j) {
    EpochRecord r;
    r.epoch = row.at("epoch").get<std::uint32_t>();
    r.train_loss_base = row.at("train_loss_base").get<double>();
    r.train_loss_subnets = row.at("train_loss_subnets").get<std::vector<double>>();
    r.test_err_base = row.at("test_err_base").get<double>();
    r.test_err_subnets = row.at("test_err_subnets").get<std::vector<double>>();
    r.test_err_ensemble = row.at("test_err_ensemble").get<double>();
    r.alpha = row.at("alpha").get<double>();
    r.wall_seconds = row.at("wall_seconds").get<double>();
    log.append_epoch(std::move(r));
  }
  return log;
}

}  // namespace ensnet
