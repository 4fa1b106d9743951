#include "ensnet/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "ensnet/checkpoint.hpp"
#include "ensnet/config.hpp"
#include "ensnet/errors.hpp"
#include "ensnet/inference.hpp"

namespace ensnet::cli {
namespace {

namespace fs = std::filesystem;

struct TrainArgs {
  std::string preset;
  std::string config;
  std::string data_dir;
  std::string out;
  std::string resume;
  std::string augment;
  std::string alternation;
  std::optional<std::uint32_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> train_limit;
  std::optional<std::size_t> test_limit;
  std::optional<std::uint32_t> checkpoint_every;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data_dir;
  std::string summary;
  std::optional<std::size_t> test_limit;
  bool soft_vote = false;
};

std::string percent(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", rate * 100.0);
  return buf;
}

std::string dims(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s;
}

fs::path resolve_data_dir(const std::string& flag, const fs::path& configured) {
  if (!flag.empty()) return flag;
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv("ENSNET_DATA_DIR"); env != nullptr && *env != '\0') return env;
  throw DataError("no data directory: pass --data-dir or set ENSNET_DATA_DIR", DataError::Kind::missing_file);
}

void apply_overrides(RunConfig& config, const TrainArgs& a) {
  if (a.epochs) config.plan.epochs = *a.epochs;
  if (a.batch_size) config.plan.batch_size = *a.batch_size;
  if (a.seed) config.plan.seed = *a.seed;
  if (a.threads) config.plan.threads = *a.threads;
  if (a.checkpoint_every) config.plan.checkpoint_every = *a.checkpoint_every;
  if (a.train_limit) config.dataset.train_limit = *a.train_limit;
  if (a.test_limit) config.dataset.test_limit = *a.test_limit;
  if (!a.augment.empty()) config.augment_mode = parse_augment_mode(a.augment);
  if (!a.alternation.empty()) {
    if (a.alternation == "per_batch") {
      config.plan.alternation = Alternation::per_batch;
    } else if (a.alternation == "per_epoch") {
      config.plan.alternation = Alternation::per_epoch;
    } else {
      throw ConfigError("--alternation must be per_batch or per_epoch");
    }
  }
  config.out_dir = a.out;
}

void write_outputs(const fs::path& dir, const MetricsLog& log) {
  export_csv(log, dir / "metrics.csv");
  export_timing_csv(log, dir / "timing.csv");
  write_file_atomic(dir / "summary.json", summary_json(log).dump(2) + "\n");
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  std::optional<Checkpoint> resumed;
  RunConfig config;
  if (!a.resume.empty()) {
    if (!a.preset.empty() || !a.config.empty()) throw ConfigError("--resume takes its configuration from the checkpoint");
    resumed = load_checkpoint(a.resume);
    if (resumed->run.is_null()) throw ConfigError("checkpoint " + a.resume + " carries no run configuration");
    const std::uint64_t seed = resumed->plan.seed;
    config = run_config_from_json(resumed->run);
    if (a.seed && *a.seed != seed) throw ConfigError("--seed differs from the checkpoint's seed");
    if (a.batch_size && *a.batch_size != config.plan.batch_size) {
      throw ConfigError("--batch-size cannot change on resume");
    }
  } else if (!a.preset.empty() && !a.config.empty()) {
    throw ConfigError("--preset and --config are mutually exclusive");
  } else if (!a.preset.empty()) {
    config = load_preset(a.preset);
  } else if (!a.config.empty()) {
    config = load_config_file(a.config);
  } else {
    throw ConfigError("train needs --preset, --config or --resume");
  }
  apply_overrides(config, a);
  config.plan.adam.alpha = config.plan.schedule.alpha;
  config.validate();
  config.dataset.dir = resolve_data_dir(a.data_dir, config.dataset.dir);

  Dataset train_set = load_dataset(config.dataset, Split::train);
  const Dataset test_set = load_dataset(config.dataset, Split::test);
  if (config.augment_mode == AugmentMode::static_expand) {
    train_set = expand_static(train_set, config.augment, config.static_copies, config.plan.seed);
  }

  const fs::path dir = config.out_dir;
  fs::create_directories(dir);
  const nlohmann::json resolved = to_json(config);
  write_file_atomic(dir / "resolved_config.json", resolved.dump(2) + "\n");

  TrainingState state = resumed ? std::move(resumed->state)
                                : TrainingState::fresh(EnsNetModel::build(config.model, config.plan.seed),
                                                       config.plan.adam);
  out << "model " << config.model.name << ": " << state.model.parameter_count() << " parameters, "
      << state.model.split_count() << " subnetworks; train " << train_set.size() << ", test " << test_set.size()
      << " samples\n";
  if (state.next_epoch >= config.plan.epochs) {
    out << "checkpoint already at epoch " << state.next_epoch << "; nothing to train\n";
  }

  TrainOptions options;
  options.augment = config.augment;
  options.augment_on_the_fly = config.augment_mode == AugmentMode::on;
  options.on_epoch = [&](const EpochRecord& r) {
    char line[160];
    std::snprintf(line, sizeof(line), "epoch %u/%u  loss %.4f  base %s  ensemble %s  (%.1f s)\n", r.epoch,
                  config.plan.epochs, r.train_loss_base, percent(r.test_err_base).c_str(),
                  percent(r.test_err_ensemble).c_str(), r.wall_seconds);
    out << line << std::flush;
  };
  options.save_checkpoint = [&](const TrainingState& s) {
    save_checkpoint(dir / "checkpoint.ckpt", s, config.plan, resolved);
    write_outputs(dir, s.log);
  };
  train(state, train_set, test_set, config.plan, options);

  if (state.log.empty()) return kOk;
  write_outputs(dir, state.log);
  out << summary_table(state.log);
  return kOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  Checkpoint ck = load_checkpoint(a.checkpoint);
  DatasetConfig dataset;
  if (!ck.run.is_null()) dataset = run_config_from_json(ck.run).dataset;
  if (a.test_limit) dataset.test_limit = *a.test_limit;
  dataset.dir = resolve_data_dir(a.data_dir, a.data_dir.empty() ? dataset.dir : fs::path{});
  const Dataset test_set = load_dataset(dataset, Split::test);
  if (test_set.size() == 0) throw DataError("empty test set in " + dataset.dir.string());

  EvaluateOptions options;
  options.soft_vote_diagnostic = a.soft_vote;
  const EvaluationReport report = evaluate(ck.state.model, test_set, options);

  out << "samples: " << report.samples << "\n";
  out << "base CNN error: " << percent(report.voter_error[0]) << "\n";
  for (std::size_t i = 1; i < report.voter_error.size(); ++i) {
    out << "subnetwork " << (i - 1) << " error: " << percent(report.voter_error[i]) << "\n";
  }
  out << "ensemble error: " << percent(report.ensemble_error) << "\n";
  if (a.soft_vote) out << "soft-vote error (diagnostic): " << percent(report.soft_vote_error) << "\n";

  nlohmann::json summary = {{"checkpoint", a.checkpoint},
                            {"epoch", ck.state.next_epoch},
                            {"samples", report.samples},
                            {"base", report.voter_error[0]},
                            {"subnets", std::vector<double>(report.voter_error.begin() + 1, report.voter_error.end())},
                            {"ensemble", report.ensemble_error}};
  if (a.soft_vote) summary["soft_vote"] = report.soft_vote_error;
  const fs::path target = a.summary.empty() ? fs::path(a.checkpoint).parent_path() / "eval_summary.json"
                                            : fs::path(a.summary);
  write_file_atomic(target, summary.dump(2) + "\n");
  return kOk;
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  const CheckpointSummary s = inspect_checkpoint(path);
  ModelConfig config;
  try {
    config = model_config_from_json(s.meta.at("model"));
    config.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint metadata is inconsistent: ") + e.what(), 20);
  }

  std::map<std::string, std::size_t> counts;
  std::vector<std::string> order;
  std::size_t total = 0;
  for (const auto& [name, shape] : s.tensors) {
    if (name.starts_with("opt.") || name.ends_with(".running_mean") || name.ends_with(".running_var")) continue;
    const std::string part = name.substr(0, name.find('.'));
    if (!counts.contains(part)) order.push_back(part);
    counts[part] += numel(shape);
    total += numel(shape);
  }

  out << "checkpoint: " << path << " (format v" << s.version << ", " << s.file_size << " bytes, "
      << s.tensors.size() << " tensors)\n";
  out << "model: " << (config.name.empty() ? "custom" : config.name) << "\n";
  out << "epochs completed: " << s.meta.value("next_epoch", 0u) << "\n";
  out << "input: " << dims(config.input_shape) << "\n";
  out << "trunk:\n";
  std::size_t conv_index = 0;
  for (const TrunkEntry& e : config.trunk) {
    switch (e.kind) {
      case TrunkEntry::Kind::conv:
        out << "  conv" << conv_index++ << " 3x3-" << e.channels << (e.zero_pad ? " (zero padding)" : "")
            << (e.batchnorm ? " + batchnorm" : "") << "\n";
        break;
      case TrunkEntry::Kind::maxpool:
        out << "  maxpool 2x2\n";
        break;
      case TrunkEntry::Kind::dropout:
        out << "  dropout " << e.ratio << "\n";
        break;
    }
  }
  out << "feature-maps: " << dims(config.feature_shape()) << "\n";
  const Shape sub = config.subnet_input_shape();
  out << "split: " << config.split_count << " subnetworks, " << dims(sub) << " inputs each\n";
  for (std::size_t i = 0; i < config.split_count; ++i) {
    out << "  subnet" << i << ": channels [" << i * sub[0] << ", " << (i + 1) * sub[0] << ")\n";
  }
  out << "parameters:\n";
  for (const std::string& part : order) out << "  " << part << ": " << counts[part] << "\n";
  out << "  total: " << total << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"EnsNet: a CNN trunk plus fully connected subnetworks voting on split feature-maps", "ensnet"};
  app.require_subcommand(1);

  TrainArgs t;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model and write metrics, summary and checkpoint");
  train_cmd->add_option("--preset", t.preset, "Built-in configuration: " + [] {
    std::string names;
    for (const std::string& n : preset_names()) names += (names.empty() ? "" : ", ") + n;
    return names;
  }());
  train_cmd->add_option("--config", t.config, "JSON run configuration file");
  train_cmd->add_option("--data-dir", t.data_dir, "Dataset directory (default: $ENSNET_DATA_DIR)");
  train_cmd->add_option("--out", t.out, "Output directory")->required();
  train_cmd->add_option("--epochs", t.epochs, "Total number of epochs");
  train_cmd->add_option("--batch-size", t.batch_size, "Mini-batch size (at least 2)");
  train_cmd->add_option("--seed", t.seed, "Seed for initialization, shuffling, masks and augmentation");
  train_cmd->add_option("--threads", t.threads, "Worker threads for subnetwork updates");
  train_cmd->add_option("--resume", t.resume, "Continue from a checkpoint");
  train_cmd->add_option("--augment", t.augment, "on | off | static");
  train_cmd->add_option("--alternation", t.alternation, "per_batch | per_epoch");
  train_cmd->add_option("--train-limit", t.train_limit, "Use only the first N training samples");
  train_cmd->add_option("--test-limit", t.test_limit, "Use only the first N test samples");
  train_cmd->add_option("--checkpoint-every", t.checkpoint_every, "Checkpoint period in epochs (0: end only)");

  EvalArgs e;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on its dataset's test split");
  eval_cmd->add_option("checkpoint", e.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data-dir", e.data_dir, "Dataset directory (default: from the checkpoint, then $ENSNET_DATA_DIR)");
  eval_cmd->add_option("--summary", e.summary, "Summary JSON path (default: next to the checkpoint)");
  eval_cmd->add_option("--test-limit", e.test_limit, "Use only the first N test samples");
  eval_cmd->add_flag("--soft-vote", e.soft_vote, "Also report the soft-vote error");

  std::string inspect_path;
  CLI::App* inspect_cmd = app.add_subcommand("inspect", "Print the architecture stored in a checkpoint");
  inspect_cmd->add_option("checkpoint", inspect_path, "Checkpoint file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return kConfigError;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(t, out);
    if (eval_cmd->parsed()) return cmd_eval(e, out);
    return cmd_inspect(inspect_path, out);
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << "\n";
    return kConfigError;
  } catch (const DataError& ex) {
    err << "data error: " << ex.what() << "\n";
    return kDataError;
  } catch (const CheckpointError& ex) {
    err << "checkpoint error: " << ex.what() << "\n";
    return kCheckpointError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kComputeError;
  }
}

}  // namespace ensnet::cli
