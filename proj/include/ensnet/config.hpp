#pragma once

// JSON forms of the model, training and augmentation settings, the run
// configuration used by the command-line tool, and the built-in presets.
//
// Model JSON:
//   {"input_shape": [C,H,W],
//    "trunk": [{"type":"conv","channels":64,"pad":true,"batchnorm":true},
//              {"type":"maxpool"}, {"type":"dropout","ratio":0.35}, ...],
//    "split_count": 10, "num_classes": 10,
//    "base_head":   {"hidden":[512,512],"batchnorm":true,"dropout":0.5,"dropconnect":0.5},
//    "subnet_head": {...}}
// Unknown keys are rejected so typos surface as ConfigError.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ensnet/data.hpp"
#include "ensnet/model.hpp"
#include "ensnet/training.hpp"
#include "json.hpp"

namespace ensnet {

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainPlan& plan);
TrainPlan train_plan_from_json(const nlohmann::json& j);

struct DatasetConfig {
  std::string name = "mnist";  // mnist | fashion-mnist | cifar10
  std::filesystem::path dir;
  std::size_t train_limit = 0;  // 0: all samples
  std::size_t test_limit = 0;

  bool operator==(const DatasetConfig&) const = default;
};

struct RunConfig {
  std::string name;
  ModelConfig model;
  DatasetConfig dataset;
  TrainPlan plan;
  AugmentSpec augment;
  AugmentMode augment_mode = AugmentMode::off;
  std::size_t static_copies = 1;
  std::filesystem::path out_dir;

  // Everything except file existence; throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

std::vector<std::string> preset_names();
RunConfig load_preset(std::string_view name);
RunConfig load_config_file(const std::filesystem::path& path);

std::string to_string(AugmentMode mode);
AugmentMode parse_augment_mode(std::string_view text);

// Files looked up under dataset.dir (or dataset.dir/<name>):
//   mnist, fashion-mnist: train-images-idx3-ubyte, train-labels-idx1-ubyte,
//                         t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte
//   cifar10: data_batch_1.bin .. data_batch_5.bin, test_batch.bin
//            (also inside cifar-10-batches-bin/)
// The split is truncated to the configured limit.
Dataset load_dataset(const DatasetConfig& config, Split split);

}  // namespace ensnet
