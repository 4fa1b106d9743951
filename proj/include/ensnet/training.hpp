#pragma once

// Alternating two-step training.
//
// base step:   trunk + base head updated from the base head's loss; the
//              subnetworks and their optimizer states are not touched.
// subnet step: the trunk runs as a fixed feature extractor (eval-mode
//              batchnorm, no dropout, no gradient); each subnetwork is
//              trained on its own channel block with its own optimizer.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ensnet/data.hpp"
#include "ensnet/metrics.hpp"
#include "ensnet/model.hpp"
#include "ensnet/optimizer.hpp"

namespace ensnet {

enum class Alternation { per_batch, per_epoch };
enum class AugmentMode { off, on, static_expand };

struct TrainPlan {
  std::size_t batch_size = 100;
  std::uint32_t epochs = 1;
  Alternation alternation = Alternation::per_batch;
  std::uint64_t seed = 0;
  LrSchedule schedule = LrSchedule::constant(0.001);
  AdamHyper adam;  // alpha is overridden by the schedule each epoch
  std::uint32_t checkpoint_every = 1;  // 0: only after the last epoch
  std::size_t threads = 1;

  void validate() const;
};

struct Batch {
  Tensor<float> images;
  std::vector<int> labels;
};

struct TrainingState {
  EnsNetModel model;
  AdamState<float> base_optimizer;
  std::vector<AdamState<float>> subnet_optimizers;
  MetricsLog log;
  std::uint32_t next_epoch = 0;  // 0-based index of the next epoch to run

  static TrainingState fresh(EnsNetModel model, const AdamHyper& hyper);
};

// Returns the base head's mean cross-entropy on the batch.
float base_step(EnsNetModel& model, const Batch& batch, AdamState<float>& optimizer, Rng& masks);

// Returns one loss per subnetwork. Subnetwork i draws its masks from the
// stream (mask_seed, i); with threads > 1 subnetworks run concurrently and
// produce the same result.
std::vector<float> subnet_step(EnsNetModel& model, const Batch& batch, std::span<AdamState<float>> optimizers,
                               std::uint64_t mask_seed, std::size_t threads = 1);

// Eval-mode loss of subnetwork `subnet` on precomputed final feature-maps.
float subnet_loss_on_features(EnsNetModel& model, std::size_t subnet, const Tensor<float>& feature_maps,
                              std::span<const int> labels);

struct TrainOptions {
  AugmentSpec augment;
  bool augment_on_the_fly = false;
  // Called after each epoch whose index calls for a checkpoint.
  std::function<void(const TrainingState&)> save_checkpoint;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Runs epochs state.next_epoch .. plan.epochs-1, evaluating on `test` after
// each one. Returns the full log, including rows restored from a checkpoint.
const MetricsLog& train(TrainingState& state, const Dataset& train_set, const Dataset& test_set, const TrainPlan& plan,
                        const TrainOptions& options = {});

// Fresh run from a built model.
MetricsLog train(EnsNetModel& model, const Dataset& train_set, const Dataset& test_set, const TrainPlan& plan,
                 const TrainOptions& options = {});

}  // namespace ensnet
