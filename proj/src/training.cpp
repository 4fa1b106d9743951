#include "ensnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <thread>

#include "ensnet/errors.hpp"
#include "ensnet/inference.hpp"
#include "ensnet/ops.hpp"

namespace ensnet {
namespace {

std::vector<const Tensor<float>*> gradients_for(const ParamList& params, const ParamBinder<float>& binder,
                                                const Gradients<float>& grads) {
  std::vector<const Tensor<float>*> out;
  out.reserve(params.size());
  for (const Parameter<float>* p : params) {
    const Var<float>* var = binder.find(*p);
    out.push_back(var == nullptr ? nullptr : grads.find(*var));
  }
  return out;
}

float train_subnet(EnsNetModel& model, std::size_t i, const Tensor<float>& features, std::span<const int> labels,
                   AdamState<float>& optimizer, std::uint64_t mask_seed) {
  Tape<float> tape;
  ParamBinder<float> binder(tape, true);
  const auto [begin, end] = model.subnet_channels(i);
  const Var<float> input = tape.watch(features, false);
  const Var<float> block = ops::slice_channels(input, begin, end);
  Rng masks(mask_seed, StreamPurpose::subnet_masks, {i});
  const Var<float> logits = model.subnet(i).forward(binder, block, Mode::train, &masks);
  const Var<float> loss = layers::softmax_cross_entropy(logits, labels);
  const Gradients<float> grads = tape.backward(loss);
  ParamList params = model.subnet_parameters(i);
  const auto grad_list = gradients_for(params, binder, grads);
  adam_step<float>(params, grad_list, optimizer);
  return loss.value().item();
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> ids, const TrainOptions& options,
                 std::uint64_t seed, std::uint64_t epoch) {
  Dataset picked = data.gather(ids);
  if (options.augment_on_the_fly) augment_batch(picked.images, ids, options.augment, seed, epoch);
  return Batch{std::move(picked.images), std::move(picked.labels)};
}

}  // namespace

void TrainPlan::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2 (batchnorm needs batch statistics)");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (threads == 0) throw ConfigError("threads must be positive");
  if (!(schedule.alpha > 0.0)) throw ConfigError("learning rate must be positive");
  if (schedule.kind == LrSchedule::Kind::step_decay && (schedule.period_epochs == 0 || !(schedule.factor > 0.0))) {
    throw ConfigError("step decay needs a positive factor and period");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.eps > 0.0)) {
    throw ConfigError("Adam betas must lie in [0,1) and eps must be positive");
  }
}

TrainingState TrainingState::fresh(EnsNetModel model, const AdamHyper& hyper) {
  TrainingState state{std::move(model), {}, {}, {}, 0};
  ParamList base = state.model.base_parameters();
  state.base_optimizer = AdamState<float>::create("base", hyper, base);
  for (std::size_t i = 0; i < state.model.split_count(); ++i) {
    ParamList params = state.model.subnet_parameters(i);
    state.subnet_optimizers.push_back(AdamState<float>::create("subnet" + std::to_string(i), hyper, params));
  }
  return state;
}

float base_step(EnsNetModel& model, const Batch& batch, AdamState<float>& optimizer, Rng& masks) {
  Tape<float> tape;
  ParamBinder<float> binder(tape, true);
  const Var<float> x = tape.watch(batch.images, false);
  const Var<float> features = model.trunk_forward(binder, x, Mode::train, &masks);
  const Var<float> logits = model.base_head().forward(binder, features, Mode::train, &masks);
  const Var<float> loss = layers::softmax_cross_entropy(logits, batch.labels);
  const Gradients<float> grads = tape.backward(loss);
  ParamList params = model.base_parameters();
  const auto grad_list = gradients_for(params, binder, grads);
  adam_step<float>(params, grad_list, optimizer);
  return loss.value().item();
}

std::vector<float> subnet_step(EnsNetModel& model, const Batch& batch, std::span<AdamState<float>> optimizers,
                               std::uint64_t mask_seed, std::size_t threads) {
  const std::size_t k = model.split_count();
  if (optimizers.size() != k) {
    throw ContractError("subnet_step: " + std::to_string(optimizers.size()) + " optimizers for " + std::to_string(k) +
                        " subnetworks");
  }
  Tensor<float> features;
  {
    Tape<float> tape;
    ParamBinder<float> frozen(tape, false);
    const Var<float> x = tape.watch(batch.images, false);
    features = model.trunk_forward(frozen, x, Mode::eval, nullptr).value();
  }

  std::vector<float> losses(k);
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), k);
  if (workers <= 1) {
    for (std::size_t i = 0; i < k; ++i) {
      losses[i] = train_subnet(model, i, features, batch.labels, optimizers[i], mask_seed);
    }
    return losses;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < k; i += workers) {
            losses[i] = train_subnet(model, i, features, batch.labels, optimizers[i], mask_seed);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return losses;
}

float subnet_loss_on_features(EnsNetModel& model, std::size_t subnet, const Tensor<float>& feature_maps,
                              std::span<const int> labels) {
  Tape<float> tape;
  ParamBinder<float> binder(tape, false);
  const auto [begin, end] = model.subnet_channels(subnet);
  const Var<float> input = tape.watch(feature_maps, false);
  const Var<float> logits = model.subnet(subnet).forward(binder, ops::slice_channels(input, begin, end), Mode::eval,
                                                         nullptr);
  return layers::softmax_cross_entropy(logits, labels).value().item();
}

const MetricsLog& train(TrainingState& state, const Dataset& train_set, const Dataset& test_set, const TrainPlan& plan,
                        const TrainOptions& options) {
  plan.validate();
  if (train_set.size() == 0) throw ContractError("train: empty training set");
  if (test_set.size() == 0) throw ContractError("train: empty test set");
  if (options.augment_on_the_fly) options.augment.validate();

  EnsNetModel& model = state.model;
  const std::size_t k = model.split_count();
  const std::size_t n = train_set.size();

  for (std::uint32_t epoch = state.next_epoch; epoch < plan.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double alpha = apply_schedule(epoch, plan.schedule);
    state.base_optimizer.hyper.alpha = alpha;
    for (AdamState<float>& opt : state.subnet_optimizers) opt.hyper.alpha = alpha;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(plan.seed, StreamPurpose::shuffle, {epoch});
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

    std::vector<std::span<const std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += plan.batch_size) {
      const std::size_t count = std::min(plan.batch_size, n - start);
      if (count < 2) break;  // batchnorm cannot train on a single sample
      batches.emplace_back(order.data() + start, count);
    }
    if (batches.empty()) throw ContractError("train: training set too small for one batch");

    double base_loss = 0.0;
    std::vector<double> subnet_loss(k, 0.0);
    auto run_base = [&](std::size_t b) {
      const Batch batch = make_batch(train_set, batches[b], options, plan.seed, epoch);
      Rng masks(plan.seed, StreamPurpose::base_masks, {epoch, b});
      base_loss += base_step(model, batch, state.base_optimizer, masks);
      return batch;
    };
    auto run_subnets = [&](std::size_t b, const Batch& batch) {
      const std::uint64_t mask_seed = derive_seed(plan.seed, {epoch, b});
      const std::vector<float> losses = subnet_step(model, batch, state.subnet_optimizers, mask_seed, plan.threads);
      for (std::size_t i = 0; i < k; ++i) subnet_loss[i] += losses[i];
    };

    if (plan.alternation == Alternation::per_batch) {
      for (std::size_t b = 0; b < batches.size(); ++b) run_subnets(b, run_base(b));
    } else {
      for (std::size_t b = 0; b < batches.size(); ++b) run_base(b);
      for (std::size_t b = 0; b < batches.size(); ++b) {
        run_subnets(b, make_batch(train_set, batches[b], options, plan.seed, epoch));
      }
    }

    const EvaluationReport report = evaluate(model, test_set);
    EpochRecord record;
    record.epoch = epoch + 1;
    record.train_loss_base = base_loss / static_cast<double>(batches.size());
    for (double l : subnet_loss) record.train_loss_subnets.push_back(l / static_cast<double>(batches.size()));
    record.test_err_base = report.voter_error[0];
    record.test_err_subnets.assign(report.voter_error.begin() + 1, report.voter_error.end());
    record.test_err_ensemble = report.ensemble_error;
    record.alpha = alpha;
    record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    state.log.append_epoch(record);
    state.next_epoch = epoch + 1;
    if (options.on_epoch) options.on_epoch(record);

    const bool last = epoch + 1 == plan.epochs;
    const bool due = plan.checkpoint_every > 0 && (epoch + 1) % plan.checkpoint_every == 0;
    if (options.save_checkpoint && (last || due)) options.save_checkpoint(state);
  }
  return state.log;
}

MetricsLog train(EnsNetModel& model, const Dataset& train_set, const Dataset& test_set, const TrainPlan& plan,
                 const TrainOptions& options) {
  TrainingState state = TrainingState::fresh(std::move(model), plan.adam);
  try {
    train(state, train_set, test_set, plan, options);
  } catch (...) {
    model = std::move(state.model);
    throw;
  }
  model = std::move(state.model);
  return state.log;
}

}  // namespace ensnet
