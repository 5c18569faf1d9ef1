// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lrpolicy/optim.hpp"
#include "lrpolicy/schedule.hpp"
#include "lrpolicy/task.hpp"

namespace lrpolicy {

/// Loss above this (or non-finite) ends a trial as diverged.
inline constexpr double kDivergenceLoss = 1e6;

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::SGD;
  OptimizerHyper hyper;
  Iter budget_iters = 1000;
  std::uint64_t seed = 0;
  Iter eval_every = 0;       ///< 0 selects max(budget / 100, 1)
  Iter snapshot_stride = 0;  ///< 0 disables parameter snapshots
};

Iter resolved_eval_every(const TrainConfig &config);

/// A change of the active policy index made by a live controller.
struct PolicySwitch {
  Iter t = 0;  ///< first iteration run under the new index
  int from = 0;
  int to = 0;
  bool operator==(const PolicySwitch &) const = default;
};

struct ParamSnapshot {
  Iter t = 0;  ///< parameters after t updates
  ParamVector theta;
};

struct TrialRecord {
  std::string task_id;
  std::string model_id;
  /// The static policy, or for controller runs the realised schedule as a
  /// replayable composite.
  Policy policy;
  OptimizerKind optimizer = OptimizerKind::SGD;
  OptimizerHyper hyper;
  std::uint64_t seed = 0;
  Iter budget_iters = 0;
  Iter eval_every = 1;
  std::vector<Metrics> series;
  std::optional<double> peak_top1;
  Iter iter_at_peak = 0;
  double final_loss = 0.0;
  ScheduleSeries lr_trace;
  std::vector<ParamSnapshot> snapshots;
  std::vector<PolicySwitch> switches;
  bool diverged = false;
  double wall_ms = 0.0;
};

/// Learning-rate source whose decisions depend on training feedback.
class Controller {
public:
  virtual ~Controller() = default;
  /// Called once before iteration 0.
  virtual void begin(Iter budget) = 0;
  virtual double lr(Iter t) = 0;
  /// After the update of iteration t. `evaluation` is set when the
  /// validation split was evaluated at this iteration.
  virtual void observe(Iter t, double train_loss, const Metrics *evaluation) = 0;
  /// Realised schedule as a static policy replaying every applied rate.
  virtual Policy realized_policy() const = 0;
  virtual std::vector<PolicySwitch> switches() const { return {}; }
};

/// Runs budget_iters optimizer steps with rates from `policy`, evaluating on
/// the validation split every eval_every iterations and after the last one.
/// Throws lrpolicy::Error when the policy is invalid for the budget.
TrialRecord train(const Task &task, const Policy &policy, const TrainConfig &config);
TrialRecord train(const Task &task, Controller &controller, const TrainConfig &config);

/// Smallest evaluated iteration whose top-1 reaches target; nullopt when
/// never reached (or the task has no accuracy).
std::optional<Iter> iterations_to_target(const TrialRecord &record, double target_top1);

/// Recomputes peak_top1/iter_at_peak/final_loss from the series.
void refresh_summary(TrialRecord &record);

/// "iter,loss,top1,lr" rows; lr is the rate of the last update before the
/// evaluation.
std::string record_csv(const TrialRecord &record);

/// Training-split minibatch order: a fresh permutation per epoch keyed by
/// (seed, epoch). Batches never straddle epochs; the trailing partial batch
/// is dropped.
class BatchSampler {
public:
  BatchSampler(std::size_t train_size, std::size_t batch_size, std::uint64_t seed);
  /// Indices of the batch for iteration t; empty for full-batch tasks.
  std::span<const std::size_t> batch(Iter t);
  std::size_t batches_per_epoch() const { return per_epoch_; }

private:
  std::size_t n_;
  std::size_t batch_;
  std::uint64_t seed_;
  std::size_t per_epoch_;
  Iter epoch_ = -1;
  std::vector<std::size_t> order_;
};

} // namespace lrpolicy
