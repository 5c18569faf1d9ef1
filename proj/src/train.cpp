// SPDX-License-Identifier: Apache-2.0
#include "lrpolicy/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "lrpolicy/error.hpp"
#include "lrpolicy/rng.hpp"

namespace lrpolicy {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool divergent(double loss) { return !std::isfinite(loss) || loss > kDivergenceLoss; }

/// Adapts a static policy to the controller interface.
class StaticSchedule final : public Controller {
public:
  explicit StaticSchedule(Policy policy) : policy_(std::move(policy)) {}
  void begin(Iter budget) override { budget_ = budget; }
  double lr(Iter t) override { return eval_lr(policy_, t, budget_); }
  void observe(Iter, double, const Metrics *) override {}
  Policy realized_policy() const override { return policy_; }

private:
  Policy policy_;
  Iter budget_ = 0;
};

TrialRecord run(const Task &task, Controller &schedule, const TrainConfig &config) {
  if (config.budget_iters < 1) throw Error("budget must be >= 1 iteration");
  if (config.eval_every < 0 || config.snapshot_stride < 0) {
    throw Error("eval_every and snapshot_stride must be non-negative");
  }
  const Iter budget = config.budget_iters;
  const Iter eval_every = resolved_eval_every(config);
  const auto started = Clock::now();

  TrialRecord rec;
  rec.task_id = task.id();
  rec.model_id = task.model_id();
  rec.optimizer = config.optimizer;
  rec.hyper = config.hyper;
  rec.seed = config.seed;
  rec.budget_iters = budget;
  rec.eval_every = eval_every;
  rec.lr_trace.points.reserve(static_cast<std::size_t>(budget));

  ParamVector theta = task.initial_params(config.seed);
  ParamVector grad(theta.size());
  OptimizerState state = make_optimizer(config.optimizer, config.hyper, theta.size());
  BatchSampler sampler(task.train_size(), task.batch_size(), config.seed);

  auto evaluate_at = [&](Iter iteration) {
    Metrics m = task.evaluate(theta, Split::Validation);
    m.iteration = iteration;
    m.wall_ms = elapsed_ms(started);
    rec.series.push_back(m);
    return &rec.series.back();
  };

  schedule.begin(budget);
  for (Iter t = 0; t < budget; ++t) {
    if (config.snapshot_stride > 0 && t % config.snapshot_stride == 0) {
      rec.snapshots.push_back({t, theta});
    }
    const double lr = schedule.lr(t);
    const double loss = task.loss_and_grad(theta, Split::Train, sampler.batch(t), grad);
    if (divergent(loss) || !all_finite(grad)) {
      Metrics m = task.evaluate(theta, Split::Validation);
      m.loss = std::isfinite(loss) ? loss : std::numeric_limits<double>::infinity();
      m.iteration = t;
      m.wall_ms = elapsed_ms(started);
      rec.series.push_back(m);
      rec.diverged = true;
      break;
    }
    apply_step(theta, state, grad, lr);
    rec.lr_trace.points.push_back({t, lr});

    const Iter done = t + 1;
    const Metrics *evaluation = nullptr;
    if (!all_finite(theta)) {
      evaluation = evaluate_at(done);
      rec.series.back().loss = std::numeric_limits<double>::quiet_NaN();
      rec.diverged = true;
      break;
    }
    if (done % eval_every == 0 || done == budget) {
      evaluation = evaluate_at(done);
      if (divergent(evaluation->loss)) {
        rec.diverged = true;
        break;
      }
    }
    schedule.observe(t, loss, evaluation);
  }
  if (!rec.diverged && config.snapshot_stride > 0 && budget % config.snapshot_stride == 0) {
    rec.snapshots.push_back({budget, theta});
  }

  rec.policy = schedule.realized_policy();
  rec.lr_trace.policy = rec.policy;
  rec.switches = schedule.switches();
  refresh_summary(rec);
  rec.wall_ms = elapsed_ms(started);
  return rec;
}

} // namespace

Iter resolved_eval_every(const TrainConfig &config) {
  if (config.eval_every > 0) return config.eval_every;
  return std::max<Iter>(config.budget_iters / 100, 1);
}

TrialRecord train(const Task &task, const Policy &policy, const TrainConfig &config) {
  require_valid(policy, config.budget_iters);
  StaticSchedule schedule(policy);
  return run(task, schedule, config);
}

TrialRecord train(const Task &task, Controller &controller, const TrainConfig &config) {
  return run(task, controller, config);
}

void refresh_summary(TrialRecord &record) {
  record.peak_top1.reset();
  record.iter_at_peak = 0;
  for (const auto &m : record.series) {
    if (m.top1 && (!record.peak_top1 || *m.top1 > *record.peak_top1)) {
      record.peak_top1 = m.top1;
      record.iter_at_peak = m.iteration;
    }
  }
  record.final_loss =
      record.series.empty() ? std::numeric_limits<double>::quiet_NaN() : record.series.back().loss;
}

std::optional<Iter> iterations_to_target(const TrialRecord &record, double target_top1) {
  for (const auto &m : record.series) {
    if (m.top1 && *m.top1 >= target_top1) return m.iteration;
  }
  return std::nullopt;
}

std::string record_csv(const TrialRecord &record) {
  std::string out = "iter,loss,top1,lr\n";
  const auto &pts = record.lr_trace.points;
  char buf[128];
  for (const auto &m : record.series) {
    // lr of the last update at or before this evaluation
    double lr = std::numeric_limits<double>::quiet_NaN();
    const auto it = std::upper_bound(pts.begin(), pts.end(), m.iteration - 1,
                                     [](Iter t, const SchedulePoint &p) { return t < p.t; });
    if (it != pts.begin()) lr = std::prev(it)->lr;
    std::string top1 = "";
    if (m.top1) {
      char tb[40];
      std::snprintf(tb, sizeof tb, "%.17g", *m.top1);
      top1 = tb;
    }
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%s,%.17g\n", static_cast<long long>(m.iteration),
                  m.loss, top1.c_str(), lr);
    out += buf;
  }
  return out;
}

BatchSampler::BatchSampler(std::size_t train_size, std::size_t batch_size, std::uint64_t seed)
    : n_(train_size), batch_(std::max<std::size_t>(1, std::min(batch_size, train_size))),
      seed_(seed), per_epoch_(n_ == 0 ? 1 : std::max<std::size_t>(1, n_ / batch_)) {}

std::span<const std::size_t> BatchSampler::batch(Iter t) {
  if (n_ == 0) return {};
  const Iter epoch = t / static_cast<Iter>(per_epoch_);
  if (epoch != epoch_) {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(stream_key(seed_, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n_ - 1; i > 0; --i) std::swap(order_[i], order_[rng.below(i + 1)]);
    epoch_ = epoch;
  }
  const std::size_t slot = static_cast<std::size_t>(t % static_cast<Iter>(per_epoch_));
  return {order_.data() + slot * batch_, batch_};
}

} // namespace lrpolicy
