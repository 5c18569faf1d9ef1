// SPDX-License-Identifier: Apache-2.0
#include "lrpolicy/tuner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <thread>

#include "lrpolicy/error.hpp"
#include "lrpolicy/json_io.hpp"
#include "lrpolicy/rng.hpp"

namespace lrpolicy {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Worker pool

std::vector<TrialRecord> run_trials(const std::vector<std::function<TrialRecord()>> &jobs,
                                    int workers) {
  std::vector<TrialRecord> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = jobs[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(jobs.size(), static_cast<std::size_t>(std::max(1, workers)));
  if (n_threads <= 1) {
    drain();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_threads; ++w) pool.emplace_back(drain);
    for (auto &th : pool) th.join();
  }
  for (const auto &e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

// ---------------------------------------------------------------------------
// Plateau

void check_plateau_config(const PlateauConfig &cfg, Iter budget) {
  if (cfg.patience < 1) throw Error("plateau patience must be >= 1");
  if (!(cfg.min_delta > 0.0)) throw Error("plateau min_delta must be > 0");
  if (!(cfg.phase_split > 0.0 && cfg.phase_split < 1.0)) {
    throw Error("plateau phase_split must lie in (0,1)");
  }
  if (cfg.warmup < 0 || cfg.warmup >= budget) throw Error("plateau warmup must lie in [0,budget)");
}

std::string_view action_name(Action a) {
  switch (a) {
  case Action::NONE:
    return "NONE";
  case Action::INCREASE:
    return "INCREASE";
  case Action::DECREASE:
    return "DECREASE";
  }
  return "?";
}

Action is_trapped_on_plateau_action(std::span<const double> history, double m, Iter t,
                                    Iter budget, const PlateauConfig &cfg) {
  if (t < cfg.warmup) return Action::NONE;
  const auto patience = static_cast<std::size_t>(cfg.patience);
  if (history.size() < patience) return Action::NONE;
  double next = m;
  for (std::size_t back = 0; back < patience; ++back) {
    const double prev = history[history.size() - 1 - back];
    if (prev - next > cfg.min_delta) return Action::NONE;
    next = prev;
  }
  return static_cast<double>(t) < cfg.phase_split * static_cast<double>(budget)
             ? Action::INCREASE
             : Action::DECREASE;
}

void check_policy_order(const std::vector<Policy> &policies, Iter budget) {
  if (policies.size() < 2) return;
  std::vector<Policy> bound;
  for (const auto &p : policies) bound.push_back(bind_budget(p, budget));
  constexpr Iter kSamples = 64;
  for (Iter s = 0; s < kSamples; ++s) {
    const Iter t = budget == 1 ? 0 : s * (budget - 1) / (kSamples - 1);
    for (std::size_t i = 0; i + 1 < bound.size(); ++i) {
      const double hi = eval_lr(bound[i], t, budget);
      const double lo = eval_lr(bound[i + 1], t, budget);
      if (lo > hi) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "policies out of order: p%zu(t=%lld)=%.6g exceeds p%zu(t=%lld)=%.6g", i + 2,
                      static_cast<long long>(t), lo, i + 1, static_cast<long long>(t), hi);
        throw Error(buf);
      }
    }
  }
}

PlateauController::PlateauController(std::vector<Policy> policies, int start_index,
                                     PlateauConfig cfg)
    : policies_(std::move(policies)), start_(start_index), cfg_(cfg) {
  if (policies_.empty()) throw Error("plateau controller needs at least one policy");
  if (start_ < 1 || start_ > static_cast<int>(policies_.size())) {
    throw Error("start index " + std::to_string(start_) + " outside [1," +
                std::to_string(policies_.size()) + "]");
  }
  for (const auto &p : policies_) {
    if (std::holds_alternative<Composite>(p)) {
      throw Error("plateau candidates must not be composite policies");
    }
  }
}

void PlateauController::begin(Iter budget) {
  check_plateau_config(cfg_, budget);
  for (const auto &p : policies_) require_valid(p, budget);
  check_policy_order(policies_, budget);
  for (auto &p : policies_) p = bind_budget(p, budget);
  budget_ = budget;
  index_ = start_;
  segment_start_ = 0;
  history_.clear();
  switches_.clear();
}

double PlateauController::lr(Iter t) {
  return eval_lr(policies_[static_cast<std::size_t>(index_ - 1)], t - segment_start_, budget_);
}

void PlateauController::observe(Iter t, double train_loss, const Metrics *evaluation) {
  double m = train_loss;
  if (cfg_.monitored == Monitored::VAL_LOSS) {
    if (!evaluation) return;
    m = evaluation->loss;
  }
  const Action action = is_trapped_on_plateau_action(history_, m, t, budget_, cfg_);
  history_.push_back(m);
  const int n = static_cast<int>(policies_.size());
  int next = index_;
  if (action == Action::INCREASE) next = std::max(1, index_ - 1);
  if (action == Action::DECREASE) next = std::min(n, index_ + 1);
  if (next != index_ && t + 1 < budget_) {
    switches_.push_back({t + 1, index_, next});
    index_ = next;
    segment_start_ = t + 1;
    history_.clear();
  }
}

Policy PlateauController::realized_policy() const {
  const auto &first = policies_[static_cast<std::size_t>(start_ - 1)];
  if (switches_.empty()) return first;
  Composite c;
  Iter start = 0;
  int active = start_;
  for (const auto &s : switches_) {
    c.segments.push_back({start, s.t, to_base(policies_[static_cast<std::size_t>(active - 1)])});
    start = s.t;
    active = s.to;
  }
  c.segments.push_back({start, budget_, to_base(policies_[static_cast<std::size_t>(active - 1)])});
  return c;
}

TrialRecord change_lr_on_plateau(const Task &task, const std::vector<Policy> &policies,
                                 int start_index, const TrainConfig &train_cfg,
                                 const PlateauConfig &cfg) {
  PlateauController controller(policies, start_index, cfg);
  return train(task, controller, train_cfg);
}

// ---------------------------------------------------------------------------
// Range test

std::vector<double> grid_values(const RangeGrid &grid) {
  if (!(grid.lo < grid.hi)) throw Error("range grid needs lo < hi");
  if (grid.points < 4) throw Error("range grid needs at least 4 points");
  if (!(grid.lo > 0.0)) throw Error("range grid needs lo > 0");
  std::vector<double> out;
  const int last = grid.points - 1;
  for (int i = 0; i <= last; ++i) {
    const double f = static_cast<double>(i) / last;
    out.push_back(grid.log_spaced ? grid.lo * std::pow(grid.hi / grid.lo, f)
                                  : grid.lo + (grid.hi - grid.lo) * f);
  }
  out.front() = grid.lo;
  out.back() = grid.hi;
  return out;
}

std::pair<double, double> recommend_range(std::span<const double> lr_grid,
                                          std::span<const double> acc) {
  if (lr_grid.size() != acc.size() || lr_grid.empty()) {
    throw Error("range recommendation needs one accuracy per grid point");
  }
  const std::size_t n = lr_grid.size();
  const std::size_t best =
      static_cast<std::size_t>(std::max_element(acc.begin(), acc.end()) - acc.begin());
  const double peak = acc[best];
  std::size_t up = best, down = best;
  while (up + 1 < n && acc[up + 1] >= peak - kRangeUpperDrop) ++up;
  while (down > 0 && acc[down - 1] >= peak - kRangeLowerDrop) --down;
  if (up != down) return {lr_grid[down], lr_grid[up]};
  const double lo = best > 0 ? std::sqrt(lr_grid[best - 1] * lr_grid[best]) : lr_grid[best];
  const double hi = best + 1 < n ? std::sqrt(lr_grid[best] * lr_grid[best + 1]) : lr_grid[best];
  return {lo, hi};
}

RangeTestResult lr_range_test(const Task &task, const RangeGrid &grid,
                              const std::vector<double> &budget_epochs, const TrainConfig &base,
                              int workers) {
  if (!task.has_accuracy()) throw Error("range test needs a task with an accuracy metric");
  if (budget_epochs.empty()) throw Error("range test needs at least one budget");
  RangeTestResult result;
  result.lr_grid = grid_values(grid);
  result.budgets = budget_epochs;
  std::sort(result.budgets.begin(), result.budgets.end());
  for (double e : result.budgets) {
    if (!(e > 0.0)) throw Error("range test budgets must be positive epoch counts");
  }

  std::vector<std::function<TrialRecord()>> jobs;
  for (double lr : result.lr_grid) {
    for (double epochs : result.budgets) {
      TrainConfig cfg = base;
      cfg.budget_iters = task.iterations_for_epochs(epochs);
      cfg.eval_every = 0;
      jobs.push_back([&task, lr, cfg] { return train(task, Fix{lr}, cfg); });
    }
  }
  result.records = run_trials(jobs, workers);

  const std::size_t nb = result.budgets.size();
  bool any_ok = false;
  for (std::size_t i = 0; i < result.lr_grid.size(); ++i) {
    result.acc.emplace_back();
    result.diverged.emplace_back();
    for (std::size_t j = 0; j < nb; ++j) {
      const auto &rec = result.records[i * nb + j];
      const bool bad = rec.diverged || rec.series.empty() || !rec.series.back().top1;
      result.diverged[i].push_back(bad);
      result.acc[i].push_back(bad ? 0.0 : *rec.series.back().top1);
      any_ok = any_ok || !bad;
    }
  }
  if (!any_ok) throw Error("range test: every trial diverged");

  std::vector<double> column;
  for (const auto &row : result.acc) column.push_back(row.back());
  std::tie(result.lr_min, result.lr_max) = recommend_range(result.lr_grid, column);
  return result;
}

std::string range_test_csv(const RangeTestResult &result) {
  std::string out = "lr,budget_epochs,top1\n";
  char buf[96];
  for (std::size_t i = 0; i < result.lr_grid.size(); ++i) {
    for (std::size_t j = 0; j < result.budgets.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", result.lr_grid[i], result.budgets[j],
                    result.acc[i][j]);
      out += buf;
    }
  }
  return out;
}

json range_test_to_json(const RangeTestResult &result, bool stable) {
  json diverged = json::array();
  for (const auto &row : result.diverged) diverged.push_back(std::vector<bool>(row));
  json doc = {{"lr_grid", result.lr_grid},
              {"budgets_epochs", result.budgets},
              {"acc", result.acc},
              {"diverged", diverged},
              {"recommended", {{"lr_min", result.lr_min}, {"lr_max", result.lr_max}}}};
  if (!stable) {
    double total = 0.0;
    for (const auto &r : result.records) total += r.wall_ms;
    doc["metadata"] = {{"wall_ms", total}};
  }
  return doc;
}

double search_volume_reduction(const RangeTestResult &result, double lo, double hi) {
  return 1.0 - (result.lr_max - result.lr_min) / (hi - lo);
}

// ---------------------------------------------------------------------------
// Enumeration and search

namespace {

std::vector<double> log_points(double lo, double hi, int points) {
  if (points <= 1) return {std::sqrt(lo * hi)};
  std::vector<double> out;
  for (int i = 0; i < points; ++i) {
    out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1)));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

// gamma with gamma^budget = 0.05, used by the exponential families
double budget_decay(Iter budget) { return std::pow(0.05, 1.0 / static_cast<double>(budget)); }

std::vector<Iter> nstep_boundaries(Iter budget) {
  const Iter a = std::max<Iter>(1, budget * 6 / 10);
  const Iter b = std::max<Iter>(a + 1, budget * 85 / 100);
  return {a, b};
}

void check_space(const SearchSpace &space) {
  if (!(space.lr_min > 0.0 && space.lr_min < space.lr_max)) {
    throw Error("search space needs 0 < lr_min < lr_max");
  }
  if (space.families.empty()) throw Error("search space has no policy families");
}

Policy decaying(const std::string &family, double k, Iter budget) {
  if (family == "FIX") return Fix{k};
  if (family == "STEP") return Step{k, 0.5, std::max<Iter>(1, budget / 4)};
  if (family == "NSTEP") return NStep{k, 0.1, nstep_boundaries(budget)};
  if (family == "EXP") return Exp{k, budget_decay(budget)};
  if (family == "INV") return Inv{k, 10.0 / static_cast<double>(budget), 0.75};
  if (family == "POLY") return Poly{k, 1.2, {}};
  throw Error("unknown policy family '" + family + "'");
}

} // namespace

std::vector<Policy> enumerate_grid(const SearchSpace &space, Iter budget) {
  check_space(space);
  if (budget < 1) throw Error("budget must be >= 1");
  const auto rates = log_points(space.lr_min, space.lr_max, space.points);
  std::vector<Iter> halves = space.half_cycles;
  if (halves.empty()) halves.push_back(std::max<Iter>(1, budget / 8));
  std::vector<Policy> out;
  for (const auto &family : space.families) {
    const auto kind = cyclic_kind_from_name(family);
    if (!kind) {
      for (double k : rates) out.push_back(decaying(family, k, budget));
      continue;
    }
    std::optional<double> gamma;
    if (is_exp_kind(*kind)) gamma = budget_decay(budget);
    for (double k1 : rates) {
      if (k1 <= space.lr_min && rates.size() > 1) continue;
      for (Iter l : halves) out.push_back(Cyclic{*kind, space.lr_min, k1, l, gamma});
    }
  }
  return out;
}

std::vector<Policy> sample_policies(const SearchSpace &space, Iter budget, std::size_t n_samples,
                                    std::uint64_t seed) {
  check_space(space);
  if (n_samples == 0) throw Error("random search needs n_samples >= 1");
  Rng rng(stream_key(seed, 0x5a3c));
  const double log_lo = std::log(space.lr_min), log_hi = std::log(space.lr_max);
  auto rate = [&] { return std::exp(rng.uniform(log_lo, log_hi)); };
  auto span = [&](Iter lo, Iter hi) {
    lo = std::max<Iter>(1, lo);
    hi = std::max(lo, hi);
    return lo + static_cast<Iter>(rng.below(static_cast<std::size_t>(hi - lo + 1)));
  };
  std::vector<Policy> out;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto &family = space.families[rng.below(space.families.size())];
    if (const auto kind = cyclic_kind_from_name(family)) {
      double a = rate(), b = rate();
      if (a > b) std::swap(a, b);
      std::optional<double> gamma;
      if (is_exp_kind(*kind)) gamma = std::pow(rng.uniform(0.01, 0.5), 1.0 / budget);
      out.push_back(Cyclic{*kind, a, b, span(budget / 20, budget / 4), gamma});
    } else if (family == "STEP") {
      out.push_back(Step{rate(), rng.uniform(0.1, 0.9), span(budget / 10, budget / 2)});
    } else if (family == "NSTEP") {
      Iter a = span(budget / 4, budget - 2), b = span(budget / 4, budget - 1);
      if (a > b) std::swap(a, b);
      if (a == b) ++b;
      out.push_back(NStep{rate(), rng.uniform(0.05, 0.5), {a, b}});
    } else if (family == "EXP") {
      out.push_back(Exp{rate(), std::pow(rng.uniform(0.01, 0.5), 1.0 / budget)});
    } else if (family == "INV") {
      out.push_back(Inv{rate(), rng.uniform(1.0, 100.0) / budget, rng.uniform(0.5, 1.5)});
    } else if (family == "POLY") {
      out.push_back(Poly{rate(), rng.uniform(0.5, 2.0), {}});
    } else {
      out.push_back(decaying(family, rate(), budget));
    }
  }
  return out;
}

std::vector<TrialRecord> grid_search(const Task &task, const std::vector<Policy> &candidates,
                                     const std::vector<std::uint64_t> &seeds,
                                     const TrainConfig &base, int workers) {
  if (candidates.empty()) throw Error("search has no candidates");
  if (seeds.empty()) throw Error("search needs at least one seed");
  for (const auto &p : candidates) require_valid(p, base.budget_iters);
  std::vector<std::function<TrialRecord()>> jobs;
  for (const auto &p : candidates) {
    for (auto seed : seeds) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      jobs.push_back([&task, p, cfg] { return train(task, p, cfg); });
    }
  }
  return run_trials(jobs, workers);
}

std::vector<TrialRecord> random_search(const Task &task, const SearchSpace &space,
                                       std::size_t n_samples, std::uint64_t seed,
                                       const std::vector<std::uint64_t> &seeds,
                                       const TrainConfig &base, int workers) {
  return grid_search(task, sample_policies(space, base.budget_iters, n_samples, seed), seeds,
                     base, workers);
}

// ---------------------------------------------------------------------------
// Ranking

std::string rank_metric_name(const RankMetric &metric) {
  switch (metric.kind) {
  case RankKind::PEAK_TOP1:
    return "peak_top1";
  case RankKind::FINAL_LOSS:
    return "final_loss";
  case RankKind::ITERS_TO_TARGET: {
    char buf[64];
    std::snprintf(buf, sizeof buf, "iters_to_target:%.17g", metric.target);
    return buf;
  }
  }
  return "?";
}

RankMetric rank_metric_from_name(std::string_view name) {
  if (name == "peak_top1") return {RankKind::PEAK_TOP1, 0.0};
  if (name == "final_loss") return {RankKind::FINAL_LOSS, 0.0};
  constexpr std::string_view prefix = "iters_to_target:";
  if (name.substr(0, prefix.size()) == prefix) {
    const std::string rest(name.substr(prefix.size()));
    std::size_t pos = 0;
    double target = 0.0;
    try {
      target = std::stod(rest, &pos);
    } catch (const std::exception &) {
      pos = 0;
    }
    if (pos == 0 || pos != rest.size()) throw Error("bad target in metric '" + std::string(name) + "'");
    return {RankKind::ITERS_TO_TARGET, target};
  }
  throw Error("unknown metric '" + std::string(name) +
              "' (expected peak_top1, final_loss or iters_to_target:<acc>)");
}

std::optional<double> metric_value(const TrialRecord &record, const RankMetric &metric) {
  switch (metric.kind) {
  case RankKind::PEAK_TOP1:
    return record.peak_top1;
  case RankKind::FINAL_LOSS:
    if (record.diverged || !std::isfinite(record.final_loss)) return std::nullopt;
    return record.final_loss;
  case RankKind::ITERS_TO_TARGET:
    if (const auto it = iterations_to_target(record, metric.target)) {
      return static_cast<double>(*it);
    }
    return std::nullopt;
  }
  return std::nullopt;
}

namespace {

// True when a ranks strictly before b on the metric alone.
bool better(const std::optional<double> &a, const std::optional<double> &b, RankKind kind) {
  if (a && !b) return true;
  if (!a) return false;
  return kind == RankKind::PEAK_TOP1 ? *a > *b : *a < *b;
}

} // namespace

std::vector<Ranked> rank_policies(std::span<const TrialRecord> records, const RankMetric &metric) {
  struct Key {
    std::optional<double> value;
    std::string policy;
    std::uint64_t seed;
    std::string doc;
  };
  std::vector<Key> keys;
  for (const auto &r : records) {
    keys.push_back({metric_value(r, metric), serialize_policy(r.policy), r.seed, {}});
  }
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto doc_of = [&](std::size_t i) -> const std::string & {
    if (keys[i].doc.empty()) keys[i].doc = record_to_json(records[i], true).dump();
    return keys[i].doc;
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto &ka = keys[a], &kb = keys[b];
    if (better(ka.value, kb.value, metric.kind)) return true;
    if (better(kb.value, ka.value, metric.kind)) return false;
    if (ka.policy != kb.policy) return ka.policy < kb.policy;
    if (ka.seed != kb.seed) return ka.seed < kb.seed;
    return doc_of(a) < doc_of(b);
  });
  std::vector<Ranked> out;
  for (auto i : order) out.push_back({i, keys[i].value});
  return out;
}

std::vector<CandidateScore> rank_candidates(std::span<const TrialRecord> records,
                                            const RankMetric &metric) {
  std::map<std::string, CandidateScore> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto key = serialize_policy(records[i].policy);
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) it->second.policy = records[i].policy;
    it->second.records.push_back(i);
  }
  std::vector<std::pair<std::string, CandidateScore>> out;
  for (auto &[key, score] : groups) {
    double sum = 0.0;
    bool reached = true;
    for (auto i : score.records) {
      const auto v = metric_value(records[i], metric);
      if (!v) {
        reached = false;
        break;
      }
      sum += *v;
    }
    if (reached) score.mean = sum / static_cast<double>(score.records.size());
    out.emplace_back(key, std::move(score));
  }
  std::stable_sort(out.begin(), out.end(), [&](const auto &a, const auto &b) {
    if (better(a.second.mean, b.second.mean, metric.kind)) return true;
    if (better(b.second.mean, a.second.mean, metric.kind)) return false;
    return a.first < b.first;
  });
  std::vector<CandidateScore> scores;
  for (auto &entry : out) scores.push_back(std::move(entry.second));
  return scores;
}

// ---------------------------------------------------------------------------
// Staged composition

Policy compose_staged_policy(const std::vector<Stage> &stages) {
  if (stages.empty()) throw Error("staged policy needs at least one stage");
  Composite c;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto &s = stages[i];
    if (i > 0 && s.start != stages[i - 1].end) {
      throw Error(std::string(s.start < stages[i - 1].end ? "overlap" : "gap") + " between stage " +
                  std::to_string(i - 1) + " (end " + std::to_string(stages[i - 1].end) +
                  ") and stage " + std::to_string(i) + " (start " + std::to_string(s.start) + ")");
    }
    c.segments.push_back({s.start, s.end, Cyclic{s.kind, s.k0, s.k1, s.l, s.gamma}});
  }
  require_valid(c, stages.back().end);
  return c;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

json trial_summary(const TrialRecord &r) {
  json doc = record_to_json(r, true);
  doc.erase("lr_trace");
  doc.erase("snapshots");
  return doc;
}

json ranking_json(const std::vector<CandidateScore> &ranking) {
  json out = json::array();
  for (const auto &c : ranking) {
    out.push_back({{"policy", policy_to_json(c.policy)},
                   {"mean", c.mean ? json(*c.mean) : json("unreached")},
                   {"trials", c.records}});
  }
  return out;
}

} // namespace

TuningReport explore_and_exploit(const Task &task, std::string strategy,
                                 const std::vector<Policy> &candidates,
                                 const std::vector<std::uint64_t> &seeds, const TrainConfig &base,
                                 const SearchPlan &plan, int workers) {
  TuningReport report;
  report.strategy = std::move(strategy);
  report.metric = plan.metric;
  report.candidates = candidates;
  const bool two_stage = plan.explore_budget > 0 && plan.explore_budget < base.budget_iters;
  TrainConfig explore = base;
  if (two_stage) explore.budget_iters = plan.explore_budget;
  report.records = grid_search(task, candidates, seeds, explore, workers);
  report.ranking = rank_candidates(report.records, plan.metric);
  if (two_stage) {
    std::vector<Policy> top;
    for (std::size_t i = 0; i < std::min(plan.top_k, report.ranking.size()); ++i) {
      top.push_back(report.ranking[i].policy);
    }
    report.reruns = grid_search(task, top, seeds, base, workers);
    report.final_ranking = rank_candidates(report.reruns, plan.metric);
  } else {
    report.final_ranking = report.ranking;
  }
  report.recommended = report.final_ranking.front().policy;
  return report;
}

json tuning_report_to_json(const TuningReport &report, bool stable) {
  json candidates = json::array();
  for (const auto &p : report.candidates) candidates.push_back(policy_to_json(p));
  json records = json::array();
  for (const auto &r : report.records) records.push_back(trial_summary(r));
  json reruns = json::array();
  for (const auto &r : report.reruns) reruns.push_back(trial_summary(r));
  json doc = {{"strategy", report.strategy},
              {"metric", rank_metric_name(report.metric)},
              {"candidates", std::move(candidates)},
              {"records", std::move(records)},
              {"ranking", ranking_json(report.ranking)},
              {"reruns", std::move(reruns)},
              {"final_ranking", ranking_json(report.final_ranking)},
              {"recommended", policy_to_json(report.recommended)}};
  if (!stable) {
    double total = 0.0;
    for (const auto &r : report.records) total += r.wall_ms;
    for (const auto &r : report.reruns) total += r.wall_ms;
    doc["metadata"] = {{"wall_ms", total}};
  }
  return doc;
}

} // namespace lrpolicy
