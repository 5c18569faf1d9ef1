// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrpolicy/train.hpp"

namespace lrpolicy {

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

/// Runs every job on up to `workers` threads and returns results in job
/// order. The first exception (by job index) is rethrown after all jobs end.
std::vector<TrialRecord> run_trials(const std::vector<std::function<TrialRecord()>> &jobs,
                                    int workers);

// ---------------------------------------------------------------------------
// Plateau-driven composition
// ---------------------------------------------------------------------------

enum class Monitored { TRAIN_LOSS, VAL_LOSS };

struct PlateauConfig {
  Iter patience = 5;
  double min_delta = 0.05;
  Monitored monitored = Monitored::TRAIN_LOSS;
  Iter warmup = 0;
  double phase_split = 0.7;
};

/// Throws lrpolicy::Error for out-of-range fields or warmup >= budget.
void check_plateau_config(const PlateauConfig &cfg, Iter budget);

enum class Action { NONE, INCREASE, DECREASE };
std::string_view action_name(Action a);

/// Plateau test on the monitored history plus the newest value m. Trapped
/// means at least `patience` earlier observations and none of the last
/// `patience` consecutive improvements exceeds min_delta.
Action is_trapped_on_plateau_action(std::span<const double> history, double m, Iter t,
                                    Iter budget, const PlateauConfig &cfg);

/// Live controller over ordered policies p1 >= p2 >= ... >= pn (1-based
/// index). The active policy runs on a clock that restarts at each switch,
/// so the realised schedule replays exactly as a COMPOSITE.
class PlateauController final : public Controller {
public:
  PlateauController(std::vector<Policy> policies, int start_index, PlateauConfig cfg);

  void begin(Iter budget) override;
  double lr(Iter t) override;
  void observe(Iter t, double train_loss, const Metrics *evaluation) override;
  Policy realized_policy() const override;
  std::vector<PolicySwitch> switches() const override { return switches_; }

  int index() const { return index_; }

private:
  std::vector<Policy> policies_;
  int start_;
  PlateauConfig cfg_;
  Iter budget_ = 0;
  int index_ = 1;
  Iter segment_start_ = 0;
  std::vector<double> history_;
  std::vector<PolicySwitch> switches_;
};

/// Pointwise p[i](t) >= p[i+1](t) on 64 evenly spaced t in [0, budget).
/// Throws lrpolicy::Error naming the first violating pair.
void check_policy_order(const std::vector<Policy> &policies, Iter budget);

TrialRecord change_lr_on_plateau(const Task &task, const std::vector<Policy> &policies,
                                 int start_index, const TrainConfig &train_cfg,
                                 const PlateauConfig &cfg);

// ---------------------------------------------------------------------------
// Range test
// ---------------------------------------------------------------------------

struct RangeGrid {
  double lo = 1e-4;
  double hi = 1.0;
  int points = 13;
  bool log_spaced = true;
};

std::vector<double> grid_values(const RangeGrid &grid);

/// Drop from the peak tolerated on the high and the low side.
inline constexpr double kRangeUpperDrop = 0.02;
inline constexpr double kRangeLowerDrop = 0.05;

struct RangeTestResult {
  std::vector<double> lr_grid;
  std::vector<double> budgets;            ///< epochs
  std::vector<std::vector<double>> acc;   ///< acc[i][j]: lr_grid[i], budgets[j]
  std::vector<std::vector<bool>> diverged;
  double lr_min = 0.0;
  double lr_max = 0.0;
  std::vector<TrialRecord> records;       ///< row-major over (lr, budget)
};

/// Recommendation from one accuracy column: contiguous walk from the
/// (first) argmax while accuracy stays within the drops above. A single
/// point widens to the geometric midpoints of its neighbours.
std::pair<double, double> recommend_range(std::span<const double> lr_grid,
                                          std::span<const double> acc);

/// One FIX trial per (grid point, budget). Final top-1 is the score and a
/// diverged trial scores 0. Throws when every trial diverged.
RangeTestResult lr_range_test(const Task &task, const RangeGrid &grid,
                              const std::vector<double> &budget_epochs,
                              const TrainConfig &base, int workers = 1);

std::string range_test_csv(const RangeTestResult &result);
nlohmann::json range_test_to_json(const RangeTestResult &result, bool stable = false);

/// 1 - (lr_max - lr_min) / (hi - lo): share of the linear search interval
/// removed by the recommendation.
double search_volume_reduction(const RangeTestResult &result, double lo, double hi);

// ---------------------------------------------------------------------------
// Candidate enumeration and search
// ---------------------------------------------------------------------------

/// Policy templates confined to [lr_min, lr_max]. Shape parameters that the
/// range test does not inform are tied to the budget.
struct SearchSpace {
  std::vector<std::string> families = {"FIX", "NSTEP", "TRI", "SIN2", "COS"};
  double lr_min = 1e-3;
  double lr_max = 1e-1;
  int points = 3;                 ///< rate values per axis (log-spaced)
  std::vector<Iter> half_cycles;  ///< empty: budget / 8
};

std::vector<Policy> enumerate_grid(const SearchSpace &space, Iter budget);
std::vector<Policy> sample_policies(const SearchSpace &space, Iter budget, std::size_t n_samples,
                                    std::uint64_t seed);

/// One record per candidate per seed, candidate-major. Throws on an empty
/// candidate list or seed list.
std::vector<TrialRecord> grid_search(const Task &task, const std::vector<Policy> &candidates,
                                     const std::vector<std::uint64_t> &seeds,
                                     const TrainConfig &base, int workers = 1);

/// n_samples candidates drawn from `space` with `seed`, then as grid_search.
std::vector<TrialRecord> random_search(const Task &task, const SearchSpace &space,
                                       std::size_t n_samples, std::uint64_t seed,
                                       const std::vector<std::uint64_t> &seeds,
                                       const TrainConfig &base, int workers = 1);

// ---------------------------------------------------------------------------
// Ranking
// ---------------------------------------------------------------------------

enum class RankKind { PEAK_TOP1, FINAL_LOSS, ITERS_TO_TARGET };

struct RankMetric {
  RankKind kind = RankKind::PEAK_TOP1;
  double target = 0.0;  ///< ITERS_TO_TARGET only
};

std::string rank_metric_name(const RankMetric &metric);
/// "peak_top1", "final_loss", "iters_to_target:<target>".
RankMetric rank_metric_from_name(std::string_view name);

/// Metric value of one record; nullopt means unreached (or missing).
std::optional<double> metric_value(const TrialRecord &record, const RankMetric &metric);

struct Ranked {
  std::size_t index = 0;         ///< position in the input
  std::optional<double> value;   ///< nullopt ranks last ("unreached")
};

/// Best first: descending accuracy, ascending loss or iterations. Ties break
/// on the serialized policy, then seed, then the stable record document.
std::vector<Ranked> rank_policies(std::span<const TrialRecord> records, const RankMetric &metric);

/// Per-candidate mean over seeds, in the same best-first order. Records
/// are grouped by serialized policy; a candidate with any unreached seed is
/// unreached.
struct CandidateScore {
  Policy policy;
  std::optional<double> mean;
  std::vector<std::size_t> records;
};
std::vector<CandidateScore> rank_candidates(std::span<const TrialRecord> records,
                                            const RankMetric &metric);

// ---------------------------------------------------------------------------
// Staged composition
// ---------------------------------------------------------------------------

struct Stage {
  Iter start = 0;
  Iter end = 0;
  CyclicKind kind = CyclicKind::TRI;
  double k0 = 0.0;
  double k1 = 0.0;
  Iter l = 0;
  std::optional<double> gamma;
};

/// Validated COMPOSITE over [first start, last end). Throws on gaps,
/// overlaps or invalid stage parameters.
Policy compose_staged_policy(const std::vector<Stage> &stages);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct TuningReport {
  std::string strategy;
  RankMetric metric;
  std::vector<Policy> candidates;
  std::vector<TrialRecord> records;        ///< exploration trials
  std::vector<CandidateScore> ranking;     ///< over `records`
  std::vector<TrialRecord> reruns;         ///< full-budget trials of the top K
  std::vector<CandidateScore> final_ranking;
  Policy recommended;
};

struct SearchPlan {
  Iter explore_budget = 0;  ///< 0: same as the full budget (no reruns)
  std::size_t top_k = 3;
  RankMetric metric;
};

/// Breadth then depth: every candidate over every seed at the exploration
/// budget, then the top K again at the full budget (base.budget_iters).
TuningReport explore_and_exploit(const Task &task, std::string strategy,
                                 const std::vector<Policy> &candidates,
                                 const std::vector<std::uint64_t> &seeds, const TrainConfig &base,
                                 const SearchPlan &plan, int workers = 1);

nlohmann::json tuning_report_to_json(const TuningReport &report, bool stable = false);

} // namespace lrpolicy
