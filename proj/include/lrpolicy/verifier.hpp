// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrpolicy/policy_db.hpp"
#include "lrpolicy/train.hpp"
#include "lrpolicy/tuner.hpp"

namespace lrpolicy {

// ---------------------------------------------------------------------------
// M-opt estimate
// ---------------------------------------------------------------------------

struct MOptEstimate {
  Iter t = 0;                     ///< iteration of the first snapshot
  double applied_lr = 0.0;
  std::optional<double> m_opt;    ///< nullopt: singular
  bool singular() const { return !m_opt; }
};

/// applied_lr * |theta1 - theta0|_1 / |2 theta1 - theta0 - theta2|_1.
/// Singular when the denominator is below 1e-12 * max(1, |theta1 - theta0|_1).
/// Throws lrpolicy::Error on a length mismatch or applied_lr <= 0.
MOptEstimate m_opt_lr(std::span<const double> theta0, std::span<const double> theta1,
                      std::span<const double> theta2, double applied_lr, Iter t = 0);

/// Trains with snapshot stride `stride` and estimates from every consecutive
/// snapshot triple, using the rate applied at the first update after the
/// middle snapshot (read from the record's lr_trace). Throws when
/// budget < 3 * stride or stride < 1.
std::vector<MOptEstimate> m_opt_trace(const Task &task, const Policy &policy,
                                      const TrainConfig &config, Iter stride);
std::vector<MOptEstimate> m_opt_from_record(const TrialRecord &record);

/// "t,applied_lr,m_opt,singular"; m_opt is empty when singular.
std::string m_opt_csv(const std::vector<MOptEstimate> &trace);

// ---------------------------------------------------------------------------
// Three-phase verification
// ---------------------------------------------------------------------------

struct VerifyConfig {
  double target_top1 = 0.9;
  std::size_t top_n = 3;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  TrainConfig train;               ///< budget, optimizer; seed is overridden
  RangeGrid range_grid;
  std::vector<double> range_budgets = {1, 3};  ///< epochs
  int workers = 1;
};

struct ScoredPolicy {
  Policy policy;
  std::optional<double> mean_top1;  ///< mean peak top-1 over the seeds
};

struct Verdict {
  int phase_reached = 1;
  bool verified = false;
  std::optional<Policy> replacement;
  ScoredPolicy candidate;
  std::optional<double> replacement_top1;
  std::vector<ScoredPolicy> db_candidates;   ///< phase 2, retrained here
  std::optional<RangeTestResult> range;      ///< phase 3
  std::vector<ScoredPolicy> generated;       ///< phase 3 grid
  std::vector<TrialRecord> evidence;         ///< every trial consulted
  double target_top1 = 0.0;
};

/// Phase 1 trains the candidate on every seed and verifies it when its mean
/// peak top-1 reaches the target. Phase 2 retrains the top-N stored policies
/// for the task's key on the same seeds; a strictly better one becomes the
/// replacement. Phase 3 runs when neither the candidate nor a stored policy
/// reaches the target: a range test, then a small grid inside the
/// recommended range; the best of it replaces the candidate when strictly
/// better.
Verdict verify_policy(const Policy &candidate, const Task &task, const PolicyDb &db,
                      const VerifyConfig &config);

/// Decision label: "verified", "verified_with_better", "replaced" or
/// "unverified".
std::string verdict_decision(const Verdict &verdict);
nlohmann::json verdict_to_json(const Verdict &verdict, bool stable = false);

} // namespace lrpolicy
