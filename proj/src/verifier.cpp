// SPDX-License-Identifier: Apache-2.0
#include "lrpolicy/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "lrpolicy/error.hpp"
#include "lrpolicy/json_io.hpp"

namespace lrpolicy {

using nlohmann::json;

MOptEstimate m_opt_lr(std::span<const double> theta0, std::span<const double> theta1,
                      std::span<const double> theta2, double applied_lr, Iter t) {
  if (theta0.size() != theta1.size() || theta1.size() != theta2.size()) {
    throw Error("m-opt snapshots differ in length");
  }
  if (!(applied_lr > 0.0) || !std::isfinite(applied_lr)) {
    throw Error("m-opt needs a positive applied learning rate");
  }
  double step = 0.0, bend = 0.0;
  for (std::size_t j = 0; j < theta0.size(); ++j) {
    step += std::fabs(theta1[j] - theta0[j]);
    bend += std::fabs(2.0 * theta1[j] - theta0[j] - theta2[j]);
  }
  MOptEstimate e;
  e.t = t;
  e.applied_lr = applied_lr;
  if (bend >= 1e-12 * std::max(1.0, step) && std::isfinite(bend)) {
    e.m_opt = applied_lr * step / bend;
    if (!(*e.m_opt > 0.0) || !std::isfinite(*e.m_opt)) e.m_opt.reset();
  }
  return e;
}

std::vector<MOptEstimate> m_opt_from_record(const TrialRecord &record) {
  const auto &snaps = record.snapshots;
  const auto &pts = record.lr_trace.points;
  std::vector<MOptEstimate> out;
  for (std::size_t i = 0; i + 2 < snaps.size(); ++i) {
    const Iter mid = snaps[i + 1].t;
    const auto it = std::lower_bound(pts.begin(), pts.end(), mid,
                                     [](const SchedulePoint &p, Iter t) { return p.t < t; });
    if (it == pts.end() || it->t != mid) break;
    out.push_back(m_opt_lr(snaps[i].theta, snaps[i + 1].theta, snaps[i + 2].theta, it->lr,
                           snaps[i].t));
  }
  return out;
}

std::vector<MOptEstimate> m_opt_trace(const Task &task, const Policy &policy,
                                      const TrainConfig &config, Iter stride) {
  if (stride < 1) throw Error("m-opt snapshot stride must be >= 1");
  if (config.budget_iters < 3 * stride) {
    throw Error("m-opt needs budget >= 3 * stride (budget " + std::to_string(config.budget_iters) +
                ", stride " + std::to_string(stride) + ")");
  }
  TrainConfig cfg = config;
  cfg.snapshot_stride = stride;
  return m_opt_from_record(train(task, policy, cfg));
}

std::string m_opt_csv(const std::vector<MOptEstimate> &trace) {
  std::string out = "t,applied_lr,m_opt,singular\n";
  char buf[128];
  for (const auto &e : trace) {
    if (e.m_opt) {
      std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,0\n", static_cast<long long>(e.t),
                    e.applied_lr, *e.m_opt);
    } else {
      std::snprintf(buf, sizeof buf, "%lld,%.17g,,1\n", static_cast<long long>(e.t), e.applied_lr);
    }
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verification

namespace {

bool strictly_better(const std::optional<double> &a, const std::optional<double> &b) {
  return a && (!b || *a > *b);
}

bool meets(const std::optional<double> &v, double target) { return v && *v >= target; }

// Trains each policy on every seed and scores it by mean peak top-1.
std::vector<ScoredPolicy> score(const Task &task, const std::vector<Policy> &policies,
                                const VerifyConfig &cfg, std::vector<TrialRecord> &evidence) {
  if (policies.empty()) return {};
  const auto records = grid_search(task, policies, cfg.seeds, cfg.train, cfg.workers);
  const std::size_t per = cfg.seeds.size();
  std::vector<ScoredPolicy> out;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    double sum = 0.0;
    bool reached = true;
    for (std::size_t s = 0; s < per; ++s) {
      const auto &r = records[i * per + s];
      if (!r.peak_top1) {
        reached = false;
        continue;
      }
      sum += *r.peak_top1;
    }
    out.push_back({policies[i], reached ? std::optional(sum / static_cast<double>(per))
                                        : std::nullopt});
  }
  evidence.insert(evidence.end(), records.begin(), records.end());
  return out;
}

// First strictly best entry (ties keep the earlier, higher-ranked one).
const ScoredPolicy *best_of(const std::vector<ScoredPolicy> &scored) {
  const ScoredPolicy *best = nullptr;
  for (const auto &s : scored) {
    if (!best || strictly_better(s.mean_top1, best->mean_top1)) best = &s;
  }
  return best;
}

std::vector<Policy> phase3_grid(double lo, double hi, Iter budget) {
  std::vector<Policy> out{Fix{lo}, Fix{std::sqrt(lo * hi)}, Fix{hi}};
  const Iter l = std::max<Iter>(1, budget / 8);
  for (auto kind : {CyclicKind::TRI, CyclicKind::SIN2, CyclicKind::COS}) {
    out.push_back(Cyclic{kind, lo, hi, l, {}});
  }
  return out;
}

json scored_json(const ScoredPolicy &s) {
  return {{"policy", policy_to_json(s.policy)},
          {"mean_top1", s.mean_top1 ? json(*s.mean_top1) : json(nullptr)}};
}

} // namespace

Verdict verify_policy(const Policy &candidate, const Task &task, const PolicyDb &db,
                      const VerifyConfig &config) {
  if (!task.has_accuracy()) throw Error("verification needs a task with an accuracy metric");
  if (config.top_n < 1) throw Error("verification needs top_n >= 1");
  if (config.seeds.empty()) throw Error("verification needs at least one seed");
  require_valid(candidate, config.train.budget_iters);

  Verdict v;
  v.target_top1 = config.target_top1;

  // Phase 1
  v.candidate = score(task, {candidate}, config, v.evidence).front();
  v.verified = meets(v.candidate.mean_top1, config.target_top1);

  // Phase 2
  DbKey key{task.id(), task.model_id(), std::string(optimizer_name(config.train.optimizer))};
  std::vector<Policy> stored;
  const std::string own = serialize_policy(candidate);
  for (const auto &e : db.top_n(key, {}, std::max<std::size_t>(config.top_n, 1) * 4)) {
    if (stored.size() == config.top_n) break;
    const std::string text = serialize_policy(e.policy);
    if (text == own) continue;
    if (std::any_of(stored.begin(), stored.end(),
                    [&](const Policy &p) { return serialize_policy(p) == text; })) {
      continue;
    }
    // stored under another budget: only policies valid for this one qualify
    if (!validate_policy(e.policy, config.train.budget_iters).empty()) continue;
    stored.push_back(e.policy);
  }
  if (!stored.empty()) {
    v.phase_reached = 2;
    v.db_candidates = score(task, stored, config, v.evidence);
    const auto *best = best_of(v.db_candidates);
    if (best && strictly_better(best->mean_top1, v.candidate.mean_top1)) {
      v.replacement = best->policy;
      v.replacement_top1 = best->mean_top1;
    }
  }
  if (v.verified || meets(v.replacement_top1, config.target_top1)) return v;

  // Phase 3
  v.phase_reached = 3;
  TrainConfig base = config.train;
  base.seed = config.seeds.front();
  v.range = lr_range_test(task, config.range_grid, config.range_budgets, base, config.workers);
  v.evidence.insert(v.evidence.end(), v.range->records.begin(), v.range->records.end());
  auto grid = phase3_grid(v.range->lr_min, v.range->lr_max, config.train.budget_iters);
  if (grid.empty()) throw Error("phase 3 produced no candidates");
  v.generated = score(task, grid, config, v.evidence);
  std::vector<ScoredPolicy> pool = v.generated;
  if (v.replacement) pool.push_back({*v.replacement, v.replacement_top1});
  const auto *best = best_of(pool);
  if (best && strictly_better(best->mean_top1, v.candidate.mean_top1)) {
    v.replacement = best->policy;
    v.replacement_top1 = best->mean_top1;
  }
  return v;
}

std::string verdict_decision(const Verdict &v) {
  if (v.verified) return v.replacement ? "verified_with_better" : "verified";
  return v.replacement ? "replaced" : "unverified";
}

json verdict_to_json(const Verdict &v, bool stable) {
  json db = json::array();
  for (const auto &s : v.db_candidates) db.push_back(scored_json(s));
  json generated = json::array();
  for (const auto &s : v.generated) generated.push_back(scored_json(s));
  json evidence = json::array();
  for (const auto &r : v.evidence) {
    json doc = record_to_json(r, true);
    doc.erase("lr_trace");
    doc.erase("snapshots");
    evidence.push_back(std::move(doc));
  }
  json doc = {{"phase_reached", v.phase_reached},
              {"verified", v.verified},
              {"decision", verdict_decision(v)},
              {"target_top1", v.target_top1},
              {"candidate", scored_json(v.candidate)},
              {"replacement", v.replacement ? policy_to_json(*v.replacement) : json(nullptr)},
              {"replacement_top1", v.replacement_top1 ? json(*v.replacement_top1) : json(nullptr)},
              {"db_candidates", std::move(db)},
              {"generated", std::move(generated)},
              {"evidence", std::move(evidence)}};
  if (v.range) doc["range_test"] = range_test_to_json(*v.range, true);
  if (!stable) {
    double total = 0.0;
    for (const auto &r : v.evidence) total += r.wall_ms;
    doc["metadata"] = {{"wall_ms", total}};
  }
  return doc;
}

} // namespace lrpolicy
