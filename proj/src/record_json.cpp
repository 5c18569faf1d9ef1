// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>

#include "lrpolicy/error.hpp"
#include "lrpolicy/json_io.hpp"
#include "lrpolicy/train.hpp"

namespace lrpolicy {

using nlohmann::json;

namespace {

// JSON has no NaN/Inf; non-finite values travel as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double real_or_nan(const json &v) {
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number()) throw ParseError("record: expected a number");
  return v.get<double>();
}

const json &field(const json &doc, const char *name) {
  const auto it = doc.find(name);
  if (it == doc.end()) throw ParseError(std::string("record: missing field '") + name + "'");
  return *it;
}

json hyper_to_json(const OptimizerHyper &h) {
  return {{"momentum", h.momentum}, {"beta1", h.beta1}, {"beta2", h.beta2}, {"epsilon", h.epsilon}};
}

OptimizerHyper hyper_from_json(const json &doc) {
  OptimizerHyper h;
  h.momentum = field(doc, "momentum").get<double>();
  h.beta1 = field(doc, "beta1").get<double>();
  h.beta2 = field(doc, "beta2").get<double>();
  h.epsilon = field(doc, "epsilon").get<double>();
  return h;
}

} // namespace

json record_to_json(const TrialRecord &r, bool stable) {
  json series = json::array();
  for (const auto &m : r.series) {
    json row = {{"iter", m.iteration}, {"loss", number(m.loss)}};
    row["top1"] = m.top1 ? json(*m.top1) : json(nullptr);
    if (!stable) row["wall_ms"] = m.wall_ms;
    series.push_back(std::move(row));
  }
  json trace = json::array();
  for (const auto &p : r.lr_trace.points) trace.push_back({p.t, p.lr});

  json doc = {
      {"task_id", r.task_id},
      {"model_id", r.model_id},
      {"policy", policy_to_json(r.policy)},
      {"optimizer", std::string(optimizer_name(r.optimizer))},
      {"hyper", hyper_to_json(r.hyper)},
      {"seed", r.seed},
      {"budget_iters", r.budget_iters},
      {"eval_every", r.eval_every},
      {"series", std::move(series)},
      {"peak_top1", r.peak_top1 ? json(*r.peak_top1) : json(nullptr)},
      {"iter_at_peak", r.iter_at_peak},
      {"final_loss", number(r.final_loss)},
      {"lr_trace", std::move(trace)},
      {"diverged", r.diverged},
  };
  if (!r.switches.empty()) {
    json sw = json::array();
    for (const auto &s : r.switches) sw.push_back({{"t", s.t}, {"from", s.from}, {"to", s.to}});
    doc["switches"] = std::move(sw);
  }
  if (!r.snapshots.empty()) {
    json snaps = json::array();
    for (const auto &s : r.snapshots) snaps.push_back({{"t", s.t}, {"theta", s.theta}});
    doc["snapshots"] = std::move(snaps);
  }
  if (!stable) doc["metadata"] = {{"wall_ms", r.wall_ms}};
  return doc;
}

TrialRecord record_from_json(const json &doc) {
  if (!doc.is_object()) throw ParseError("record must be a JSON object");
  try {
    TrialRecord r;
    r.task_id = field(doc, "task_id").get<std::string>();
    r.model_id = field(doc, "model_id").get<std::string>();
    r.policy = policy_from_json(field(doc, "policy"));
    r.optimizer = optimizer_from_name(field(doc, "optimizer").get<std::string>());
    r.hyper = hyper_from_json(field(doc, "hyper"));
    r.seed = field(doc, "seed").get<std::uint64_t>();
    r.budget_iters = field(doc, "budget_iters").get<Iter>();
    r.eval_every = field(doc, "eval_every").get<Iter>();
    for (const auto &row : field(doc, "series")) {
      Metrics m;
      m.iteration = field(row, "iter").get<Iter>();
      m.loss = real_or_nan(field(row, "loss"));
      const auto &top1 = field(row, "top1");
      if (!top1.is_null()) m.top1 = top1.get<double>();
      if (row.contains("wall_ms")) m.wall_ms = row["wall_ms"].get<double>();
      r.series.push_back(m);
    }
    const auto &peak = field(doc, "peak_top1");
    if (!peak.is_null()) r.peak_top1 = peak.get<double>();
    r.iter_at_peak = field(doc, "iter_at_peak").get<Iter>();
    r.final_loss = real_or_nan(field(doc, "final_loss"));
    r.lr_trace.policy = r.policy;
    for (const auto &p : field(doc, "lr_trace")) {
      r.lr_trace.points.push_back({p.at(0).get<Iter>(), p.at(1).get<double>()});
    }
    r.diverged = field(doc, "diverged").get<bool>();
    if (doc.contains("switches")) {
      for (const auto &s : doc["switches"]) {
        r.switches.push_back({field(s, "t").get<Iter>(), field(s, "from").get<int>(),
                              field(s, "to").get<int>()});
      }
    }
    if (doc.contains("snapshots")) {
      for (const auto &s : doc["snapshots"]) {
        r.snapshots.push_back({field(s, "t").get<Iter>(), field(s, "theta").get<ParamVector>()});
      }
    }
    if (doc.contains("metadata")) r.wall_ms = doc["metadata"].value("wall_ms", 0.0);
    return r;
  } catch (const json::exception &e) {
    throw ParseError(std::string("record: ") + e.what());
  }
}

} // namespace lrpolicy
