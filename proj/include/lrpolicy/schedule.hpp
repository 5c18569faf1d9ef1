// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace lrpolicy {

using Iter = std::int64_t;

// ---------------------------------------------------------------------------
// Policy families. Each is a plain value; eval_lr() is the only place that
// knows the formulas.
// ---------------------------------------------------------------------------

struct Fix {
  double k = 0.0;
  bool operator==(const Fix &) const = default;
};

/// k * gamma^floor(t / l)
struct Step {
  double k = 0.0;
  double gamma = 0.0;
  Iter l = 0;
  bool operator==(const Step &) const = default;
};

/// k * gamma^i where i is the number of boundaries <= t.
struct NStep {
  double k = 0.0;
  double gamma = 0.0;
  std::vector<Iter> boundaries;
  bool operator==(const NStep &) const = default;
};

/// k * gamma^t
struct Exp {
  double k = 0.0;
  double gamma = 0.0;
  bool operator==(const Exp &) const = default;
};

/// k / (1 + gamma t)^p
struct Inv {
  double k = 0.0;
  double gamma = 0.0;
  double p = 0.0;
  bool operator==(const Inv &) const = default;
};

/// k * (1 - t / max_iter)^p. An unset max_iter binds to the run's budget.
struct Poly {
  double k = 0.0;
  double p = 0.0;
  std::optional<Iter> max_iter;
  bool operator==(const Poly &) const = default;
};

enum class CyclicKind { TRI, TRI2, TRIEXP, SIN, SIN2, SINEXP, COS, COS2, COSEXP };

/// |k0 - k1| * g(t) + min(k0, k1) with g drawn from the triangle, sine or
/// cosine wave, optionally halved every 2l iterations (*2) or damped by
/// gamma^t (*EXP). gamma is present exactly for the *EXP kinds.
struct Cyclic {
  CyclicKind kind = CyclicKind::TRI;
  double k0 = 0.0;
  double k1 = 0.0;
  Iter l = 0;
  std::optional<double> gamma;
  bool operator==(const Cyclic &) const = default;
};

using BasePolicy = std::variant<Fix, Step, NStep, Exp, Inv, Poly, Cyclic>;

/// One stage of a composite schedule, covering [start, end). The inner
/// policy runs on a segment-local clock t - start.
struct Segment {
  Iter start = 0;
  Iter end = 0;
  BasePolicy policy;
  bool operator==(const Segment &) const = default;
};

struct Composite {
  std::vector<Segment> segments;
  bool operator==(const Composite &) const = default;
};

using Policy = std::variant<Fix, Step, NStep, Exp, Inv, Poly, Cyclic, Composite>;

Policy to_policy(const BasePolicy &base);
/// Fails for Composite.
BasePolicy to_base(const Policy &policy);

std::string_view kind_name(CyclicKind kind);
std::optional<CyclicKind> cyclic_kind_from_name(std::string_view name);
bool is_exp_kind(CyclicKind kind);

/// Family tag as it appears in the policy document ("FIX", "TRI2", ...).
std::string type_name(const Policy &policy);

enum class PolicyFamily { Fixed, Decaying, Cyclic, Composite };
PolicyFamily family_of(const Policy &policy);

// ---------------------------------------------------------------------------
// Validation and evaluation
// ---------------------------------------------------------------------------

struct Violation {
  std::string field;  ///< dotted path, e.g. "segments[1].policy.gamma"
  std::string reason;
  bool operator==(const Violation &) const = default;
};

/// Every invariant violation of `policy` when run for `total_iters`
/// iterations. Empty means valid.
std::vector<Violation> validate_policy(const Policy &policy, Iter total_iters);

/// Throws lrpolicy::Error describing the first violation, if any.
void require_valid(const Policy &policy, Iter total_iters);

/// Learning rate applied at iteration t (0-based) of a run of total_iters.
/// Throws lrpolicy::Error for t outside [0, total_iters), POLY beyond
/// max_iter, or t outside every composite segment. Does not re-validate.
double eval_lr(const Policy &policy, Iter t, Iter total_iters);

/// Binds POLY's max_iter (top level and inside composite segments) to the
/// given budget where it is unset.
Policy bind_budget(Policy policy, Iter total_iters);

// ---------------------------------------------------------------------------
// Series + text forms
// ---------------------------------------------------------------------------

struct SchedulePoint {
  Iter t = 0;
  double lr = 0.0;
  bool operator==(const SchedulePoint &) const = default;
};

struct ScheduleSeries {
  Policy policy;
  std::vector<SchedulePoint> points;
};

/// Points at t = 0, stride, 2*stride, ... < total_iters.
ScheduleSeries schedule_series(const Policy &policy, Iter total_iters, Iter stride);

/// "t,lr" header followed by one %.17g row per point.
std::string series_csv(const ScheduleSeries &series);

/// Parses the JSON policy document. Throws ParseError on malformed JSON,
/// unknown type, missing or extraneous fields.
Policy parse_policy(std::string_view text);

/// Canonical compact JSON (keys sorted); also the tie-break key for ranking.
std::string serialize_policy(const Policy &policy);

/// Short human-readable form, e.g. "TRI(k0=0.01,k1=0.06,l=2000)".
std::string describe(const Policy &policy);

} // namespace lrpolicy
