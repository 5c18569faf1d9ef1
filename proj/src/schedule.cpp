// SPDX-License-Identifier: Apache-2.0
#include "lrpolicy/schedule.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "lrpolicy/error.hpp"

namespace lrpolicy {

namespace {

template <class... Ts> struct Overloaded : Ts... { using Ts::operator()...; };
template <class... Ts> Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr std::array<std::pair<CyclicKind, std::string_view>, 9> kCyclicNames{{
    {CyclicKind::TRI, "TRI"},
    {CyclicKind::TRI2, "TRI2"},
    {CyclicKind::TRIEXP, "TRIEXP"},
    {CyclicKind::SIN, "SIN"},
    {CyclicKind::SIN2, "SIN2"},
    {CyclicKind::SINEXP, "SINEXP"},
    {CyclicKind::COS, "COS"},
    {CyclicKind::COS2, "COS2"},
    {CyclicKind::COSEXP, "COSEXP"},
}};

enum class Wave { Triangle, Sine, Cosine };
enum class Envelope { None, Halving, Exponential };

Wave wave_of(CyclicKind kind) {
  switch (kind) {
  case CyclicKind::TRI:
  case CyclicKind::TRI2:
  case CyclicKind::TRIEXP:
    return Wave::Triangle;
  case CyclicKind::SIN:
  case CyclicKind::SIN2:
  case CyclicKind::SINEXP:
    return Wave::Sine;
  default:
    return Wave::Cosine;
  }
}

Envelope envelope_of(CyclicKind kind) {
  switch (kind) {
  case CyclicKind::TRI2:
  case CyclicKind::SIN2:
  case CyclicKind::COS2:
    return Envelope::Halving;
  case CyclicKind::TRIEXP:
  case CyclicKind::SINEXP:
  case CyclicKind::COSEXP:
    return Envelope::Exponential;
  default:
    return Envelope::None;
  }
}

// All three waves have period 2l, so the phase is reduced first. For the
// triangle this replaces (2/pi)|asin(sin(pi t / 2l))| with the identical
// piecewise-linear form, which is exact at the corners.
double wave_value(Wave wave, Iter t, Iter l) {
  const Iter period = 2 * l;
  const Iter phase = t % period;
  const double x = static_cast<double>(phase);
  const double half = static_cast<double>(l);
  switch (wave) {
  case Wave::Triangle:
    return phase <= l ? x / half : static_cast<double>(period - phase) / half;
  case Wave::Sine:
    return std::fabs(std::sin(std::numbers::pi * x / (2.0 * half)));
  case Wave::Cosine:
    return 0.5 * (1.0 + std::cos(std::numbers::pi * x / half));
  }
  return 0.0;
}

double cyclic_lr(const Cyclic &c, Iter t) {
  double g = wave_value(wave_of(c.kind), t, c.l);
  switch (envelope_of(c.kind)) {
  case Envelope::Halving:
    g = std::ldexp(g, -static_cast<int>(std::min<Iter>(t / (2 * c.l), 4096)));
    break;
  case Envelope::Exponential:
    g *= std::pow(*c.gamma, static_cast<double>(t));
    break;
  case Envelope::None:
    break;
  }
  const double lo = std::min(c.k0, c.k1), hi = std::max(c.k0, c.k1);
  // rounding can overshoot the upper bound by an ulp at the peak
  return std::min(std::fabs(c.k0 - c.k1) * g + lo, hi);
}

double base_lr(const BasePolicy &policy, Iter t, Iter total_iters) {
  return std::visit(
      Overloaded{
          [](const Fix &p) { return p.k; },
          [t](const Step &p) {
            return p.k * std::pow(p.gamma, static_cast<double>(t / p.l));
          },
          [t](const NStep &p) {
            const auto passed = std::upper_bound(p.boundaries.begin(), p.boundaries.end(), t) -
                                p.boundaries.begin();
            return p.k * std::pow(p.gamma, static_cast<double>(passed));
          },
          [t](const Exp &p) { return p.k * std::pow(p.gamma, static_cast<double>(t)); },
          [t](const Inv &p) {
            return p.k / std::pow(1.0 + p.gamma * static_cast<double>(t), p.p);
          },
          [t, total_iters](const Poly &p) {
            const Iter max_iter = p.max_iter.value_or(total_iters);
            if (t > max_iter) {
              throw Error("POLY evaluated at t=" + std::to_string(t) + " beyond max_iter=" +
                          std::to_string(max_iter));
            }
            const double frac = 1.0 - static_cast<double>(t) / static_cast<double>(max_iter);
            return p.k * std::pow(frac, p.p);
          },
          [t](const Cyclic &p) { return cyclic_lr(p, t); },
      },
      policy);
}

bool positive(double x) { return std::isfinite(x) && x > 0.0; }
bool unit_open(double x) { return std::isfinite(x) && x > 0.0 && x < 1.0; }

class Checker {
public:
  explicit Checker(std::vector<Violation> &out) : out_(out) {}

  void rate(const std::string &prefix, const char *name, double v) {
    if (!positive(v)) add(prefix, name, "must be a finite value > 0");
  }
  void decay(const std::string &prefix, double gamma) {
    if (!unit_open(gamma)) add(prefix, "gamma", "must lie in (0,1)");
  }
  void add(const std::string &prefix, const char *name, std::string reason) {
    out_.push_back({prefix + name, std::move(reason)});
  }

  void base(const BasePolicy &policy, Iter total_iters, const std::string &prefix) {
    std::visit(
        Overloaded{
            [&](const Fix &p) { rate(prefix, "k", p.k); },
            [&](const Step &p) {
              rate(prefix, "k", p.k);
              decay(prefix, p.gamma);
              if (p.l < 1) add(prefix, "l", "step size must be >= 1");
            },
            [&](const NStep &p) {
              rate(prefix, "k", p.k);
              decay(prefix, p.gamma);
              if (p.boundaries.empty()) add(prefix, "boundaries", "must not be empty");
              for (std::size_t i = 0; i < p.boundaries.size(); ++i) {
                if (p.boundaries[i] < 1) {
                  add(prefix, "boundaries", "entries must be positive");
                  break;
                }
                if (i > 0 && p.boundaries[i] <= p.boundaries[i - 1]) {
                  add(prefix, "boundaries", "must be strictly increasing");
                  break;
                }
              }
            },
            [&](const Exp &p) {
              rate(prefix, "k", p.k);
              decay(prefix, p.gamma);
            },
            [&](const Inv &p) {
              rate(prefix, "k", p.k);
              rate(prefix, "gamma", p.gamma);
              rate(prefix, "p", p.p);
            },
            [&](const Poly &p) {
              rate(prefix, "k", p.k);
              rate(prefix, "p", p.p);
              if (p.max_iter) {
                if (*p.max_iter < 1) {
                  add(prefix, "max_iter", "must be >= 1");
                } else if (*p.max_iter < total_iters - 1) {
                  add(prefix, "max_iter",
                      "max_iter=" + std::to_string(*p.max_iter) +
                          " ends before the last iteration " + std::to_string(total_iters - 1));
                }
              }
            },
            [&](const Cyclic &p) {
              rate(prefix, "k0", p.k0);
              rate(prefix, "k1", p.k1);
              if (p.l < 1) add(prefix, "l", "half-cycle length must be >= 1");
              if (is_exp_kind(p.kind)) {
                if (!p.gamma) {
                  add(prefix, "gamma", std::string(kind_name(p.kind)) + " requires gamma");
                } else {
                  decay(prefix, *p.gamma);
                }
              } else if (p.gamma) {
                add(prefix, "gamma", std::string(kind_name(p.kind)) + " takes no gamma");
              }
            },
        },
        policy);
  }

  void composite(const Composite &c, Iter total_iters) {
    if (c.segments.empty()) {
      add("", "segments", "composite needs at least one segment");
      return;
    }
    if (c.segments.front().start != 0) add("", "segments[0].start", "first segment must start at 0");
    for (std::size_t i = 0; i < c.segments.size(); ++i) {
      const auto &s = c.segments[i];
      const std::string prefix = "segments[" + std::to_string(i) + "].";
      if (s.end <= s.start) add(prefix, "end", "segment end must exceed its start");
      if (i > 0 && s.start != c.segments[i - 1].end) {
        add(prefix, "start",
            s.start < c.segments[i - 1].end ? "segments overlap" : "gap between segments");
      }
      if (s.end > s.start) base(s.policy, s.end - s.start, prefix + "policy.");
    }
    if (c.segments.back().end < total_iters) {
      add("", "segments",
          "segments do not cover [0," + std::to_string(total_iters) + ")");
    }
  }

private:
  std::vector<Violation> &out_;
};

} // namespace

Policy to_policy(const BasePolicy &base) {
  return std::visit([](const auto &p) -> Policy { return p; }, base);
}

BasePolicy to_base(const Policy &policy) {
  return std::visit(Overloaded{
                        [](const Composite &) -> BasePolicy {
                          throw Error("composite policies cannot be nested");
                        },
                        [](const auto &p) -> BasePolicy { return p; },
                    },
                    policy);
}

std::string_view kind_name(CyclicKind kind) {
  for (const auto &[k, name] : kCyclicNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<CyclicKind> cyclic_kind_from_name(std::string_view name) {
  for (const auto &[k, n] : kCyclicNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

bool is_exp_kind(CyclicKind kind) { return envelope_of(kind) == Envelope::Exponential; }

std::string type_name(const Policy &policy) {
  return std::visit(Overloaded{
                        [](const Fix &) -> std::string { return "FIX"; },
                        [](const Step &) -> std::string { return "STEP"; },
                        [](const NStep &) -> std::string { return "NSTEP"; },
                        [](const Exp &) -> std::string { return "EXP"; },
                        [](const Inv &) -> std::string { return "INV"; },
                        [](const Poly &) -> std::string { return "POLY"; },
                        [](const Cyclic &c) { return std::string(kind_name(c.kind)); },
                        [](const Composite &) -> std::string { return "COMPOSITE"; },
                    },
                    policy);
}

PolicyFamily family_of(const Policy &policy) {
  return std::visit(Overloaded{
                        [](const Fix &) { return PolicyFamily::Fixed; },
                        [](const Cyclic &) { return PolicyFamily::Cyclic; },
                        [](const Composite &) { return PolicyFamily::Composite; },
                        [](const auto &) { return PolicyFamily::Decaying; },
                    },
                    policy);
}

std::vector<Violation> validate_policy(const Policy &policy, Iter total_iters) {
  std::vector<Violation> out;
  Checker check(out);
  if (total_iters < 1) check.add("", "total_iters", "must be >= 1");
  if (const auto *c = std::get_if<Composite>(&policy)) {
    check.composite(*c, total_iters);
  } else {
    check.base(to_base(policy), total_iters, "");
  }
  return out;
}

void require_valid(const Policy &policy, Iter total_iters) {
  const auto violations = validate_policy(policy, total_iters);
  if (!violations.empty()) {
    const auto &v = violations.front();
    throw Error("invalid " + type_name(policy) + " policy: " + v.field + ": " + v.reason);
  }
}

double eval_lr(const Policy &policy, Iter t, Iter total_iters) {
  if (t < 0 || t >= total_iters) {
    throw Error("iteration " + std::to_string(t) + " outside [0," + std::to_string(total_iters) +
                ")");
  }
  if (const auto *c = std::get_if<Composite>(&policy)) {
    for (const auto &s : c->segments) {
      if (t >= s.start && t < s.end) return base_lr(s.policy, t - s.start, s.end - s.start);
    }
    throw Error("iteration " + std::to_string(t) + " is outside every composite segment");
  }
  return base_lr(to_base(policy), t, total_iters);
}

Policy bind_budget(Policy policy, Iter total_iters) {
  if (auto *p = std::get_if<Poly>(&policy)) {
    if (!p->max_iter) p->max_iter = total_iters;
  } else if (auto *c = std::get_if<Composite>(&policy)) {
    for (auto &s : c->segments) {
      if (auto *sp = std::get_if<Poly>(&s.policy); sp && !sp->max_iter) {
        sp->max_iter = s.end - s.start;
      }
    }
  }
  return policy;
}

ScheduleSeries schedule_series(const Policy &policy, Iter total_iters, Iter stride) {
  if (stride < 1) throw Error("stride must be >= 1");
  ScheduleSeries series{policy, {}};
  for (Iter t = 0; t < total_iters; t += stride) {
    series.points.push_back({t, eval_lr(policy, t, total_iters)});
  }
  return series;
}

std::string series_csv(const ScheduleSeries &series) {
  std::string out = "t,lr\n";
  char buf[64];
  for (const auto &pt : series.points) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g\n", static_cast<long long>(pt.t), pt.lr);
    out += buf;
  }
  return out;
}

std::string describe(const Policy &policy) {
  std::ostringstream os;
  os.precision(6);
  auto base = [&os](const BasePolicy &b) {
    std::visit(Overloaded{
                   [&](const Fix &p) { os << "FIX(k=" << p.k << ")"; },
                   [&](const Step &p) {
                     os << "STEP(k=" << p.k << ",gamma=" << p.gamma << ",l=" << p.l << ")";
                   },
                   [&](const NStep &p) {
                     os << "NSTEP(k=" << p.k << ",gamma=" << p.gamma << ",l=[";
                     for (std::size_t i = 0; i < p.boundaries.size(); ++i) {
                       os << (i ? "," : "") << p.boundaries[i];
                     }
                     os << "])";
                   },
                   [&](const Exp &p) { os << "EXP(k=" << p.k << ",gamma=" << p.gamma << ")"; },
                   [&](const Inv &p) {
                     os << "INV(k=" << p.k << ",gamma=" << p.gamma << ",p=" << p.p << ")";
                   },
                   [&](const Poly &p) {
                     os << "POLY(k=" << p.k << ",p=" << p.p;
                     if (p.max_iter) os << ",max_iter=" << *p.max_iter;
                     os << ")";
                   },
                   [&](const Cyclic &p) {
                     os << kind_name(p.kind) << "(k0=" << p.k0 << ",k1=" << p.k1;
                     if (p.gamma) os << ",gamma=" << *p.gamma;
                     os << ",l=" << p.l << ")";
                   },
               },
               b);
  };
  if (const auto *c = std::get_if<Composite>(&policy)) {
    os << "COMPOSITE[";
    for (std::size_t i = 0; i < c->segments.size(); ++i) {
      const auto &s = c->segments[i];
      os << (i ? "; " : "") << s.start << "-" << s.end << ":";
      base(s.policy);
    }
    os << "]";
  } else {
    base(to_base(policy));
  }
  return os.str();
}

} // namespace lrpolicy
