// SPDX-License-Identifier: Apache-2.0
#include "lrpolicy/optim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "lrpolicy/error.hpp"

namespace lrpolicy {

namespace {

void check_inputs(std::span<const double> theta, std::span<const double> grad, double lr) {
  if (theta.size() != grad.size()) {
    throw Error("gradient length " + std::to_string(grad.size()) + " != parameter length " +
                std::to_string(theta.size()));
  }
  if (!(std::isfinite(lr) && lr > 0.0)) throw Error("learning rate must be finite and > 0");
  auto finite = [](double x) { return std::isfinite(x); };
  if (!std::all_of(grad.begin(), grad.end(), finite)) throw Error("non-finite gradient");
  if (!std::all_of(theta.begin(), theta.end(), finite)) throw Error("non-finite parameters");
}

void require_kind(const OptimizerState &state, OptimizerKind kind) {
  if (state.kind != kind) {
    throw Error("optimizer state is " + std::string(optimizer_name(state.kind)) + ", expected " +
                std::string(optimizer_name(kind)));
  }
}

} // namespace

std::string_view optimizer_name(OptimizerKind kind) {
  switch (kind) {
  case OptimizerKind::SGD:
    return "sgd";
  case OptimizerKind::MOMENTUM:
    return "momentum";
  case OptimizerKind::ADAM:
    return "adam";
  }
  return "?";
}

OptimizerKind optimizer_from_name(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "sgd") return OptimizerKind::SGD;
  if (lower == "momentum") return OptimizerKind::MOMENTUM;
  if (lower == "adam") return OptimizerKind::ADAM;
  throw Error("unknown optimizer '" + std::string(name) + "'");
}

OptimizerState make_optimizer(OptimizerKind kind, const OptimizerHyper &hyper,
                              std::size_t param_len) {
  auto unit = [](double x) { return std::isfinite(x) && x > 0.0 && x < 1.0; };
  OptimizerState state{kind, hyper, {}, {}, 0};
  switch (kind) {
  case OptimizerKind::SGD:
    break;
  case OptimizerKind::MOMENTUM:
    if (!(std::isfinite(hyper.momentum) && hyper.momentum >= 0.0 && hyper.momentum < 1.0)) {
      throw Error("momentum coefficient must lie in [0,1)");
    }
    state.v.assign(param_len, 0.0);
    break;
  case OptimizerKind::ADAM:
    if (!unit(hyper.beta1) || !unit(hyper.beta2)) throw Error("beta1/beta2 must lie in (0,1)");
    if (!(std::isfinite(hyper.epsilon) && hyper.epsilon > 0.0)) {
      throw Error("epsilon must be > 0");
    }
    state.m.assign(param_len, 0.0);
    state.v.assign(param_len, 0.0);
    break;
  }
  return state;
}

void apply_step(std::span<double> theta, OptimizerState &state, std::span<const double> grad,
                double lr) {
  check_inputs(theta, grad, lr);
  const std::size_t n = theta.size();
  switch (state.kind) {
  case OptimizerKind::SGD:
    for (std::size_t j = 0; j < n; ++j) theta[j] -= lr * grad[j];
    break;
  case OptimizerKind::MOMENTUM: {
    if (state.v.size() != n) throw Error("momentum accumulator length mismatch");
    const double mu = state.hyper.momentum;
    for (std::size_t j = 0; j < n; ++j) {
      state.v[j] = mu * state.v[j] - lr * grad[j];
      theta[j] += state.v[j];
    }
    break;
  }
  case OptimizerKind::ADAM: {
    if (state.m.size() != n || state.v.size() != n) throw Error("adam accumulator length mismatch");
    const auto &h = state.hyper;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double m_corr = 1.0 - std::pow(h.beta1, t);
    const double v_corr = 1.0 - std::pow(h.beta2, t);
    for (std::size_t j = 0; j < n; ++j) {
      state.m[j] = h.beta1 * state.m[j] + (1.0 - h.beta1) * grad[j];
      state.v[j] = h.beta2 * state.v[j] + (1.0 - h.beta2) * grad[j] * grad[j];
      const double m_hat = state.m[j] / m_corr;
      const double v_hat = state.v[j] / v_corr;
      theta[j] -= lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
    break;
  }
  }
}

ParamVector sgd_step(std::span<const double> theta, std::span<const double> grad, double lr) {
  ParamVector out(theta.begin(), theta.end());
  OptimizerState sgd;
  apply_step(out, sgd, grad, lr);
  return out;
}

std::pair<ParamVector, OptimizerState> momentum_step(std::span<const double> theta,
                                                     OptimizerState state,
                                                     std::span<const double> grad, double lr) {
  require_kind(state, OptimizerKind::MOMENTUM);
  ParamVector out(theta.begin(), theta.end());
  apply_step(out, state, grad, lr);
  return {std::move(out), std::move(state)};
}

std::pair<ParamVector, OptimizerState> adam_step(std::span<const double> theta,
                                                 OptimizerState state,
                                                 std::span<const double> grad, double lr) {
  require_kind(state, OptimizerKind::ADAM);
  ParamVector out(theta.begin(), theta.end());
  apply_step(out, state, grad, lr);
  return {std::move(out), std::move(state)};
}

} // namespace lrpolicy
