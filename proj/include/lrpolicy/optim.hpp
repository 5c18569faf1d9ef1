// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lrpolicy {

using ParamVector = std::vector<double>;

enum class OptimizerKind { SGD, MOMENTUM, ADAM };

std::string_view optimizer_name(OptimizerKind kind);
/// Accepts "sgd", "momentum", "adam" (case-insensitive).
OptimizerKind optimizer_from_name(std::string_view name);

struct OptimizerHyper {
  double momentum = 0.9;  ///< coefficient on the previous velocity
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const OptimizerHyper &) const = default;
};

/// Accumulators for one trial. SGD carries none, MOMENTUM the velocity in
/// `v`, ADAM both moments plus the step counter.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::SGD;
  OptimizerHyper hyper;
  ParamVector m;
  ParamVector v;
  std::int64_t step = 0;
  bool operator==(const OptimizerState &) const = default;
};

/// Zero-initialised state. Throws lrpolicy::Error when a hyperparameter is
/// out of range (momentum in [0,1), betas in (0,1), epsilon > 0).
OptimizerState make_optimizer(OptimizerKind kind, const OptimizerHyper &hyper,
                              std::size_t param_len);

ParamVector sgd_step(std::span<const double> theta, std::span<const double> grad, double lr);

std::pair<ParamVector, OptimizerState> momentum_step(std::span<const double> theta,
                                                     OptimizerState state,
                                                     std::span<const double> grad, double lr);

std::pair<ParamVector, OptimizerState> adam_step(std::span<const double> theta,
                                                 OptimizerState state,
                                                 std::span<const double> grad, double lr);

/// In-place update dispatched on state.kind; the pure functions above are
/// thin wrappers over this. Throws lrpolicy::Error on length mismatch,
/// non-positive lr, or non-finite gradient.
void apply_step(std::span<double> theta, OptimizerState &state, std::span<const double> grad,
                double lr);

} // namespace lrpolicy
