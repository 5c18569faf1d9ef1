// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lrpolicy/optim.hpp"
#include "lrpolicy/schedule.hpp"

namespace lrpolicy {

enum class Split { Train, Validation };

struct Metrics {
  double loss = 0.0;
  std::optional<double> top1;  ///< absent for tasks without labels
  Iter iteration = 0;
  double wall_ms = 0.0;
};

/// A differentiable training problem. Implementations are immutable after
/// construction, so one Task may be shared by concurrent trials.
class Task {
public:
  virtual ~Task() = default;

  /// Dataset/problem identifier, e.g. "blobs2".
  virtual std::string id() const = 0;
  /// Model identifier, e.g. "mlp16", "logistic", "analytic".
  virtual std::string model_id() const = 0;
  virtual std::size_t param_len() const = 0;
  /// Training examples; 0 for full-batch analytic tasks.
  virtual std::size_t train_size() const = 0;
  virtual std::size_t batch_size() const = 0;
  virtual bool has_accuracy() const = 0;

  virtual ParamVector initial_params(std::uint64_t seed) const = 0;

  /// Mean loss over the given examples of `split` and its gradient written
  /// to `grad` (length param_len). An empty index list means the whole split.
  virtual double loss_and_grad(std::span<const double> theta, Split split,
                               std::span<const std::size_t> batch,
                               std::span<double> grad) const = 0;

  /// Full-split loss and top-1 accuracy.
  virtual Metrics evaluate(std::span<const double> theta, Split split) const = 0;

  /// Iterations in `epochs` passes over the training split (at least 1).
  Iter iterations_for_epochs(double epochs) const;
};

/// Parsed task spec "name(key=value,...)".
struct TaskSpec {
  std::string name;
  std::map<std::string, std::string> params;
};

TaskSpec parse_task_spec(std::string_view text);

/// Built-ins:
///   landscape2d                     fixed 2-D cost surface, full batch
///   quadratic(lambda,dim)           0.5 * lambda * |theta|^2, full batch
///   blobs2(seed,n,sep,noise,hidden,batch)
///   moons2(seed,n,noise,hidden,batch)
///   mnist-idx(path,hidden,limit,batch)
/// hidden=0 selects a softmax-linear (logistic) head, otherwise a one
/// hidden-layer tanh MLP. Throws lrpolicy::Error for unknown tasks or bad
/// parameters and ParseError for unreadable IDX files.
std::shared_ptr<const Task> load_task(const TaskSpec &spec);
std::shared_ptr<const Task> load_task(std::string_view spec);

// Landscape coefficients, exposed for documentation and tests.
struct LandscapeParams {
  double bowl_x = 1.5;
  double bowl_y = 10.0;
  double local_depth = 2.0;
  double local_x = 2.1;
  double local_y = 0.4;
  double local_width = 0.16;
  double global_depth = 2.2;
  double global_x = -0.5;
  double global_y = 0.0;
  double global_width = 0.55;
  double start_x = 3.5;
  double start_y = 2.35;
};

double landscape_cost(const LandscapeParams &p, double x, double y);

// ---------------------------------------------------------------------------
// Classification data and the MLP used by the synthetic and MNIST tasks
// ---------------------------------------------------------------------------

struct Dataset {
  std::size_t dim = 0;
  std::size_t classes = 0;
  std::vector<double> features;  ///< row-major, size() * dim
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }
};

struct MlpShape {
  std::size_t inputs = 0;
  std::size_t hidden = 0;  ///< 0 means no hidden layer
  std::size_t classes = 0;

  std::size_t param_len() const;
};

/// Builds a classification task from explicit splits.
std::shared_ptr<const Task> make_classifier_task(std::string id, Dataset train, Dataset validation,
                                                 std::size_t hidden, std::size_t batch_size);

/// Two Gaussian blobs centred at (+-sep/2, 0); labels alternate so any even
/// prefix/suffix is class-balanced.
Dataset make_blobs(std::uint64_t seed, std::size_t n, double sep, double noise);
Dataset make_moons(std::uint64_t seed, std::size_t n, double noise);

} // namespace lrpolicy
