// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <numeric>

#include "lrpolicy/error.hpp"
#include "lrpolicy/idx.hpp"
#include "lrpolicy/rng.hpp"
#include "lrpolicy/task.hpp"

namespace lrpolicy {

Iter Task::iterations_for_epochs(double epochs) const {
  const std::size_t n = train_size();
  if (n == 0) return std::max<Iter>(1, static_cast<Iter>(std::ceil(epochs)));
  const double per_epoch = std::ceil(static_cast<double>(n) / static_cast<double>(batch_size()));
  return std::max<Iter>(1, static_cast<Iter>(std::ceil(epochs * per_epoch)));
}

std::size_t MlpShape::param_len() const {
  if (hidden == 0) return classes * inputs + classes;
  return hidden * inputs + hidden + classes * hidden + classes;
}

double landscape_cost(const LandscapeParams &p, double x, double y) {
  const double dl = (x - p.local_x) * (x - p.local_x) + (y - p.local_y) * (y - p.local_y);
  const double dg = (x - p.global_x) * (x - p.global_x) + (y - p.global_y) * (y - p.global_y);
  return 0.5 * (p.bowl_x * x * x + p.bowl_y * y * y) -
         p.local_depth * std::exp(-dl / (2.0 * p.local_width * p.local_width)) -
         p.global_depth * std::exp(-dg / (2.0 * p.global_width * p.global_width));
}

namespace {

void require_grad_len(std::span<double> grad, std::size_t n) {
  if (grad.size() != n) throw Error("gradient buffer has wrong length");
}

// ---------------------------------------------------------------------------

class LandscapeTask final : public Task {
public:
  explicit LandscapeTask(LandscapeParams p) : p_(p) {}

  std::string id() const override { return "landscape2d"; }
  std::string model_id() const override { return "analytic"; }
  std::size_t param_len() const override { return 2; }
  std::size_t train_size() const override { return 0; }
  std::size_t batch_size() const override { return 1; }
  bool has_accuracy() const override { return false; }

  ParamVector initial_params(std::uint64_t) const override { return {p_.start_x, p_.start_y}; }

  double loss_and_grad(std::span<const double> theta, Split, std::span<const std::size_t>,
                       std::span<double> grad) const override {
    require_grad_len(grad, 2);
    const double x = theta[0], y = theta[1];
    const double wl2 = p_.local_width * p_.local_width;
    const double wg2 = p_.global_width * p_.global_width;
    const double el = p_.local_depth *
                      std::exp(-((x - p_.local_x) * (x - p_.local_x) +
                                 (y - p_.local_y) * (y - p_.local_y)) /
                               (2.0 * wl2)) /
                      wl2;
    const double eg = p_.global_depth *
                      std::exp(-((x - p_.global_x) * (x - p_.global_x) +
                                 (y - p_.global_y) * (y - p_.global_y)) /
                               (2.0 * wg2)) /
                      wg2;
    grad[0] = p_.bowl_x * x + el * (x - p_.local_x) + eg * (x - p_.global_x);
    grad[1] = p_.bowl_y * y + el * (y - p_.local_y) + eg * (y - p_.global_y);
    return landscape_cost(p_, x, y);
  }

  Metrics evaluate(std::span<const double> theta, Split) const override {
    return {landscape_cost(p_, theta[0], theta[1]), std::nullopt, 0, 0.0};
  }

private:
  LandscapeParams p_;
};

// ---------------------------------------------------------------------------

class QuadraticTask final : public Task {
public:
  QuadraticTask(double lambda, std::size_t dim) : lambda_(lambda), dim_(dim) {}

  std::string id() const override { return "quadratic"; }
  std::string model_id() const override { return "analytic"; }
  std::size_t param_len() const override { return dim_; }
  std::size_t train_size() const override { return 0; }
  std::size_t batch_size() const override { return 1; }
  bool has_accuracy() const override { return false; }

  ParamVector initial_params(std::uint64_t) const override {
    ParamVector theta(dim_);
    for (std::size_t j = 0; j < dim_; ++j) {
      theta[j] = (j % 2 == 0 ? 1.0 : -1.0) * (1.0 + 0.25 * static_cast<double>(j));
    }
    return theta;
  }

  double loss_and_grad(std::span<const double> theta, Split, std::span<const std::size_t>,
                       std::span<double> grad) const override {
    require_grad_len(grad, dim_);
    double sq = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      grad[j] = lambda_ * theta[j];
      sq += theta[j] * theta[j];
    }
    return 0.5 * lambda_ * sq;
  }

  Metrics evaluate(std::span<const double> theta, Split) const override {
    double sq = 0.0;
    for (double v : theta) sq += v * v;
    return {0.5 * lambda_ * sq, std::nullopt, 0, 0.0};
  }

private:
  double lambda_;
  std::size_t dim_;
};

// ---------------------------------------------------------------------------

/// Softmax classifier with an optional tanh hidden layer.
class ClassifierTask final : public Task {
public:
  ClassifierTask(std::string id, Dataset train, Dataset validation, std::size_t hidden,
                 std::size_t batch)
      : id_(std::move(id)), train_(std::move(train)), val_(std::move(validation)),
        shape_{train_.dim, hidden, train_.classes}, batch_(batch) {
    if (train_.size() == 0 || val_.size() == 0) throw Error(id_ + ": empty split");
    if (val_.dim != train_.dim || val_.classes != train_.classes) {
      throw Error(id_ + ": train/validation shapes differ");
    }
    if (batch_ == 0) throw Error(id_ + ": batch size must be >= 1");
  }

  std::string id() const override { return id_; }
  std::string model_id() const override {
    return shape_.hidden == 0 ? "logistic" : "mlp" + std::to_string(shape_.hidden);
  }
  std::size_t param_len() const override { return shape_.param_len(); }
  std::size_t train_size() const override { return train_.size(); }
  std::size_t batch_size() const override { return std::min(batch_, train_.size()); }
  bool has_accuracy() const override { return true; }

  // Glorot-uniform hidden weights, zero output layer: every class starts
  // with identical logits.
  ParamVector initial_params(std::uint64_t seed) const override {
    ParamVector theta(param_len(), 0.0);
    if (shape_.hidden > 0) {
      Rng rng(stream_key(seed, 0x1417));
      const double a =
          std::sqrt(6.0 / static_cast<double>(shape_.inputs + shape_.hidden));
      for (std::size_t j = 0; j < shape_.hidden * shape_.inputs; ++j) {
        theta[j] = rng.uniform(-a, a);
      }
    }
    return theta;
  }

  double loss_and_grad(std::span<const double> theta, Split split,
                       std::span<const std::size_t> batch,
                       std::span<double> grad) const override {
    require_grad_len(grad, param_len());
    std::fill(grad.begin(), grad.end(), 0.0);
    const Dataset &data = split == Split::Train ? train_ : val_;
    Scratch s(shape_);
    double total = 0.0;
    const std::size_t count = batch.empty() ? data.size() : batch.size();
    for (std::size_t b = 0; b < count; ++b) {
      const std::size_t i = batch.empty() ? b : batch[b];
      if (i >= data.size()) throw Error(id_ + ": batch index out of range");
      total += forward(theta, data.row(i), s) - s.logits[data.labels[i]];
      backward(theta, data.row(i), data.labels[i], s, grad);
    }
    const double inv = 1.0 / static_cast<double>(count);
    for (double &g : grad) g *= inv;
    return total * inv;
  }

  Metrics evaluate(std::span<const double> theta, Split split) const override {
    const Dataset &data = split == Split::Train ? train_ : val_;
    Scratch s(shape_);
    double total = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      total += forward(theta, data.row(i), s) - s.logits[data.labels[i]];
      std::size_t best = 0;
      for (std::size_t c = 1; c < shape_.classes; ++c) {
        if (s.logits[c] > s.logits[best]) best = c;
      }
      if (static_cast<int>(best) == data.labels[i]) ++correct;
    }
    const double n = static_cast<double>(data.size());
    return {total / n, static_cast<double>(correct) / n, 0, 0.0};
  }

private:
  struct Scratch {
    explicit Scratch(const MlpShape &shape)
        : hidden(shape.hidden), logits(shape.classes), probs(shape.classes),
          dhidden(shape.hidden) {}
    std::vector<double> hidden, logits, probs, dhidden;
  };

  // Fills s.hidden, s.logits, s.probs; returns log-sum-exp of the logits so
  // the caller forms the cross-entropy as lse - logit[label].
  double forward(std::span<const double> theta, std::span<const double> x, Scratch &s) const {
    const std::size_t in = shape_.inputs, hid = shape_.hidden, cls = shape_.classes;
    const double *p = theta.data();
    std::span<const double> features = x;
    if (hid > 0) {
      const double *w1 = p;
      const double *b1 = p + hid * in;
      for (std::size_t h = 0; h < hid; ++h) {
        double a = b1[h];
        const double *row = w1 + h * in;
        for (std::size_t j = 0; j < in; ++j) a += row[j] * x[j];
        s.hidden[h] = std::tanh(a);
      }
      p = b1 + hid;
      features = s.hidden;
    }
    const std::size_t width = hid > 0 ? hid : in;
    const double *w2 = p;
    const double *b2 = p + cls * width;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cls; ++c) {
      double z = b2[c];
      const double *row = w2 + c * width;
      for (std::size_t j = 0; j < width; ++j) z += row[j] * features[j];
      s.logits[c] = z;
      peak = std::max(peak, z);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < cls; ++c) {
      s.probs[c] = std::exp(s.logits[c] - peak);
      sum += s.probs[c];
    }
    for (double &v : s.probs) v /= sum;
    return peak + std::log(sum);
  }

  void backward(std::span<const double> theta, std::span<const double> x, int label, Scratch &s,
                std::span<double> grad) const {
    const std::size_t in = shape_.inputs, hid = shape_.hidden, cls = shape_.classes;
    const std::size_t width = hid > 0 ? hid : in;
    const std::size_t out_offset = hid > 0 ? hid * in + hid : 0;
    std::span<const double> features = hid > 0 ? std::span<const double>(s.hidden) : x;
    double *gw2 = grad.data() + out_offset;
    double *gb2 = gw2 + cls * width;
    const double *w2 = theta.data() + out_offset;
    std::fill(s.dhidden.begin(), s.dhidden.end(), 0.0);
    for (std::size_t c = 0; c < cls; ++c) {
      const double dz = s.probs[c] - (static_cast<int>(c) == label ? 1.0 : 0.0);
      gb2[c] += dz;
      double *grow = gw2 + c * width;
      for (std::size_t j = 0; j < width; ++j) grow[j] += dz * features[j];
      if (hid > 0) {
        const double *wrow = w2 + c * width;
        for (std::size_t h = 0; h < hid; ++h) s.dhidden[h] += dz * wrow[h];
      }
    }
    if (hid == 0) return;
    double *gw1 = grad.data();
    double *gb1 = gw1 + hid * in;
    for (std::size_t h = 0; h < hid; ++h) {
      const double da = s.dhidden[h] * (1.0 - s.hidden[h] * s.hidden[h]);
      gb1[h] += da;
      double *grow = gw1 + h * in;
      for (std::size_t j = 0; j < in; ++j) grow[j] += da * x[j];
    }
  }

  std::string id_;
  Dataset train_;
  Dataset val_;
  MlpShape shape_;
  std::size_t batch_;
};

// ---------------------------------------------------------------------------

/// Splits off the last fifth (rounded down to even) as validation.
std::pair<Dataset, Dataset> split_tail(const Dataset &all) {
  std::size_t n_val = all.size() / 5;
  n_val -= n_val % 2;
  const std::size_t n_train = all.size() - n_val;
  Dataset train{all.dim, all.classes, {}, {}};
  Dataset val{all.dim, all.classes, {}, {}};
  train.features.assign(all.features.begin(), all.features.begin() + n_train * all.dim);
  train.labels.assign(all.labels.begin(), all.labels.begin() + n_train);
  val.features.assign(all.features.begin() + n_train * all.dim, all.features.end());
  val.labels.assign(all.labels.begin() + n_train, all.labels.end());
  return {std::move(train), std::move(val)};
}

class Params {
public:
  Params(const TaskSpec &spec, std::initializer_list<const char *> allowed) : spec_(spec) {
    for (const auto &[key, value] : spec.params) {
      if (std::find_if(allowed.begin(), allowed.end(),
                       [&](const char *a) { return key == a; }) == allowed.end()) {
        throw Error("task " + spec.name + " has no parameter '" + key + "'");
      }
    }
  }

  double real(const std::string &key, double fallback) const {
    const auto it = spec_.params.find(key);
    if (it == spec_.params.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::exception &) {
      throw Error("task " + spec_.name + ": parameter '" + key + "' is not a number");
    }
  }

  std::uint64_t count(const std::string &key, std::uint64_t fallback) const {
    const auto it = spec_.params.find(key);
    if (it == spec_.params.end()) return fallback;
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(it->second, &pos);
      if (pos != it->second.size() || it->second.front() == '-') throw std::invalid_argument(key);
      return v;
    } catch (const std::exception &) {
      throw Error("task " + spec_.name + ": parameter '" + key +
                  "' is not a non-negative integer");
    }
  }

  std::string text(const std::string &key, const std::string &fallback) const {
    const auto it = spec_.params.find(key);
    return it == spec_.params.end() ? fallback : it->second;
  }

private:
  const TaskSpec &spec_;
};

Dataset load_mnist_split(const std::filesystem::path &images_path,
                         const std::filesystem::path &labels_path, std::size_t limit) {
  const IdxImages images = read_idx_images(images_path);
  const auto labels = read_idx_labels(labels_path);
  if (labels.size() != images.count) {
    throw ParseError("IDX image/label counts differ: " + images_path.string());
  }
  const std::size_t n = limit > 0 ? std::min<std::size_t>(limit, images.count) : images.count;
  const std::size_t dim = std::size_t{images.rows} * images.cols;
  Dataset out{dim, 10, {}, {}};
  out.features.resize(n * dim);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] > 9) throw ParseError("IDX label out of range in " + labels_path.string());
    out.labels[i] = labels[i];
    for (std::size_t j = 0; j < dim; ++j) {
      out.features[i * dim + j] = images.pixels[i * dim + j] / 255.0;
    }
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

} // namespace

Dataset make_blobs(std::uint64_t seed, std::size_t n, double sep, double noise) {
  Rng rng(stream_key(seed, 0xb10b5));
  Dataset d{2, 2, std::vector<double>(n * 2), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    d.labels[i] = label;
    d.features[2 * i] = (label == 0 ? -0.5 : 0.5) * sep + noise * rng.normal();
    d.features[2 * i + 1] = noise * rng.normal();
  }
  return d;
}

Dataset make_moons(std::uint64_t seed, std::size_t n, double noise) {
  Rng rng(stream_key(seed, 0x300d5));
  Dataset d{2, 2, std::vector<double>(n * 2), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double u = std::numbers::pi * rng.uniform();
    double x = std::cos(u), y = std::sin(u);
    if (label == 1) {
      x = 1.0 - x;
      y = 0.5 - y;
    }
    d.labels[i] = label;
    d.features[2 * i] = x + noise * rng.normal();
    d.features[2 * i + 1] = y + noise * rng.normal();
  }
  return d;
}

std::shared_ptr<const Task> make_classifier_task(std::string id, Dataset train, Dataset validation,
                                                 std::size_t hidden, std::size_t batch_size) {
  return std::make_shared<ClassifierTask>(std::move(id), std::move(train), std::move(validation),
                                          hidden, batch_size);
}

TaskSpec parse_task_spec(std::string_view text) {
  TaskSpec spec;
  const auto open = text.find('(');
  spec.name = trim(text.substr(0, open));
  if (spec.name.empty()) throw Error("empty task spec");
  if (open == std::string_view::npos) return spec;
  if (text.back() != ')') throw Error("task spec '" + std::string(text) + "' lacks ')'");
  const std::string_view body = text.substr(open + 1, text.size() - open - 2);
  std::size_t pos = 0;
  while (pos <= body.size()) {
    const auto comma = body.find(',', pos);
    const auto item = trim(body.substr(pos, comma == std::string_view::npos ? body.npos
                                                                              : comma - pos));
    if (!item.empty()) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw Error("task parameter '" + item + "' lacks '='");
      spec.params[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return spec;
}

std::shared_ptr<const Task> load_task(const TaskSpec &spec) {
  if (spec.name == "landscape2d") {
    Params check(spec, {});
    return std::make_shared<LandscapeTask>(LandscapeParams{});
  }
  if (spec.name == "quadratic") {
    Params p(spec, {"lambda", "dim"});
    const double lambda = p.real("lambda", 1.0);
    const auto dim = p.count("dim", 4);
    if (!(lambda > 0.0) || dim == 0) throw Error("quadratic needs lambda > 0 and dim >= 1");
    return std::make_shared<QuadraticTask>(lambda, dim);
  }
  if (spec.name == "blobs2") {
    Params p(spec, {"seed", "n", "sep", "noise", "hidden", "batch"});
    const auto n = p.count("n", 2000);
    if (n < 10) throw Error("blobs2 needs n >= 10");
    auto [train, val] = split_tail(
        make_blobs(p.count("seed", 1), n, p.real("sep", 2.0), p.real("noise", 1.0)));
    return make_classifier_task("blobs2", std::move(train), std::move(val), p.count("hidden", 16),
                                p.count("batch", 32));
  }
  if (spec.name == "moons2") {
    Params p(spec, {"seed", "n", "noise", "hidden", "batch"});
    const auto n = p.count("n", 2000);
    if (n < 10) throw Error("moons2 needs n >= 10");
    auto [train, val] = split_tail(make_moons(p.count("seed", 1), n, p.real("noise", 0.25)));
    return make_classifier_task("moons2", std::move(train), std::move(val), p.count("hidden", 16),
                                p.count("batch", 32));
  }
  if (spec.name == "mnist-idx") {
    Params p(spec, {"path", "hidden", "limit", "batch"});
    const std::filesystem::path dir = p.text("path", "data/mnist");
    const auto limit = p.count("limit", 0);
    Dataset train = load_mnist_split(dir / "train-images-idx3-ubyte",
                                     dir / "train-labels-idx1-ubyte", limit);
    Dataset val = load_mnist_split(dir / "t10k-images-idx3-ubyte",
                                   dir / "t10k-labels-idx1-ubyte", limit);
    return make_classifier_task("mnist", std::move(train), std::move(val), p.count("hidden", 64),
                                p.count("batch", 32));
  }
  throw Error("unknown task '" + spec.name + "'");
}

std::shared_ptr<const Task> load_task(std::string_view spec) {
  return load_task(parse_task_spec(spec));
}

} // namespace lrpolicy
