// SPDX-License-Identifier: Apache-2.0
#include "lrpolicy/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lrpolicy/error.hpp"
#include "lrpolicy/json_io.hpp"
#include "lrpolicy/policy_db.hpp"
#include "lrpolicy/tuner.hpp"
#include "lrpolicy/verifier.hpp"

namespace lrpolicy {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Bad flag value: reported with the flag name, exit code 2.
struct UsageError : std::runtime_error {
  UsageError(const std::string &flag, const std::string &what)
      : std::runtime_error(flag + ": " + what) {}
};

constexpr const char *kStableTimestamp = "1970-01-01T00:00:00Z";

struct Globals {
  std::uint64_t seed = 1;
  int workers = 1;
  std::string db;
  std::string out;
  bool stable = false;
};

struct Options {
  // shared
  std::string task;
  std::string policy;
  std::string optimizer = "sgd";
  double momentum = 0.9;
  Iter iters = 1000;
  Iter eval_every = 0;
  std::string csv;
  std::size_t seeds = 3;
  std::string metric = "peak_top1";
  // eval
  Iter stride = 1;
  // range test / search space
  double lr_min = 1e-4;
  double lr_max = 1.0;
  int points = 13;
  bool linear = false;
  std::vector<double> budgets = {1, 3};
  // tune
  std::string strategy = "grid";
  std::size_t top = 3;
  std::string candidates;
  std::vector<std::string> families = {"FIX", "NSTEP", "TRI", "SIN2", "COS"};
  int rates = 3;
  std::size_t samples = 8;
  Iter explore_budget = 0;
  int start = 0;
  Iter patience = 5;
  double min_delta = 0.05;
  std::string monitor = "train";
  Iter warmup = 0;
  double phase_split = 0.7;
  // verify
  double target = 0.0;
  // mopt
  Iter m_stride = 0;
  // db
  std::string action;
  std::string dataset;
  std::string model;
  std::string file;
  std::size_t n = 3;
  bool as_json = false;
};

void add_globals(CLI::App *sub, Globals &g) {
  sub->add_option("--seed", g.seed, "Random seed; multi-seed runs count up from it")
      ->capture_default_str();
  sub->add_option("--workers", g.workers, "Maximum concurrent trials")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--db", g.db, "Policy store file (JSON lines)");
  sub->add_option("--out", g.out, "Write the primary output to this file instead of stdout");
  sub->add_flag("--stable-output", g.stable,
                "Omit wall-clock fields and timestamps so reruns are byte-identical");
}

std::string read_text(const std::string &flag, const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(flag, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A file path, or an inline document when the value starts with '{' / '['.
std::string document_arg(const std::string &flag, const std::string &value) {
  const auto first = value.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (value[first] == '{' || value[first] == '[')) return value;
  return read_text(flag, value);
}

Policy policy_arg(const std::string &flag, const std::string &value) {
  try {
    return parse_policy(document_arg(flag, value));
  } catch (const ParseError &e) {
    throw UsageError(flag, e.what());
  }
}

std::vector<Policy> policies_arg(const std::string &flag, const std::string &value) {
  try {
    const auto doc = json::parse(document_arg(flag, value));
    if (!doc.is_array() || doc.empty()) throw ParseError("expected a non-empty array of policies");
    std::vector<Policy> out;
    for (const auto &p : doc) out.push_back(policy_from_json(p));
    return out;
  } catch (const json::exception &e) {
    throw UsageError(flag, e.what());
  } catch (const ParseError &e) {
    throw UsageError(flag, e.what());
  }
}

std::shared_ptr<const Task> task_arg(const std::string &spec) {
  try {
    return load_task(spec);
  } catch (const Error &e) {
    throw UsageError("--task", e.what());
  }
}

OptimizerKind optimizer_arg(const std::string &name) {
  try {
    return optimizer_from_name(name);
  } catch (const Error &e) {
    throw UsageError("--optimizer", e.what());
  }
}

RankMetric metric_arg(const std::string &name) {
  try {
    return rank_metric_from_name(name);
  } catch (const Error &e) {
    throw UsageError("--metric", e.what());
  }
}

std::vector<std::uint64_t> seed_list(const Globals &g, std::size_t count) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(g.seed + i);
  return out;
}

TrainConfig train_config(const Globals &g, const Options &o) {
  TrainConfig c;
  c.optimizer = optimizer_arg(o.optimizer);
  c.hyper.momentum = o.momentum;
  c.budget_iters = o.iters;
  c.seed = g.seed;
  c.eval_every = o.eval_every;
  return c;
}

json train_config_json(const TrainConfig &c) {
  return {{"optimizer", optimizer_name(c.optimizer)},
          {"momentum", c.hyper.momentum},
          {"budget_iters", c.budget_iters},
          {"eval_every", resolved_eval_every(c)}};
}

void write_file(const std::string &path, const std::string &text) {
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write '" + tmp.string() + "'");
    f << text;
    f.flush();
    if (!f) throw Error("cannot write '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw Error("cannot write '" + path + "': " + ec.message());
}

class Runner {
public:
  Runner(const Globals &g, const Options &o, std::ostream &out, std::ostream &err)
      : g_(g), o_(o), out_(out), err_(err) {}

  int eval();
  int train_cmd();
  int range_test();
  int tune();
  int verify();
  int mopt();
  int db();

private:
  void config(const std::string &command, json fields) {
    json doc = {{"command", command},
                {"seed", g_.seed},
                {"workers", g_.workers},
                {"db", g_.db.empty() ? json(nullptr) : json(g_.db)},
                {"out", g_.out.empty() ? json(nullptr) : json(g_.out)},
                {"stable_output", g_.stable}};
    doc.update(fields);
    err_ << "# config " << doc.dump() << '\n';
  }

  void emit(const std::string &text) {
    if (g_.out.empty()) {
      out_ << text;
    } else {
      write_file(g_.out, text);
    }
  }
  void emit(const json &doc) { emit(doc.dump(2) + "\n"); }

  std::optional<PolicyDb> open_db() {
    if (g_.db.empty()) return std::nullopt;
    auto db = PolicyDb::open(g_.db);
    for (const auto &w : db.warnings()) err_ << "warning: " << w << '\n';
    return db;
  }

  void store(PolicyDb &db, const TrialRecord &rec) {
    db.put(key_of(rec), rec, g_.stable ? kStableTimestamp : "");
  }

  const Globals &g_;
  const Options &o_;
  std::ostream &out_;
  std::ostream &err_;
};

int Runner::eval() {
  const Policy policy = policy_arg("--policy", o_.policy);
  config("eval", {{"policy", policy_to_json(policy)}, {"iters", o_.iters}, {"stride", o_.stride}});
  require_valid(policy, o_.iters);
  emit(series_csv(schedule_series(policy, o_.iters, o_.stride)));
  return kExitOk;
}

int Runner::train_cmd() {
  const auto task = task_arg(o_.task);
  const Policy policy = policy_arg("--policy", o_.policy);
  const auto cfg = train_config(g_, o_);
  json fields = {{"task", o_.task}, {"policy", policy_to_json(policy)}};
  fields.update(train_config_json(cfg));
  config("train", fields);
  const auto rec = train(*task, policy, cfg);
  if (auto db = open_db()) store(*db, rec);
  emit(record_to_json(rec, g_.stable));
  if (!o_.csv.empty()) write_file(o_.csv, record_csv(rec));
  if (rec.diverged) {
    err_ << "error: training diverged at iteration " << rec.series.back().iteration << '\n';
    return kExitDomain;
  }
  return kExitOk;
}

int Runner::range_test() {
  const auto task = task_arg(o_.task);
  auto cfg = train_config(g_, o_);
  const RangeGrid grid{o_.lr_min, o_.lr_max, o_.points, !o_.linear};
  json fields = {{"task", o_.task},
                 {"lr_min", grid.lo},
                 {"lr_max", grid.hi},
                 {"points", grid.points},
                 {"log_spaced", grid.log_spaced},
                 {"budgets_epochs", o_.budgets},
                 {"optimizer", optimizer_name(cfg.optimizer)}};
  config("range-test", fields);
  try {
    grid_values(grid);
  } catch (const Error &e) {
    throw UsageError("--lr-min/--lr-max/--points", e.what());
  }
  const auto result = lr_range_test(*task, grid, o_.budgets, cfg, g_.workers);
  if (auto db = open_db()) {
    for (const auto &r : result.records) store(*db, r);
  }
  auto doc = range_test_to_json(result, g_.stable);
  doc["search_volume_reduction"] = search_volume_reduction(result, grid.lo, grid.hi);
  emit(doc);
  if (!o_.csv.empty()) write_file(o_.csv, range_test_csv(result));
  return kExitOk;
}

int Runner::tune() {
  const auto task = task_arg(o_.task);
  auto cfg = train_config(g_, o_);
  const RankMetric metric = metric_arg(o_.metric);
  const auto seeds = seed_list(g_, o_.seeds);
  SearchSpace space;
  space.families = o_.families;
  space.lr_min = o_.lr_min;
  space.lr_max = o_.lr_max;
  space.points = o_.rates;

  json fields = {{"task", o_.task},
                 {"strategy", o_.strategy},
                 {"metric", rank_metric_name(metric)},
                 {"seeds", seeds},
                 {"top", o_.top}};
  fields.update(train_config_json(cfg));

  TuningReport report;
  if (o_.strategy == "plateau") {
    std::vector<Policy> ordered;
    if (!o_.candidates.empty()) {
      ordered = policies_arg("--candidates", o_.candidates);
    } else {
      ordered = {Fix{o_.lr_max}, Fix{std::sqrt(o_.lr_min * o_.lr_max)}, Fix{o_.lr_min}};
    }
    const int start = o_.start > 0 ? o_.start : (static_cast<int>(ordered.size()) + 1) / 2;
    PlateauConfig pc;
    pc.patience = o_.patience;
    pc.min_delta = o_.min_delta;
    pc.warmup = o_.warmup;
    pc.phase_split = o_.phase_split;
    if (o_.monitor == "val") {
      pc.monitored = Monitored::VAL_LOSS;
    } else if (o_.monitor != "train") {
      throw UsageError("--monitor", "expected train or val");
    }
    fields["start_index"] = start;
    fields["plateau"] = {{"patience", pc.patience},
                         {"min_delta", pc.min_delta},
                         {"monitored", o_.monitor},
                         {"warmup", pc.warmup},
                         {"phase_split", pc.phase_split}};
    json cands = json::array();
    for (const auto &p : ordered) cands.push_back(policy_to_json(p));
    fields["candidates"] = cands;
    config("tune", fields);

    std::vector<std::function<TrialRecord()>> jobs;
    for (auto seed : seeds) {
      TrainConfig c = cfg;
      c.seed = seed;
      jobs.push_back([&task, ordered, start, c, pc] {
        return change_lr_on_plateau(*task, ordered, start, c, pc);
      });
    }
    report.strategy = "plateau";
    report.metric = metric;
    report.candidates = ordered;
    report.records = run_trials(jobs, g_.workers);
    report.ranking = rank_candidates(report.records, metric);
    report.final_ranking = report.ranking;
    report.recommended = report.ranking.front().policy;
  } else {
    std::vector<Policy> candidates;
    try {
      if (!o_.candidates.empty()) {
        candidates = policies_arg("--candidates", o_.candidates);
      } else if (o_.strategy == "grid") {
        candidates = enumerate_grid(space, cfg.budget_iters);
      } else if (o_.strategy == "random") {
        candidates = sample_policies(space, cfg.budget_iters, o_.samples, g_.seed);
      } else {
        throw UsageError("--strategy", "expected grid, random or plateau");
      }
    } catch (const UsageError &) {
      throw;
    } catch (const Error &e) {
      throw UsageError("--families/--lr-min/--lr-max/--samples", e.what());
    }
    json cands = json::array();
    for (const auto &p : candidates) cands.push_back(policy_to_json(p));
    fields["candidates"] = cands;
    fields["explore_budget"] = o_.explore_budget;
    config("tune", fields);
    SearchPlan plan;
    plan.explore_budget = o_.explore_budget;
    plan.top_k = o_.top;
    plan.metric = metric;
    report = explore_and_exploit(*task, o_.strategy, candidates, seeds, cfg, plan, g_.workers);
  }
  if (auto db = open_db()) {
    for (const auto &r : report.records) store(*db, r);
    for (const auto &r : report.reruns) store(*db, r);
  }
  emit(tuning_report_to_json(report, g_.stable));
  bool all_diverged = true;
  for (const auto &r : report.records) all_diverged = all_diverged && r.diverged;
  if (all_diverged) {
    err_ << "error: every trial diverged\n";
    return kExitDomain;
  }
  return kExitOk;
}

int Runner::verify() {
  const auto task = task_arg(o_.task);
  const Policy policy = policy_arg("--policy", o_.policy);
  VerifyConfig vc;
  vc.target_top1 = o_.target;
  vc.top_n = o_.top;
  vc.seeds = seed_list(g_, o_.seeds);
  vc.train = train_config(g_, o_);
  vc.range_grid = {o_.lr_min, o_.lr_max, o_.points, !o_.linear};
  vc.range_budgets = o_.budgets;
  vc.workers = g_.workers;
  json fields = {{"task", o_.task},
                 {"policy", policy_to_json(policy)},
                 {"target_acc", vc.target_top1},
                 {"top", vc.top_n},
                 {"seeds", vc.seeds},
                 {"range", {{"lr_min", o_.lr_min}, {"lr_max", o_.lr_max}, {"points", o_.points}}},
                 {"budgets_epochs", o_.budgets}};
  fields.update(train_config_json(vc.train));
  config("verify", fields);
  auto db = open_db();
  if (!db) err_ << "note: no --db given, phase 2 has no stored policies\n";
  const PolicyDb empty = PolicyDb::in_memory();
  const auto verdict = verify_policy(policy, *task, db ? *db : empty, vc);
  emit(verdict_to_json(verdict, g_.stable));
  return verdict.verified ? kExitOk : kExitDomain;
}

int Runner::mopt() {
  const auto task = task_arg(o_.task);
  const Policy policy = policy_arg("--policy", o_.policy);
  const auto cfg = train_config(g_, o_);
  json fields = {{"task", o_.task}, {"policy", policy_to_json(policy)}, {"M", o_.m_stride}};
  fields.update(train_config_json(cfg));
  config("mopt", fields);
  emit(m_opt_csv(m_opt_trace(*task, policy, cfg, o_.m_stride)));
  return kExitOk;
}

int Runner::db() {
  json fields = {{"action", o_.action}};
  if (!o_.dataset.empty()) fields["dataset"] = o_.dataset;
  if (!o_.model.empty()) fields["model"] = o_.model;
  fields["optimizer"] = o_.optimizer;
  if (o_.action == "top") {
    fields["metric"] = o_.metric;
    fields["n"] = o_.n;
  }
  if (!o_.file.empty()) fields["file"] = o_.file;
  config("db", fields);
  if (g_.db.empty()) throw UsageError("--db", "required for db commands");
  auto db = *open_db();

  if (o_.action == "import" || o_.action == "export") {
    if (o_.file.empty()) throw UsageError("--file", "required for " + o_.action);
    const auto count = o_.action == "import" ? db.import_from(o_.file) : db.export_to(o_.file);
    emit(std::string(o_.action == "import" ? "imported " : "exported ") + std::to_string(count) +
         " records\n");
    return kExitOk;
  }
  if (o_.action == "top") {
    if (o_.dataset.empty() || o_.model.empty()) {
      throw UsageError("--dataset/--model", "required for top");
    }
    const auto metric = metric_arg(o_.metric);
    json doc = json::array();
    for (const auto &e : db.top_n({o_.dataset, o_.model, o_.optimizer}, metric, o_.n)) {
      doc.push_back({{"id", e.id},
                     {"policy", policy_to_json(e.policy)},
                     {"value", e.value ? json(*e.value) : json("unreached")},
                     {"seed", e.record.seed}});
    }
    emit(doc);
    return kExitOk;
  }

  // list
  std::vector<DbRecord> rows;
  for (const auto &key : db.keys()) {
    if (!o_.dataset.empty() && key.dataset_id != o_.dataset) continue;
    if (!o_.model.empty() && key.model_id != o_.model) continue;
    for (auto &r : db.query(key)) rows.push_back(std::move(r));
  }
  std::sort(rows.begin(), rows.end(),
            [](const DbRecord &a, const DbRecord &b) { return a.id < b.id; });
  if (o_.as_json) {
    json doc = json::array();
    for (const auto &r : rows) doc.push_back(db_record_to_json(r));
    emit(doc);
    return kExitOk;
  }
  std::string text = "id\tdataset\tmodel\toptimizer\tseed\tpeak_top1\tfinal_loss\tpolicy\n";
  char buf[64];
  for (const auto &r : rows) {
    text += std::to_string(r.id) + '\t' + r.key.dataset_id + '\t' + r.key.model_id + '\t' +
            r.key.optimizer_id + '\t' + std::to_string(r.record.seed) + '\t';
    if (r.record.peak_top1) {
      std::snprintf(buf, sizeof buf, "%.6f", *r.record.peak_top1);
      text += buf;
    } else {
      text += "-";
    }
    std::snprintf(buf, sizeof buf, "\t%.6g\t", r.record.final_loss);
    text += buf;
    text += serialize_policy(r.record.policy) + '\n';
  }
  emit(text);
  return kExitOk;
}

void add_train_flags(CLI::App *sub, Options &o, bool budget_required = false) {
  auto *iters = sub->add_option("--iters", o.iters, "Training budget in iterations")
                    ->check(CLI::PositiveNumber);
  if (budget_required) {
    iters->required();
  } else {
    iters->capture_default_str();
  }
  sub->add_option("--optimizer", o.optimizer, "sgd, momentum or adam")->capture_default_str();
  sub->add_option("--momentum", o.momentum, "Momentum coefficient (momentum optimizer)")
      ->capture_default_str();
  sub->add_option("--eval-every", o.eval_every,
                  "Validation cadence in iterations (0: budget/100)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

void add_range_flags(CLI::App *sub, Options &o) {
  sub->add_option("--lr-min", o.lr_min, "Lower end of the learning-rate interval")
      ->capture_default_str();
  sub->add_option("--lr-max", o.lr_max, "Upper end of the learning-rate interval")
      ->capture_default_str();
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Learning-rate policy toolkit: schedules, training trials, tuning and verification",
               "lrtool"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  Globals g;
  Options o;

  auto *eval = app.add_subcommand("eval", "Print a policy's learning-rate schedule as CSV");
  eval->add_option("--policy", o.policy, "Policy document (file or inline JSON)")->required();
  eval->add_option("--iters", o.iters, "Number of iterations")->required()->check(CLI::PositiveNumber);
  eval->add_option("--stride", o.stride, "Row spacing in iterations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto *trn = app.add_subcommand("train", "Run one training trial and print its record as JSON");
  trn->add_option("--task", o.task, "Task spec, e.g. blobs2 or moons2(noise=0.3)")->required();
  trn->add_option("--policy", o.policy, "Policy document (file or inline JSON)")->required();
  add_train_flags(trn, o);
  trn->add_option("--csv", o.csv, "Also write iter,loss,top1,lr rows to this file");

  auto *range = app.add_subcommand("range-test", "Sweep fixed learning rates and recommend a range");
  range->add_option("--task", o.task, "Task spec")->required();
  add_range_flags(range, o);
  range->add_option("--points", o.points, "Grid points")->check(CLI::Range(4, 1000))->capture_default_str();
  range->add_flag("--linear", o.linear, "Space the grid linearly instead of logarithmically");
  range->add_option("--budgets", o.budgets, "Comma-separated epoch budgets")
      ->delimiter(',')
      ->capture_default_str();
  range->add_option("--optimizer", o.optimizer, "sgd, momentum or adam")->capture_default_str();
  range->add_option("--csv", o.csv, "Also write lr,budget_epochs,top1 rows to this file");

  auto *tune = app.add_subcommand("tune", "Search policies and print a tuning report as JSON");
  tune->add_option("--task", o.task, "Task spec")->required();
  tune->add_option("--strategy", o.strategy, "grid, random or plateau")
      ->check(CLI::IsMember({"grid", "random", "plateau"}))
      ->capture_default_str();
  tune->add_option("--budget", o.iters, "Full training budget in iterations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tune->add_option("--top", o.top, "Candidates rerun at the full budget")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tune->add_option("--explore-budget", o.explore_budget,
                   "Exploration budget per candidate (0: single stage at --budget)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  tune->add_option("--seeds", o.seeds, "Seeds per candidate")->check(CLI::PositiveNumber)->capture_default_str();
  tune->add_option("--metric", o.metric, "peak_top1, final_loss or iters_to_target:<acc>")
      ->capture_default_str();
  tune->add_option("--candidates", o.candidates,
                   "JSON array of policies (file or inline); plateau expects them ordered high to low");
  add_range_flags(tune, o);
  tune->add_option("--families", o.families, "Comma-separated policy families for grid/random")
      ->delimiter(',')
      ->capture_default_str();
  tune->add_option("--rates", o.rates, "Rate values per axis in the grid")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tune->add_option("--samples", o.samples, "Random-search candidates")->capture_default_str();
  tune->add_option("--start", o.start, "Plateau start index, 1-based (0: middle)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  tune->add_option("--patience", o.patience, "Plateau patience in observations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tune->add_option("--min-delta", o.min_delta, "Plateau minimum improvement")->capture_default_str();
  tune->add_option("--monitor", o.monitor, "Plateau signal: train or val")
      ->check(CLI::IsMember({"train", "val"}))
      ->capture_default_str();
  tune->add_option("--warmup", o.warmup, "Iterations before plateau actions are allowed")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  tune->add_option("--phase-split", o.phase_split, "Budget share after which only decreases happen")
      ->capture_default_str();
  tune->add_option("--optimizer", o.optimizer, "sgd, momentum or adam")->capture_default_str();
  tune->add_option("--momentum", o.momentum, "Momentum coefficient (momentum optimizer)")
      ->capture_default_str();
  tune->add_option("--eval-every", o.eval_every, "Validation cadence in iterations (0: budget/100)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  auto *ver = app.add_subcommand("verify", "Verify a policy against a target accuracy");
  ver->add_option("--policy", o.policy, "Policy document (file or inline JSON)")->required();
  ver->add_option("--task", o.task, "Task spec")->required();
  ver->add_option("--target-acc", o.target, "Target top-1 accuracy in [0,1]")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  ver->add_option("--top", o.top, "Stored policies compared in phase 2")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ver->add_option("--seeds", o.seeds, "Seeds per policy")->check(CLI::PositiveNumber)->capture_default_str();
  add_train_flags(ver, o);
  add_range_flags(ver, o);
  ver->add_option("--points", o.points, "Phase-3 range-test grid points")
      ->check(CLI::Range(4, 1000))
      ->capture_default_str();
  ver->add_flag("--linear", o.linear, "Space the phase-3 grid linearly");
  ver->add_option("--budgets", o.budgets, "Comma-separated phase-3 epoch budgets")
      ->delimiter(',')
      ->capture_default_str();

  auto *mopt = app.add_subcommand("mopt", "Print M-opt learning-rate estimates as CSV");
  mopt->add_option("--task", o.task, "Task spec")->required();
  mopt->add_option("--policy", o.policy, "Policy document (file or inline JSON)")->required();
  mopt->add_option("--M", o.m_stride, "Snapshot stride in iterations")
      ->required()
      ->check(CLI::PositiveNumber);
  add_train_flags(mopt, o);

  auto *dbc = app.add_subcommand("db", "Inspect and move policy store contents");
  dbc->add_option("action", o.action, "list, top, import or export")
      ->required()
      ->check(CLI::IsMember({"list", "top", "import", "export"}));
  dbc->add_option("--dataset", o.dataset, "Dataset/task id of the key");
  dbc->add_option("--model", o.model, "Model id of the key");
  dbc->add_option("--optimizer", o.optimizer, "Optimizer id of the key")->capture_default_str();
  dbc->add_option("--metric", o.metric, "Ranking metric for top")->capture_default_str();
  dbc->add_option("--n", o.n, "Entries returned by top")->check(CLI::PositiveNumber)->capture_default_str();
  dbc->add_option("--file", o.file, "JSON-lines file for import/export");
  dbc->add_flag("--json", o.as_json, "List records as JSON instead of a table");

  for (auto *sub : {eval, trn, range, tune, ver, mopt, dbc}) add_globals(sub, g);

  std::vector<std::string> argv_store{"lrtool"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char *> argv;
  for (const auto &a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError &e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  Runner run(g, o, out, err);
  try {
    if (*eval) return run.eval();
    if (*trn) return run.train_cmd();
    if (*range) return run.range_test();
    if (*tune) return run.tune();
    if (*ver) return run.verify();
    if (*mopt) return run.mopt();
    if (*dbc) return run.db();
  } catch (const UsageError &e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}

} // namespace lrpolicy
